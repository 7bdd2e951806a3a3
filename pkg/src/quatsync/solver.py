"""Recovering absolute sensor attitudes from pairwise relative attitudes.

Given ``N`` sensors with unknown attitudes ``q_1 .. q_N`` (unit quaternions)
and the complete matrix of relative attitudes ``O_ij = q_i * conj(q_j)``,
the attitude vector is recovered from the dominant eigenpair of ``O``:

* a noiseless ``O`` equals ``Q Q*``, is rank 1 with trace ``N``, so its
  spectrum is ``N`` (once) and ``0`` (``N-1`` times), and any unit-norm
  dominant eigenvector is right-collinear to ``Q``;
* with noise, the dominant eigenvector of the measured matrix is scaled to
  ``R = sqrt(N) V1``, the residual right-gauge is fixed against the
  reference sensors by the least-squares unit quaternion ``s``, and each
  component of ``R s`` is normalized back to a unit quaternion.

Without any reference the solution is determined only up to a common right
unit-quaternion factor (the gauge ambiguity).

Two scalar criteria quantify the fit: ``C1(P) = ||O_hat - P P*||_F**2``
(how well a candidate vector reproduces the measured matrix) and
``C2(t) = ||Q_r - R_r t||**2`` (how well a gauge aligns the eigenvector with
the references).  Both have closed forms at the solver's choice, used as
self-checks.  Validation-mode diagnostics compare the measured matrix with
a known ground truth via Weyl and Davis-Kahan perturbation bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quat import Quaternion, UnitQuaternion
from .qmat import (
    EigenPair,
    PowerIterationOptions,
    QuatMatrix,
    QuatVector,
    align_right_gauge,
    hermitian_spectrum,
    matrix_from_json,
    matrix_to_json,
    power_iteration,
)

__all__ = [
    "AttitudeVector",
    "ReferenceSet",
    "RelativeAttitudeMatrix",
    "SolveReport",
    "BoundsReport",
    "DegenerateEigenvectorError",
    "build_relative_matrix",
    "solve",
    "compute_s",
    "criterion_c1",
    "criterion_c2",
    "relative_error",
    "attitude_error",
    "bounds_report",
    "problem_to_json",
    "problem_from_json",
    "report_to_json",
]

#: Entry-level tolerance for RelativeAttitudeMatrix invariants.
MATRIX_TOL = 1e-9
#: A component of the estimated vector below this norm cannot be normalized.
DEGENERATE_TOL = 1e-12


class DegenerateEigenvectorError(Exception):
    """A component of the estimated attitude vector has (near-)zero norm.

    Normalizing it would be arbitrary; this level of cancellation only
    happens when the input noise is far beyond the solver's validity regime.
    """


class AttitudeVector:
    """A length-N vector of unit quaternions in canonical sign.

    Entries are renormalized (within the same tolerance policy as
    ``UnitQuaternion``) and sign-canonicalized on construction, so two
    vectors describing the same rotations compare equal componentwise.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        a = np.asarray(data, dtype=float)
        if a.ndim != 2 or a.shape[1] != 4 or a.shape[0] < 1:
            raise ValueError(f"expected an (n, 4) array with n >= 1, got shape {a.shape}")
        norms = np.linalg.norm(a, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            worst = int(np.argmax(np.abs(norms - 1.0)))
            raise ValueError(
                f"entry {worst} is not a unit quaternion (|q| = {norms[worst]!r})")
        a = a / norms[:, None]
        # canonical sign: w > 0, ties broken on the first nonzero imaginary part
        flip = np.zeros(len(a), dtype=bool)
        undecided = np.ones(len(a), dtype=bool)
        for c in range(4):
            col = a[:, c]
            flip |= undecided & (col < 0.0)
            undecided &= col == 0.0
        a[flip] *= -1.0
        self.data = a

    @classmethod
    def from_quaternions(cls, quats) -> "AttitudeVector":
        return cls(np.array([q.to_array() for q in quats]))

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, i: int) -> UnitQuaternion:
        return UnitQuaternion.from_array(self.data[i])

    def as_quat_vector(self) -> QuatVector:
        return QuatVector(self.data)

    def right_multiplied(self, s: UnitQuaternion) -> "AttitudeVector":
        """Common right gauge change ``q_i -> q_i * s`` (re-canonicalized)."""
        return AttitudeVector(self.as_quat_vector().right_multiply(s).data)

    def __repr__(self):
        return f"AttitudeVector(n={len(self)})"


@dataclass(frozen=True)
class ReferenceSet:
    """Sensors whose absolute attitude is known a priori.

    ``indices`` are 0-based, strictly increasing and distinct; an empty set
    means the solve can only fix the solution up to a common right gauge.
    """

    indices: tuple[int, ...]
    attitudes: tuple[UnitQuaternion, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        att = tuple(self.attitudes)
        if len(idx) != len(att):
            raise ValueError(f"{len(idx)} indices but {len(att)} attitudes")
        if any(i < 0 for i in idx):
            raise ValueError(f"reference indices must be non-negative, got {idx}")
        if any(a >= b for a, b in zip(idx, idx[1:])):
            raise ValueError(f"reference indices must be strictly increasing, got {idx}")
        if not all(isinstance(a, UnitQuaternion) for a in att):
            raise ValueError("reference attitudes must be UnitQuaternion instances")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "attitudes", att)

    @classmethod
    def empty(cls) -> "ReferenceSet":
        return cls((), ())

    @classmethod
    def single(cls, index: int, attitude: UnitQuaternion) -> "ReferenceSet":
        return cls((index,), (attitude,))

    def __len__(self) -> int:
        return len(self.indices)

    def as_quat_vector(self) -> QuatVector:
        return QuatVector.from_quaternions(self.attitudes)


class RelativeAttitudeMatrix:
    """The NxN matrix of measured pairwise relative attitudes.

    Valid instances are hermitian, have every entry of unit norm and a unit
    diagonal (each within ``MATRIX_TOL``); violations raise ``ValueError``
    naming the broken invariant.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix: QuatMatrix):
        n = matrix.rows
        if matrix.cols != n:
            raise ValueError(f"relative attitude matrix must be square, got "
                             f"{n}x{matrix.cols}")
        if not matrix.is_hermitian(tol=MATRIX_TOL):
            raise ValueError("relative attitude matrix is not hermitian")
        norms = np.linalg.norm(matrix.data, axis=2)
        if np.any(np.abs(norms - 1.0) > MATRIX_TOL):
            i, j = np.unravel_index(int(np.argmax(np.abs(norms - 1.0))), norms.shape)
            raise ValueError(f"relative attitude matrix entry ({i}, {j}) is not a "
                             f"unit quaternion (|q| = {norms[i, j]!r})")
        diag = matrix.data[np.arange(n), np.arange(n)]
        ident = np.zeros(4)
        ident[0] = 1.0
        if np.any(np.linalg.norm(diag - ident, axis=1) > MATRIX_TOL):
            i = int(np.argmax(np.linalg.norm(diag - ident, axis=1)))
            raise ValueError(f"relative attitude matrix diagonal entry {i} is not 1")
        self.matrix = matrix

    @property
    def n(self) -> int:
        return self.matrix.rows

    def __repr__(self):
        return f"RelativeAttitudeMatrix(n={self.n})"


def build_relative_matrix(attitudes: AttitudeVector) -> RelativeAttitudeMatrix:
    """The relative attitude matrix ``O = Q Q*``, i.e. ``O_ij = q_i conj(q_j)``.

    Hermitian with unit diagonal by construction, rank 1 with trace N.  The
    lower triangle is written as the exact conjugate of the upper one so the
    matrix is hermitian to the last bit, not merely to round-off.
    """
    q = attitudes.as_quat_vector()
    d = q.outer(q).data
    n = d.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    d[ju, iu] = d[iu, ju] * np.array([1.0, -1.0, -1.0, -1.0])
    return RelativeAttitudeMatrix(QuatMatrix(d))


def _gauge_raw(r_r: QuatVector, q_r: QuatVector) -> Quaternion:
    """Least-squares gauge: minimizes ||q_r - r_r t||**2 over quaternions t.

    Because ``r_r* r_r`` is the real scalar ``||r_r||**2``, the normal
    equation collapses to ``t = (r_r* q_r) / ||r_r||**2``.
    """
    if len(r_r) != len(q_r):
        raise ValueError(f"length mismatch: {len(r_r)} vs {len(q_r)}")
    if len(r_r) == 0:
        raise ValueError("reference vectors must be non-empty")
    nr2 = r_r.frobenius_norm() ** 2
    if nr2 < DEGENERATE_TOL ** 2:
        raise ValueError("eigenvector restricted to the references has zero norm")
    return r_r.inner(q_r) * (1.0 / nr2)


def compute_s(r_r: QuatVector, q_r: QuatVector) -> UnitQuaternion:
    """Unit gauge quaternion aligning the eigenvector with the references.

    The raw least-squares solution is renormalized so the gauge stays a pure
    rotation; under noise it is not exactly unit.
    """
    return _gauge_raw(r_r, q_r).normalized()


def criterion_c1(o_hat: RelativeAttitudeMatrix, p: QuatVector) -> float:
    """Reconstruction criterion ``C1(P) = ||O_hat - P P*||_F**2``.

    At ``P = sqrt(N) V1`` this equals ``2 N**2 (1 - lambda1/N)`` because the
    matrix has exactly ``N**2`` unit entries.
    """
    if len(p) != o_hat.n:
        raise ValueError(f"vector length {len(p)} does not match matrix size {o_hat.n}")
    return (o_hat.matrix - p.outer(p)).frobenius_norm() ** 2


def criterion_c2(q_r: QuatVector, r_r: QuatVector, t: Quaternion) -> float:
    """Gauge criterion ``C2(t) = ||Q_r - R_r t||**2``."""
    if len(q_r) != len(r_r):
        raise ValueError(f"length mismatch: {len(q_r)} vs {len(r_r)}")
    return (q_r - r_r.right_multiply(t)).frobenius_norm() ** 2


def relative_error(x_hat, x) -> float:
    """Relative Frobenius error ``e(X) = ||X_hat - X||_F / ||X||_F``."""
    a, b = x_hat, x
    if isinstance(a, RelativeAttitudeMatrix):
        a = a.matrix
    if isinstance(b, RelativeAttitudeMatrix):
        b = b.matrix
    ref = b.frobenius_norm()
    if ref <= 0.0:
        raise ValueError("reference has zero norm; relative error is undefined")
    return (a - b).frobenius_norm() / ref


def attitude_error(q_hat: AttitudeVector, q: AttitudeVector) -> float:
    """Relative error between attitude vectors, insensitive to the double cover.

    Each estimate is replaced by ``+/- q_hat_i``, whichever is closer to the
    truth, before the relative Frobenius error is taken; a pure sign flip
    therefore scores zero.
    """
    if len(q_hat) != len(q):
        raise ValueError(f"length mismatch: {len(q_hat)} vs {len(q)}")
    a, b = q_hat.data, q.data
    signs = np.where(np.sum(a * b, axis=1) < 0.0, -1.0, 1.0)
    diff = a * signs[:, None] - b
    return float(np.linalg.norm(diff) / np.linalg.norm(b))


@dataclass(frozen=True)
class SolveReport:
    """Everything the solver knows after one run.

    ``gauge`` is the unit quaternion that aligned the eigenvector with the
    references (absent when no references were given, in which case the
    attitudes carry an arbitrary common right factor and ``gauge_fixed`` is
    False).  ``c1_value`` and ``c2_value`` are the criteria evaluated at the
    solver's choices; ``c2_value`` is absent without references.
    """

    attitudes: AttitudeVector
    lambda1: float
    gauge: UnitQuaternion | None
    c1_value: float
    c2_value: float | None
    gauge_fixed: bool
    iterations: int


def solve(o_hat: RelativeAttitudeMatrix, refs: ReferenceSet,
          options: PowerIterationOptions | None = None) -> SolveReport:
    """Estimate all sensor attitudes from a measured relative attitude matrix.

    Steps: (1) dominant eigenpair of the matrix by power iteration, scaled
    to ``R = sqrt(N) V1``; (2) least-squares unit gauge ``s`` against the
    reference attitudes (identity when there are none); (3) ``Q = R s``;
    (4) componentwise normalization to unit quaternions, sign-canonicalized.
    The normalization in step 4 only rescales by a positive real, so it
    never changes the rotation axis of a component.

    Raises ``ConvergenceError`` if the eigensolver stalls and
    ``DegenerateEigenvectorError`` if a component of ``R s`` is too small to
    normalize.
    """
    n = o_hat.n
    for i in refs.indices:
        if i >= n:
            raise ValueError(f"reference index {i} out of range for {n} sensors")

    pair: EigenPair = power_iteration(o_hat.matrix, options)
    r = pair.vector.scaled(np.sqrt(n))

    c2_value = None
    if len(refs) > 0:
        r_r = r.take(refs.indices)
        q_r = refs.as_quat_vector()
        s_raw = _gauge_raw(r_r, q_r)
        if s_raw.norm() < DEGENERATE_TOL:
            raise DegenerateEigenvectorError(
                "gauge estimate collapsed to zero; references are inconsistent "
                "with the eigenvector")
        c2_value = criterion_c2(q_r, r_r, s_raw)
        gauge = s_raw.normalized()
        gauge_fixed = True
    else:
        gauge = UnitQuaternion.identity()
        gauge_fixed = False

    q_raw = r.right_multiply(gauge)
    norms = np.linalg.norm(q_raw.data, axis=1)
    if np.any(norms < DEGENERATE_TOL):
        bad = int(np.argmin(norms))
        raise DegenerateEigenvectorError(
            f"component {bad} of the estimated vector has norm {norms[bad]:.3e}; "
            "input noise is beyond the solver's validity regime")
    attitudes = AttitudeVector(q_raw.data / norms[:, None])

    return SolveReport(
        attitudes=attitudes,
        lambda1=pair.value,
        gauge=gauge if gauge_fixed else None,
        c1_value=criterion_c1(o_hat, r),
        c2_value=c2_value,
        gauge_fixed=gauge_fixed,
        iterations=pair.iterations,
    )


@dataclass(frozen=True)
class BoundsReport:
    """Perturbation diagnostics against a known ground truth.

    Weyl's inequalities require ``1 - e(O) <= lambda1/N <= 1`` and
    ``|lambda_i|/N <= e(O)`` for the tail; when ``e(O) < 1/2`` the eigengap
    is provably positive and the Davis-Kahan bound
    ``e(R) <= e(O) / (1 - 2 e(O))`` applies to the gauge-aligned dominant
    eigenvector.  Violations are reported as flags, never raised.
    """

    e_O: float
    lambda1_over_N: float
    max_tail_over_N: float
    eigengap: float
    dk_bound: float | None
    e_R: float | None
    weyl_ok: bool
    dk_ok: bool | None


#: Slack absorbing eigensolver round-off in the bound checks.
_BOUND_SLACK = 1e-9


def bounds_report(o_hat: RelativeAttitudeMatrix, o: RelativeAttitudeMatrix,
                  r_hat: QuatVector | None = None,
                  r: QuatVector | None = None) -> BoundsReport:
    """Check the Weyl and Davis-Kahan bounds on a (measured, truth) pair.

    Needs the noiseless ground truth, so this is a simulation/validation
    tool; the production solve never requires it.  ``r_hat``/``r`` are the
    dominant eigenvectors of the measured and true matrices (any common
    scaling); when given and ``e(O) < 1/2``, the eigenvector error after
    right-gauge alignment is checked against the Davis-Kahan bound.
    """
    if o_hat.n != o.n:
        raise ValueError(f"size mismatch: {o_hat.n} vs {o.n}")
    n = o.n
    e_o = relative_error(o_hat, o)
    vals = hermitian_spectrum(o_hat.matrix)
    lambda1_over_n = float(vals[0]) / n
    if n > 1:
        max_tail_over_n = float(np.max(np.abs(vals[1:]))) / n
        eigengap = float(vals[0] - vals[1])
    else:
        max_tail_over_n = 0.0
        eigengap = float(vals[0])
    weyl_ok = (1.0 - e_o <= lambda1_over_n + _BOUND_SLACK
               and lambda1_over_n <= 1.0 + _BOUND_SLACK
               and max_tail_over_n <= e_o + _BOUND_SLACK)

    e_r = None
    if r_hat is not None and r is not None:
        aligned = align_right_gauge(r_hat, r)
        e_r = (aligned - r).frobenius_norm() / r.frobenius_norm()

    if e_o < 0.5:
        dk_bound = e_o / (1.0 - 2.0 * e_o)
        dk_ok = (e_r <= dk_bound + _BOUND_SLACK) if e_r is not None else None
    else:
        dk_bound = None
        dk_ok = None

    return BoundsReport(
        e_O=e_o,
        lambda1_over_N=lambda1_over_n,
        max_tail_over_N=max_tail_over_n,
        eigengap=eigengap,
        dk_bound=dk_bound,
        e_R=e_r,
        weyl_ok=weyl_ok,
        dk_ok=dk_ok,
    )


# ---------------------------------------------------------------------------
# JSON wire formats

def problem_to_json(o_hat: RelativeAttitudeMatrix, refs: ReferenceSet) -> dict:
    """Problem file: sensor count, relative matrix and reference attitudes."""
    return {
        "n": o_hat.n,
        "relative": matrix_to_json(o_hat.matrix),
        "references": [
            {"index": i, "attitude": [float(c) for c in a.to_array()]}
            for i, a in zip(refs.indices, refs.attitudes)
        ],
    }


def problem_from_json(obj: dict) -> tuple[RelativeAttitudeMatrix, ReferenceSet]:
    if not isinstance(obj, dict):
        raise ValueError("problem JSON must be an object")
    for field in ("n", "relative", "references"):
        if field not in obj:
            raise ValueError(f"problem JSON is missing the '{field}' field")
    n = int(obj["n"])
    matrix = matrix_from_json(obj["relative"])
    if matrix.rows != n or matrix.cols != n:
        raise ValueError(f"problem declares n={n} but the relative matrix is "
                         f"{matrix.rows}x{matrix.cols}")
    o_hat = RelativeAttitudeMatrix(matrix)
    entries = []
    for k, ref in enumerate(obj["references"]):
        try:
            idx = int(ref["index"])
            att = UnitQuaternion.from_array(np.asarray(ref["attitude"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"reference {k} is malformed: {exc}") from exc
        entries.append((idx, att))
    entries.sort(key=lambda e: e[0])
    refs = ReferenceSet(tuple(i for i, _ in entries), tuple(a for _, a in entries))
    for i in refs.indices:
        if i >= n:
            raise ValueError(f"reference index {i} out of range for n={n}")
    return o_hat, refs


def report_to_json(report: SolveReport) -> dict:
    return {
        "attitudes": [[float(c) for c in row] for row in report.attitudes.data],
        "lambda1": report.lambda1,
        "gauge": ([float(c) for c in report.gauge.to_array()]
                  if report.gauge is not None else None),
        "c1_value": report.c1_value,
        "c2_value": report.c2_value,
        "gauge_fixed": report.gauge_fixed,
        "iterations": report.iterations,
    }
