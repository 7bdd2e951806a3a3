"""Dense quaternion matrices and the eigenmachinery built on them.

Three layers live here:

* ``QuatVector`` / ``QuatMatrix``: dense quaternion arrays stored as float64
  ndarrays of shape ``(..., 4)`` in scalar-first order, with the Hamilton
  product applied in the right-module convention ``(A x)_i = sum_k A_ik x_k``.
* the complex adjoint: the standard embedding of an NxM quaternion matrix
  into a 2Nx2M complex matrix.  It preserves hermiticity, multiplies
  Frobenius norms by sqrt(2), keeps the operator norm, and doubles the
  multiplicity of every eigenvalue, which turns quaternion spectral
  questions into ordinary complex ones.
* eigensolvers: a normalized power iteration for hermitian quaternion
  matrices (the production path, returning the dominant eigenpair only) and
  an independent dense complex hermitian eigensolver (cyclic Jacobi) used as
  the oracle for full spectra and for cross-checking the power iteration.

Hermitian quaternion matrices have real right-eigenvalues and an orthonormal
right-eigenbase; eigenvectors are determined only up to a right unit
quaternion factor (``A V = V l`` implies ``A (V s) = (V s) l`` for real
``l``), hence the gauge-alignment helper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quat import Quaternion

__all__ = [
    "QuatVector",
    "QuatMatrix",
    "complex_adjoint",
    "complex_embed",
    "jacobi_eigh",
    "hermitian_spectrum",
    "operator_norm",
    "PowerIterationOptions",
    "EigenPair",
    "power_iteration",
    "align_right_gauge",
    "ConvergenceError",
    "SpectrumPairingError",
    "matrix_to_json",
    "matrix_from_json",
]


class ConvergenceError(Exception):
    """An iterative eigensolver failed to reach its tolerance.

    Carries the last observed residual; for power iteration this signals a
    (near-)zero gap between the two largest eigenvalue moduli.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class SpectrumPairingError(Exception):
    """Complex-adjoint eigenvalues failed to pair up.

    The complex adjoint of a hermitian quaternion matrix has every
    eigenvalue with even multiplicity; a pairing failure means the input
    lost its hermitian structure.
    """


# ---------------------------------------------------------------------------
# raw (..., 4) array kernels

def _conj(a: np.ndarray) -> np.ndarray:
    out = a.copy()
    out[..., 1:] = -out[..., 1:]
    return out


def _hamilton(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Elementwise/broadcast Hamilton product of (..., 4) arrays."""
    pw, px, py, pz = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    qw, qx, qy, qz = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ], axis=-1)


def _matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Quaternion matrix product on raw arrays, (n,m,4) @ (m,4) or (m,k,4).

    Each quaternion component of the result is a combination of four real
    matrix products, so the heavy lifting stays in BLAS.
    """
    aw, ax, ay, az = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    bw, bx, by, bz = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack([
        aw @ bw - ax @ bx - ay @ by - az @ bz,
        aw @ bx + ax @ bw + ay @ bz - az @ by,
        aw @ by - ax @ bz + ay @ bw + az @ bx,
        aw @ bz + ax @ by - ay @ bx + az @ bw,
    ], axis=-1)


def _outer_conj(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Outer product with conjugated second factor: out[i, j] = v_i * conj(w_j)."""
    o = np.multiply.outer
    vw, vx, vy, vz = v[:, 0], v[:, 1], v[:, 2], v[:, 3]
    ww, wx, wy, wz = w[:, 0], w[:, 1], w[:, 2], w[:, 3]
    return np.stack([
        o(vw, ww) + o(vx, wx) + o(vy, wy) + o(vz, wz),
        -o(vw, wx) + o(vx, ww) - o(vy, wz) + o(vz, wy),
        -o(vw, wy) + o(vx, wz) + o(vy, ww) - o(vz, wx),
        -o(vw, wz) - o(vx, wy) + o(vy, wx) + o(vz, ww),
    ], axis=-1)


def _as_quat_array(data, ndim: int) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    if a.ndim != ndim or a.shape[-1] != 4:
        raise ValueError(f"expected an array of shape {'(n, 4)' if ndim == 2 else '(rows, cols, 4)'}, "
                         f"got {a.shape}")
    return a.copy()


class QuatVector:
    """A dense vector of quaternions, stored as an (n, 4) float64 array."""

    __slots__ = ("data",)

    def __init__(self, data):
        self.data = _as_quat_array(data, 2)

    @classmethod
    def from_quaternions(cls, quats) -> "QuatVector":
        return cls(np.array([q.to_array() for q in quats]))

    @classmethod
    def zeros(cls, n: int) -> "QuatVector":
        return cls(np.zeros((n, 4)))

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getitem__(self, i: int) -> Quaternion:
        return Quaternion.from_array(self.data[i])

    def __add__(self, other: "QuatVector") -> "QuatVector":
        return QuatVector(self.data + other.data)

    def __sub__(self, other: "QuatVector") -> "QuatVector":
        return QuatVector(self.data - other.data)

    def scaled(self, k: float) -> "QuatVector":
        return QuatVector(self.data * float(k))

    def conjugated(self) -> "QuatVector":
        return QuatVector(_conj(self.data))

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def inner(self, other: "QuatVector") -> Quaternion:
        """Quaternion inner product ``self* . other = sum_i conj(self_i) other_i``."""
        if len(self) != len(other):
            raise ValueError(f"length mismatch: {len(self)} vs {len(other)}")
        return Quaternion.from_array(
            _hamilton(_conj(self.data), other.data).sum(axis=0))

    def right_multiply(self, q: Quaternion) -> "QuatVector":
        """Componentwise right multiplication ``v_i -> v_i * q``."""
        return QuatVector(_hamilton(self.data, q.to_array()))

    def outer(self, other: "QuatVector") -> "QuatMatrix":
        """Rank-1 matrix with entries ``self_i * conj(other_j)``."""
        return QuatMatrix(_outer_conj(self.data, other.data))

    def take(self, indices) -> "QuatVector":
        return QuatVector(self.data[np.asarray(indices, dtype=int)])

    def __repr__(self):
        return f"QuatVector(n={len(self)})"


class QuatMatrix:
    """A dense quaternion matrix, stored as a (rows, cols, 4) float64 array."""

    __slots__ = ("data",)

    def __init__(self, data):
        self.data = _as_quat_array(data, 3)

    @classmethod
    def from_quaternions(cls, rows) -> "QuatMatrix":
        return cls(np.array([[q.to_array() for q in row] for row in rows]))

    @classmethod
    def identity(cls, n: int) -> "QuatMatrix":
        d = np.zeros((n, n, 4))
        d[np.arange(n), np.arange(n), 0] = 1.0
        return cls(d)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "QuatMatrix":
        return cls(np.zeros((rows, cols, 4)))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def __getitem__(self, ij) -> Quaternion:
        i, j = ij
        return Quaternion.from_array(self.data[i, j])

    def __add__(self, other: "QuatMatrix") -> "QuatMatrix":
        return QuatMatrix(self.data + other.data)

    def __sub__(self, other: "QuatMatrix") -> "QuatMatrix":
        return QuatMatrix(self.data - other.data)

    def scaled(self, k: float) -> "QuatMatrix":
        return QuatMatrix(self.data * float(k))

    def adjoint(self) -> "QuatMatrix":
        """Conjugate transpose."""
        return QuatMatrix(_conj(self.data.transpose(1, 0, 2)))

    def trace(self) -> Quaternion:
        if self.rows != self.cols:
            raise ValueError(f"trace requires a square matrix, got {self.rows}x{self.cols}")
        return Quaternion.from_array(
            self.data[np.arange(self.rows), np.arange(self.rows)].sum(axis=0))

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def matvec(self, x: QuatVector) -> QuatVector:
        if self.cols != len(x):
            raise ValueError(f"dimension mismatch: {self.rows}x{self.cols} @ vector of length {len(x)}")
        return QuatVector(_matmul(self.data, x.data))

    def matmul(self, other: "QuatMatrix") -> "QuatMatrix":
        if self.cols != other.rows:
            raise ValueError(f"dimension mismatch: {self.rows}x{self.cols} @ "
                             f"{other.rows}x{other.cols}")
        return QuatMatrix(_matmul(self.data, other.data))

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        """True if ``||M - M*||_F <= tol * max(1, ||M||_F)``."""
        if self.rows != self.cols:
            raise ValueError(f"hermiticity is defined for square matrices, got "
                             f"{self.rows}x{self.cols}")
        drift = float(np.linalg.norm(self.data - self.adjoint().data))
        return drift <= tol * max(1.0, self.frobenius_norm())

    def __repr__(self):
        return f"QuatMatrix({self.rows}x{self.cols})"


# ---------------------------------------------------------------------------
# complex adjoint

def complex_adjoint(m: QuatMatrix) -> np.ndarray:
    """The 2Nx2M complex adjoint of a quaternion matrix.

    Splitting ``M = M1 + j M2`` with ``M1, M2`` complex in the (1, i)
    sub-field gives the block matrix ``[[M1, -conj(M2)], [M2, conj(M1)]]``.
    ``||chi(M)||_F = sqrt(2) ||M||_F`` and ``||chi(M)||_2 = ||M||_2``; the map
    is additive, commutes with real scaling, and is multiplicative.
    """
    d = m.data
    m1 = d[..., 0] + 1j * d[..., 1]
    m2 = d[..., 2] - 1j * d[..., 3]
    return np.block([[m1, -m2.conj()], [m2, m1.conj()]])


def complex_embed(v: QuatVector) -> np.ndarray:
    """The 2N complex embedding of a quaternion vector.

    If ``V`` is a right-eigenvector of hermitian ``M`` for the real
    eigenvalue ``l``, then ``complex_embed(V)`` is an eigenvector of
    ``complex_adjoint(M)`` for the same ``l``.
    """
    d = v.data
    return np.concatenate([d[:, 0] + 1j * d[:, 1], d[:, 2] - 1j * d[:, 3]])


# ---------------------------------------------------------------------------
# dense complex hermitian eigensolver (the independent oracle)

def _round_robin_rounds(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule: every index pair (p < q) exactly once per sweep,
    grouped into rounds of mutually disjoint pairs."""
    m = n + (n % 2)  # pad with a dummy when odd
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        ps, qs = [], []
        for k in range(m // 2):
            i, j = players[k], players[m - 1 - k]
            if i < n and j < n:
                ps.append(min(i, j))
                qs.append(max(i, j))
        rounds.append((np.array(ps, dtype=int), np.array(qs, dtype=int)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(h: np.ndarray, *, sweep_tol: float = 1e-12,
                max_sweeps: int = 100,
                hermitian_tol: float = 1e-10,
                compute_vectors: bool = True) -> tuple[np.ndarray, np.ndarray | None]:
    """Full eigendecomposition of a complex hermitian matrix by cyclic Jacobi.

    Annihilates off-diagonal entries pairwise with complex Givens rotations,
    visiting every pair once per sweep until the off-diagonal Frobenius mass
    falls below ``sweep_tol`` relative to the matrix norm.  Pairs are swept
    in a round-robin order so that each round consists of disjoint pairs;
    rotations on disjoint pairs commute exactly, which lets a whole round be
    applied with a handful of vectorized updates.  Simple and
    dependency-free; accurate and fast enough for a few hundred rows, which
    is the scale this package targets.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted in
    descending order and eigenvectors as the matching orthonormal columns
    (``None`` when ``compute_vectors`` is off, which saves a chunk of work
    for spectrum-only callers).

    Raises ``ValueError`` for non-hermitian input and ``ConvergenceError``
    if the sweep cap is exhausted.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    n = h.shape[0]
    fro = float(np.linalg.norm(h))
    if float(np.linalg.norm(h - h.conj().T)) > hermitian_tol * max(1.0, fro):
        raise ValueError("matrix is not hermitian")

    a = 0.5 * (h + h.conj().T)  # exact-hermitian working copy
    v = np.eye(n, dtype=complex) if compute_vectors else None
    if n == 1:
        return a.real.diagonal().copy(), v

    scale = max(fro, np.finfo(float).tiny)
    skip_tol = sweep_tol * scale / (2.0 * n)
    rounds = _round_robin_rounds(n)

    def _off_norm() -> float:
        # off-diagonal Frobenius mass, summed directly (no cancellation)
        masked = a.copy()
        np.fill_diagonal(masked, 0.0)
        return float(np.linalg.norm(masked))

    converged = False
    for _ in range(max_sweeps):
        if _off_norm() <= sweep_tol * scale:
            converged = True
            break
        for p_all, q_all in rounds:
            b = a[p_all, q_all]
            ab = np.abs(b)
            active = ab > skip_tol
            if not active.any():
                continue
            p, q, b, ab = p_all[active], q_all[active], b[active], ab[active]
            theta = (a[q, q].real - a[p, p].real) / (2.0 * ab)
            safe = np.where(theta == 0.0, 1.0, theta)
            t = np.where(theta == 0.0, 1.0,
                         np.sign(safe) / (np.abs(safe) + np.hypot(safe, 1.0)))
            c = 1.0 / np.hypot(t, 1.0)
            s = (t * c) * (b / ab)
            # each pair applies J^H A J with J[p,p]=J[q,q]=c, J[p,q]=s,
            # J[q,p]=-conj(s); disjointness makes the batch exact
            ap, aq = a[p, :], a[q, :]
            a[p, :] = c[:, None] * ap - s[:, None] * aq
            a[q, :] = np.conj(s)[:, None] * ap + c[:, None] * aq
            cp, cq = a[:, p], a[:, q]
            a[:, p] = c[None, :] * cp - np.conj(s)[None, :] * cq
            a[:, q] = s[None, :] * cp + c[None, :] * cq
            a[p, q] = 0.0
            a[q, p] = 0.0
            a[p, p] = a[p, p].real
            a[q, q] = a[q, q].real
            if v is not None:
                vp, vq = v[:, p], v[:, q]
                v[:, p] = c[None, :] * vp - np.conj(s)[None, :] * vq
                v[:, q] = s[None, :] * vp + c[None, :] * vq
    if not converged and _off_norm() > sweep_tol * scale:
        raise ConvergenceError(
            f"Jacobi eigensolver did not converge in {max_sweeps} sweeps",
            residual=_off_norm())

    vals = a.diagonal().real.copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], (v[:, order] if v is not None else None)


def hermitian_spectrum(m: QuatMatrix, *, pair_tol: float = 1e-8) -> np.ndarray:
    """All N real eigenvalues of a hermitian quaternion matrix, descending.

    Goes through the complex adjoint, whose spectrum is the quaternion
    spectrum with every multiplicity doubled: the 2N oracle eigenvalues are
    checked to pair up within ``pair_tol`` (a pairing failure signals broken
    hermitian structure) and each pair is collapsed to its mean.
    """
    if not m.is_hermitian(tol=1e-9):
        raise ValueError("matrix is not hermitian")
    sym = (m + m.adjoint()).scaled(0.5)
    vals = jacobi_eigh(complex_adjoint(sym), compute_vectors=False)[0]
    even, odd = vals[0::2], vals[1::2]
    scale = max(1.0, float(np.max(np.abs(vals))) if vals.size else 0.0)
    worst = float(np.max(np.abs(even - odd))) if even.size else 0.0
    if worst > pair_tol * scale:
        raise SpectrumPairingError(
            f"complex-adjoint eigenvalues do not pair up (worst gap {worst:.3e})")
    return 0.5 * (even + odd)


def operator_norm(m: QuatMatrix) -> float:
    """Largest singular value of a quaternion matrix.

    Computed on the complex adjoint, which preserves the operator norm.  For
    a hermitian matrix this is the largest eigenvalue modulus.
    """
    h = complex_adjoint(m)
    g = h.conj().T @ h
    vals = jacobi_eigh(g, compute_vectors=False)[0]
    return math.sqrt(max(float(vals[0]), 0.0))


# ---------------------------------------------------------------------------
# power iteration

@dataclass(frozen=True)
class PowerIterationOptions:
    """Knobs for the dominant-eigenpair iteration.

    ``residual_tol`` bounds ``||A V - V l||_F`` at acceptance, which is the
    quantity the attitude solver ultimately consumes.  The default iteration
    cap covers eigenvalue-modulus gaps down to roughly half a percent.
    """

    max_iterations: int = 10_000
    residual_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not self.residual_tol > 0.0:
            raise ValueError("residual_tol must be positive")


@dataclass(frozen=True)
class EigenPair:
    """Dominant eigenpair estimate: ``A @ vector ~ vector * value``.

    ``vector`` has unit Frobenius norm and ``residual`` is the achieved
    ``||A vector - vector value||_F``.
    """

    value: float
    vector: QuatVector
    iterations: int
    residual: float


def power_iteration(a: QuatMatrix,
                    options: PowerIterationOptions | None = None) -> EigenPair:
    """Dominant eigenpair of a hermitian quaternion matrix by power iteration.

    Iterates ``V_k = X_k / ||X_k||``, ``X_{k+1} = A V_k`` from a seeded
    random start (the random start misses the dominant eigenspace with
    probability zero).  Hermitian quaternion matrices are diagonalizable
    with real eigenvalues, which commute with every quaternion, so the
    classical convergence argument carries over verbatim; convergence
    requires the largest eigenvalue modulus to be strictly separated.

    The eigenvalue is estimated by the Rayleigh-type value
    ``Re(V* A V)`` (exactly real for hermitian input, up to round-off),
    which keeps its sign even when the dominant eigenvalue is negative,
    unlike the norm ratio ``||X_{k+1}|| / ||X_k||``.

    Raises ``ConvergenceError`` carrying the last residual when the
    iteration cap is reached, which in practice signals a near-zero gap
    between the two largest eigenvalue moduli.
    """
    opts = options or PowerIterationOptions()
    if a.rows != a.cols:
        raise ValueError(f"expected a square matrix, got {a.rows}x{a.cols}")
    if not a.is_hermitian(tol=1e-9):
        raise ValueError("matrix is not hermitian")
    rng = np.random.default_rng(opts.seed)
    x = rng.uniform(-1.0, 1.0, size=(a.rows, 4))
    residual = math.inf
    for k in range(1, opts.max_iterations + 1):
        nx = float(np.linalg.norm(x))
        if nx < 1e-300:
            raise ConvergenceError("iterate collapsed to zero", residual=residual)
        v = x / nx
        y = _matmul(a.data, v)
        lam = float(np.dot(v.ravel(), y.ravel()))  # Re <v, A v>
        residual = float(np.linalg.norm(y - lam * v))
        if residual <= opts.residual_tol:
            return EigenPair(value=lam, vector=QuatVector(v),
                             iterations=k, residual=residual)
        x = y
    raise ConvergenceError(
        f"power iteration did not reach residual {opts.residual_tol:g} in "
        f"{opts.max_iterations} iterations (last residual {residual:.3e})",
        residual=residual)


def align_right_gauge(v: QuatVector, ref: QuatVector) -> QuatVector:
    """Right-multiply ``v`` by the unit quaternion bringing it closest to ``ref``.

    Minimizes ``||v t - ref||_F`` over unit quaternions ``t``; the optimum is
    ``t = conj(ref* . v) / |ref* . v|``.  This removes the right-gauge
    freedom of quaternion eigenvectors before comparing them.
    """
    c = ref.inner(v)
    nc = c.norm()
    if nc < 1e-15:
        raise ValueError("vectors are orthogonal; right-gauge alignment is undefined")
    return v.right_multiply(c.conjugate() * (1.0 / nc))


# ---------------------------------------------------------------------------
# JSON wire format

def matrix_to_json(m: QuatMatrix) -> dict:
    """Matrix as ``{"rows", "cols", "entries"}`` with row-major [w,x,y,z] entries."""
    return {
        "rows": m.rows,
        "cols": m.cols,
        "entries": [[float(c) for c in entry]
                    for entry in m.data.reshape(-1, 4)],
    }


def matrix_from_json(obj: dict) -> QuatMatrix:
    if not isinstance(obj, dict):
        raise ValueError("matrix JSON must be an object")
    try:
        rows, cols = int(obj["rows"]), int(obj["cols"])
        entries = obj["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"matrix JSON missing or malformed field: {exc}") from exc
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix dimensions must be positive, got {rows}x{cols}")
    data = np.asarray(entries, dtype=float)
    if data.shape != (rows * cols, 4):
        raise ValueError(
            f"matrix JSON expects {rows * cols} entries of 4 components, "
            f"got array of shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValueError("matrix JSON contains non-finite components")
    return QuatMatrix(data.reshape(rows, cols, 4))
