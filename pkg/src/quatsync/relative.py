"""Pairwise relative attitudes from shared gravity/magnetic-field vectors.

Each static sensor measures the same two world-frame vectors, the gravity
direction ``g`` and the terrestrial magnetic field ``h``, expressed in its
own axis system.  Two such measurements determine the rotation between the
sensor frames whenever ``g`` and ``h`` are not parallel.

Frame bookkeeping (fixed once, verified by the round-trip tests): the
attitude ``q_i`` maps world coordinates into sensor-i coordinates,
``[u]_i = R(q_i) @ [u]_world``.  The frame-i -> frame-j coordinate change is
then ``R(q_j * conj(q_i))``, so the estimator below returns
``m_ij = q_j * conj(q_i)`` and the relative attitude matrix entry is its
conjugate, ``O_ij = q_i * conj(q_j) = conj(m_ij)``.

The estimator itself: a rotation constraint ``R(q) u = v`` is equivalent to
the quaternion equation ``q u~ - v~ q = 0`` with ``u~``, ``v~`` the pure
quaternions of ``u``, ``v``.  Written as 4x4 real matrices acting on
``(w, x, y, z)``, the gravity and field constraints stack into an 8x4
system whose best unit solution is the right singular vector for the
smallest singular value.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .quat import UnitQuaternion
from .qmat import QuatMatrix, _hamilton, jacobi_eigh
from .solver import AttitudeVector, RelativeAttitudeMatrix

__all__ = [
    "FieldMeasurement",
    "SampleSeries",
    "UnobservableRotationError",
    "AmbiguousSolutionError",
    "average_static_samples",
    "relative_rotation",
    "relative_matrix_from_measurements",
    "resign_truth_to_estimate",
    "synthesize_measurements",
    "read_measurements_csv",
    "write_measurements_csv",
]

#: Gravity/field directions closer than this angle (radians) leave a
#: rotation degree of freedom unobservable.
PARALLEL_TOL = 1e-6


class UnobservableRotationError(Exception):
    """The two observed vectors are (anti-)parallel.

    Rotations about the common direction are unobservable, so no unique
    relative attitude exists.
    """


class AmbiguousSolutionError(Exception):
    """The stacked constraint system has a (near-)degenerate null space."""


@dataclass(frozen=True)
class FieldMeasurement:
    """Averaged gravity and magnetic-field vectors seen by one sensor.

    Components are in the sensor's own axis system; units only need to be
    consistent across sensors (each vector is normalized internally).
    """

    sensor: int
    g: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        h = np.asarray(self.h, dtype=float)
        if g.shape != (3,) or h.shape != (3,):
            raise ValueError(f"g and h must be 3-vectors, got {g.shape} and {h.shape}")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
            raise ValueError("field components must be finite")
        if np.linalg.norm(g) == 0.0 or np.linalg.norm(h) == 0.0:
            raise ValueError(f"sensor {self.sensor}: zero field vector")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", h)


@dataclass(frozen=True)
class SampleSeries:
    """Time-ordered raw samples from one static sensor."""

    sensor: int
    g: np.ndarray  # (n_samples, 3)
    h: np.ndarray  # (n_samples, 3)
    rate: float = 200.0

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        h = np.asarray(self.h, dtype=float)
        if g.ndim != 2 or g.shape[1] != 3 or g.shape[0] < 1:
            raise ValueError(f"expected (n, 3) samples with n >= 1, got {g.shape}")
        if h.shape != g.shape:
            raise ValueError(f"g and h sample counts differ: {g.shape} vs {h.shape}")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", h)


def average_static_samples(series: SampleSeries) -> FieldMeasurement:
    """Collapse a static series to its componentwise mean measurement."""
    return FieldMeasurement(sensor=series.sensor,
                            g=series.g.mean(axis=0),
                            h=series.h.mean(axis=0))


def _left_matrix(u: np.ndarray) -> np.ndarray:
    """4x4 real matrix of left multiplication by the pure quaternion of u."""
    ux, uy, uz = u
    return np.array([
        [0.0, -ux, -uy, -uz],
        [ux, 0.0, -uz, uy],
        [uy, uz, 0.0, -ux],
        [uz, -uy, ux, 0.0],
    ])


def _right_matrix(u: np.ndarray) -> np.ndarray:
    """4x4 real matrix of right multiplication by the pure quaternion of u."""
    ux, uy, uz = u
    return np.array([
        [0.0, -ux, -uy, -uz],
        [ux, 0.0, uz, -uy],
        [uy, -uz, 0.0, ux],
        [uz, uy, -ux, 0.0],
    ])


def _angle(u: np.ndarray, v: np.ndarray) -> float:
    c = float(np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v)))
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def relative_rotation(m_i: FieldMeasurement, m_j: FieldMeasurement) -> UnitQuaternion:
    """The rotation mapping frame-i coordinates onto frame-j coordinates.

    Returns the unit quaternion ``q`` minimizing the residuals of
    ``R(q) g_i ~ g_j`` and ``R(q) h_i ~ h_j``.  Both vectors are normalized
    before entering the system so the two fields carry equal weight
    regardless of their physical units.

    Raises ``UnobservableRotationError`` when ``g`` and ``h`` are parallel
    (the rotation about their common axis is free) and
    ``AmbiguousSolutionError`` when the two smallest singular values of the
    stacked system coincide, which means the data does not single out one
    rotation.
    """
    gi = m_i.g / np.linalg.norm(m_i.g)
    hi = m_i.h / np.linalg.norm(m_i.h)
    gj = m_j.g / np.linalg.norm(m_j.g)
    hj = m_j.h / np.linalg.norm(m_j.h)
    for g, h, sensor in ((gi, hi, m_i.sensor), (gj, hj, m_j.sensor)):
        angle = _angle(g, h)
        if min(angle, np.pi - angle) < PARALLEL_TOL:
            raise UnobservableRotationError(
                f"sensor {sensor}: gravity and magnetic field are parallel "
                f"(angle {angle:.2e} rad); the rotation about them is unobservable")

    # each R(q) u = v constraint reads (Right(u~) - Left(v~)) q = 0
    a = np.vstack([
        _right_matrix(gi) - _left_matrix(gj),
        _right_matrix(hi) - _left_matrix(hj),
    ])
    # singular vectors of A via the 4x4 normal matrix, using the in-repo
    # hermitian eigensolver (exact enough at this size)
    gram = a.T @ a
    vals, vecs = jacobi_eigh(gram.astype(complex))
    sing = np.sqrt(np.clip(vals, 0.0, None))  # descending
    if sing[2] - sing[3] < 1e-9:
        raise AmbiguousSolutionError(
            f"pair ({m_i.sensor}, {m_j.sensor}): two smallest singular values "
            f"coincide ({sing[3]:.3e}, {sing[2]:.3e}); the relative rotation "
            "is not unique")
    q = vecs[:, 3].real
    q /= np.linalg.norm(q)
    return UnitQuaternion(q[0], q[1], q[2], q[3]).canonical()


_CONJ_SIGNS = np.array([1.0, -1.0, -1.0, -1.0])


def relative_matrix_from_measurements(
        measurements: list[FieldMeasurement]) -> RelativeAttitudeMatrix:
    """Assemble the full relative attitude matrix from per-sensor fields.

    Estimates each unordered pair once; ``O_ij = conj(m_ij)`` under the
    frame convention at the top of this module, and ``O_ji = conj(O_ij)``
    keeps the matrix hermitian by construction.  The offending pair is named
    if any estimate fails.

    Quaternion signs need care: a measured rotation determines its
    quaternion only up to sign, and an inconsistent sign pattern would
    destroy the near-rank-1 structure the solver relies on.  Row 0 anchors a
    consistent factorization (``P_0 = 1``, ``P_j = conj(O_0j)`` reproduces
    ``O_ij = P_i conj(P_j)`` exactly in the noiseless case) and every other
    entry picks the sign closer to its anchored prediction, a robust
    discrete choice as long as the noise stays far from 180 degrees.
    """
    n = len(measurements)
    if n < 1:
        raise ValueError("need at least one measurement")
    sensors = [m.sensor for m in measurements]
    if sorted(sensors) != list(range(n)):
        raise ValueError(f"expected one measurement per sensor 0..{n - 1}, "
                         f"got sensors {sorted(sensors)}")
    by_sensor = {m.sensor: m for m in measurements}

    def pair_estimate(i: int, j: int) -> np.ndarray:
        try:
            m_ij = relative_rotation(by_sensor[i], by_sensor[j])
        except (UnobservableRotationError, AmbiguousSolutionError) as exc:
            raise type(exc)(f"pair ({i}, {j}): {exc}") from exc
        return m_ij.conjugate().to_array()

    data = np.zeros((n, n, 4))
    data[np.arange(n), np.arange(n), 0] = 1.0
    anchors = np.zeros((n, 4))
    anchors[0, 0] = 1.0
    for j in range(1, n):
        o_0j = pair_estimate(0, j)
        data[0, j] = o_0j
        data[j, 0] = o_0j * _CONJ_SIGNS
        anchors[j] = o_0j * _CONJ_SIGNS
    for i in range(1, n):
        for j in range(i + 1, n):
            o_ij = pair_estimate(i, j)
            predicted = _hamilton(anchors[i], anchors[j] * _CONJ_SIGNS)
            if float(np.dot(o_ij, predicted)) < 0.0:
                o_ij = -o_ij
            data[i, j] = o_ij
            data[j, i] = o_ij * _CONJ_SIGNS
    return RelativeAttitudeMatrix(QuatMatrix(data))


def resign_truth_to_estimate(
        o_true: RelativeAttitudeMatrix,
        o_hat: RelativeAttitudeMatrix) -> tuple[RelativeAttitudeMatrix, np.ndarray]:
    """Carry an algebraic ground truth into an estimate's entry-sign gauge.

    Field measurements determine each relative attitude only as a rotation,
    so an estimated matrix agrees with the truth ``Q Q*`` only up to a
    factorizable entry-sign pattern ``eps_i eps_j`` (row-0 anchoring picks
    one).  Comparing the two literally would count those benign sign flips
    as full-size errors; this helper reads the signs off row 0 and returns
    ``(eps_i q_i)(eps_j q_j)*`` together with the sign vector, after which
    Frobenius comparisons measure actual estimation error.
    """
    if o_true.n != o_hat.n:
        raise ValueError(f"size mismatch: {o_true.n} vs {o_hat.n}")
    n = o_true.n
    eps = np.ones(n)
    dots = np.sum(o_hat.matrix.data[0, 1:] * o_true.matrix.data[0, 1:], axis=1)
    eps[1:] = np.where(dots < 0.0, -1.0, 1.0)
    d = o_true.matrix.data * (eps[:, None] * eps[None, :])[:, :, None]
    return RelativeAttitudeMatrix(QuatMatrix(d)), eps


def synthesize_measurements(attitudes: AttitudeVector, g0, h0) -> list[FieldMeasurement]:
    """Forward model: per-sensor fields for known attitudes and world vectors.

    Applies ``[u]_i = R(q_i) @ u_world`` to both ``g0`` and ``h0``; the
    inverse of what the estimation pipeline computes, used to generate test
    and demo data.
    """
    g0 = np.asarray(g0, dtype=float)
    h0 = np.asarray(h0, dtype=float)
    return [
        FieldMeasurement(sensor=i, g=attitudes[i].rotate(g0), h=attitudes[i].rotate(h0))
        for i in range(len(attitudes))
    ]


# ---------------------------------------------------------------------------
# CSV wire format

_AVG_HEADER = ["sensor", "gx", "gy", "gz", "hx", "hy", "hz"]
_RAW_HEADER = ["sensor", "t", "gx", "gy", "gz", "hx", "hy", "hz"]


def write_measurements_csv(path, measurements: list[FieldMeasurement]) -> None:
    """One row per sensor with averaged field components."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_AVG_HEADER)
        for m in sorted(measurements, key=lambda m: m.sensor):
            writer.writerow([m.sensor] + [repr(float(c)) for c in m.g]
                            + [repr(float(c)) for c in m.h])


def read_measurements_csv(path) -> list[FieldMeasurement]:
    """Read averaged or raw measurement rows into per-sensor measurements.

    Accepts either the averaged layout (one row per sensor) or the raw
    layout with a time column (many rows per sensor, averaged here).  Raises
    ``ValueError`` with row context for malformed input.
    """
    path = Path(path)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = [c.strip() for c in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if header == _AVG_HEADER:
            has_time = False
        elif header == _RAW_HEADER:
            has_time = True
        else:
            raise ValueError(
                f"{path}: unrecognized header {header}; expected "
                f"{','.join(_AVG_HEADER)} or {','.join(_RAW_HEADER)}")
        g_rows: dict[int, list[np.ndarray]] = {}
        h_rows: dict[int, list[np.ndarray]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            expected = len(_RAW_HEADER) if has_time else len(_AVG_HEADER)
            if len(row) != expected:
                raise ValueError(f"{path}:{lineno}: expected {expected} fields, "
                                 f"got {len(row)}")
            try:
                sensor = int(row[0])
                values = [float(c) for c in row[(2 if has_time else 1):]]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            g_rows.setdefault(sensor, []).append(np.array(values[:3]))
            h_rows.setdefault(sensor, []).append(np.array(values[3:]))
    if not g_rows:
        raise ValueError(f"{path}: no data rows")
    sensors = sorted(g_rows)
    missing = [i for i in range(max(sensors) + 1) if i not in g_rows]
    if missing:
        raise ValueError(f"{path}: missing sensor rows for indices {missing}")
    return [
        average_static_samples(SampleSeries(
            sensor=i, g=np.array(g_rows[i]), h=np.array(h_rows[i])))
        for i in sensors
    ]
