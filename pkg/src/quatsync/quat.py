"""Scalar quaternion arithmetic and the quaternion <-> rotation correspondence.

Conventions used throughout the package:

* scalar-first storage ``(w, x, y, z)``, meaning ``q = w + x*i + y*j + z*k``;
  the same order is used in every file format,
* ``q`` and ``-q`` represent the same rotation; the canonical sign has
  ``w > 0``, with ties at ``w == 0`` broken by requiring the first nonzero
  imaginary component to be positive,
* rotation matrices act on column vectors, ``v' = R @ v``.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Quaternion",
    "UnitQuaternion",
    "rotation_distance",
    "is_rotation_matrix",
]

#: Guaranteed bound on | |q| - 1 | after UnitQuaternion construction.
UNIT_TOL = 1e-12
#: Inputs within this distance of unit norm are renormalized silently;
#: anything farther off is rejected as a logic error rather than round-off.
RENORM_TOL = 1e-6


class Quaternion:
    """A quaternion ``w + x*i + y*j + z*k`` with real coefficients.

    Instances are immutable value objects; all operations return new
    quaternions, so they are safe to share between threads.
    """

    __slots__ = ("w", "x", "y", "z")

    def __init__(self, w: float, x: float = 0.0, y: float = 0.0, z: float = 0.0):
        w, x, y, z = float(w), float(x), float(y), float(z)
        if not (math.isfinite(w) and math.isfinite(x)
                and math.isfinite(y) and math.isfinite(z)):
            raise ValueError(f"quaternion components must be finite, got "
                             f"({w}, {x}, {y}, {z})")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    def __setattr__(self, name, value):
        raise AttributeError("Quaternion is immutable")

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        a = np.asarray(a, dtype=float)
        if a.shape != (4,):
            raise ValueError(f"expected 4 components (w, x, y, z), got shape {a.shape}")
        return cls(a[0], a[1], a[2], a[3])

    def to_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    # -- algebra ------------------------------------------------------------

    def conjugate(self) -> "Quaternion":
        return type(self)(self.w, -self.x, -self.y, -self.z)

    def norm(self) -> float:
        return math.sqrt(self.w * self.w + self.x * self.x
                         + self.y * self.y + self.z * self.z)

    def norm_squared(self) -> float:
        return (self.w * self.w + self.x * self.x
                + self.y * self.y + self.z * self.z)

    def normalized(self) -> "UnitQuaternion":
        n = self.norm()
        if n < 1e-12:
            raise ValueError("cannot normalize a near-zero quaternion")
        return UnitQuaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            a1, b1, c1, d1 = self.w, self.x, self.y, self.z
            a2, b2, c2, d2 = other.w, other.x, other.y, other.z
            w = a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2
            x = a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2
            y = a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2
            z = a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2
            if isinstance(self, UnitQuaternion) and isinstance(other, UnitQuaternion):
                return UnitQuaternion(w, x, y, z)
            return Quaternion(w, x, y, z)
        if isinstance(other, (int, float)):
            k = float(other)
            return Quaternion(self.w * k, self.x * k, self.y * k, self.z * k)
        return NotImplemented

    def __rmul__(self, other):
        # reals commute with every quaternion
        if isinstance(other, (int, float)):
            return self * other
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, Quaternion):
            return Quaternion(self.w + other.w, self.x + other.x,
                              self.y + other.y, self.z + other.z)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Quaternion):
            return Quaternion(self.w - other.w, self.x - other.x,
                              self.y - other.y, self.z - other.z)
        return NotImplemented

    def __neg__(self):
        return type(self)(-self.w, -self.x, -self.y, -self.z)

    def __repr__(self):
        return (f"{type(self).__name__}({self.w!r}, {self.x!r}, "
                f"{self.y!r}, {self.z!r})")


class UnitQuaternion(Quaternion):
    """A quaternion of norm 1; the representation of a rotation/attitude.

    Construction renormalizes inputs whose norm is within ``RENORM_TOL`` of 1
    (absorbing accumulated round-off) and rejects anything farther off, so
    that silently normalizing a genuinely non-unit value cannot mask a logic
    error.  After construction ``| |q| - 1 | <= UNIT_TOL`` holds.
    """

    __slots__ = ()

    def __init__(self, w: float, x: float = 0.0, y: float = 0.0, z: float = 0.0):
        super().__init__(w, x, y, z)
        n = math.sqrt(self.w * self.w + self.x * self.x
                      + self.y * self.y + self.z * self.z)
        if abs(n - 1.0) > RENORM_TOL:
            raise ValueError(f"not a unit quaternion: |q| = {n!r}")
        if n != 1.0:
            object.__setattr__(self, "w", self.w / n)
            object.__setattr__(self, "x", self.x / n)
            object.__setattr__(self, "y", self.y / n)
            object.__setattr__(self, "z", self.z / n)

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "UnitQuaternion":
        """Rotation by ``angle`` radians about the unit 3-vector ``axis``.

        Returns ``cos(angle/2) + sin(angle/2) * (axis as pure quaternion)``,
        sign-canonicalized.  The axis must already have unit length (within
        1e-9): normalizing silently would hide upstream scaling bugs.
        """
        axis = np.asarray(axis, dtype=float)
        if axis.shape != (3,):
            raise ValueError(f"axis must be a 3-vector, got shape {axis.shape}")
        n = float(np.linalg.norm(axis))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"axis must have unit length, got |axis| = {n!r}")
        half = 0.5 * float(angle)
        s = math.sin(half)
        return cls(math.cos(half), s * axis[0], s * axis[1], s * axis[2]).canonical()

    def inverse(self) -> "UnitQuaternion":
        # for unit quaternions the inverse is the conjugate
        return self.conjugate()

    def canonical(self) -> "UnitQuaternion":
        """The canonical-sign representative among ``q`` and ``-q``.

        Keeps ``w > 0``; for ``w == 0`` exactly, keeps the first nonzero of
        ``(x, y, z)`` positive.  The associated rotation is unchanged.
        """
        for c in (self.w, self.x, self.y, self.z):
            if c > 0.0:
                return self
            if c < 0.0:
                return -self
        return self  # all-zero cannot happen for a unit quaternion

    def axis_angle(self) -> tuple[np.ndarray, float]:
        """Rotation axis (unit 3-vector) and angle in radians.

        The identity rotation has an undefined axis; ``(0, 0, 1)`` is
        returned by convention.
        """
        v = np.array([self.x, self.y, self.z])
        s = float(np.linalg.norm(v))
        angle = 2.0 * math.atan2(s, self.w)
        if s < 1e-15:
            return np.array([0.0, 0.0, 1.0]), angle
        return v / s, angle

    def rotation_matrix(self) -> np.ndarray:
        """The 3x3 rotation matrix acting as ``v' = R @ v``.

        Satisfies ``R(p*q) = R(p) @ R(q)`` and ``R(conj(q)) = R(q).T``;
        ``q`` and ``-q`` give the same matrix.
        """
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array([
            [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
        ])

    def rotate(self, v) -> np.ndarray:
        """Apply the rotation to a 3-vector (same result as rotation_matrix() @ v)."""
        v = np.asarray(v, dtype=float)
        u = np.array([self.x, self.y, self.z])
        t = 2.0 * np.cross(u, v)
        return v + self.w * t + np.cross(u, t)


def rotation_distance(p: UnitQuaternion, q: UnitQuaternion) -> float:
    """Spectral-norm distance ``||R(p) - R(q)||_2`` between two rotations.

    Computed in closed form as ``d * sqrt(4 - d**2)`` with ``d = |p - q|``,
    which vanishes both at ``q = p`` and at ``q = -p`` (the double cover).
    """
    d2 = (p - q).norm_squared()
    return math.sqrt(d2 * max(4.0 - d2, 0.0))


def is_rotation_matrix(r: np.ndarray, tol: float = 1e-10) -> bool:
    """True if ``r`` is orthogonal with determinant +1 within ``tol``."""
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        return False
    return (np.abs(r.T @ r - np.eye(3)).max() <= tol
            and abs(np.linalg.det(r) - 1.0) <= tol)
