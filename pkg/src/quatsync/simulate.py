"""Synthetic problems, noise injection and Monte-Carlo robustness sweeps.

The sweep machinery reproduces the error study behind the solver's
robustness claims: draw a random attitude vector, build its exact relative
matrix, perturb every pairwise entry by a random small rotation, solve with
exact references, and record input error, output error, criterion values
and the perturbation-bound flags, then regress output error on input error.

Noise is parameterized by the perturbation angle spread ``sigma`` rather
than by a target input error: the input error ``e(O)`` is a derived
quantity (roughly ``sigma / 2`` for small angles) and is measured per trial.
References are exact in sweeps; reference noise is out of scope.

Everything is deterministic given the configured seed: per-trial generators
are spawned from one master seed stream, so results do not depend on
execution order.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .quat import UnitQuaternion
from .qmat import ConvergenceError, PowerIterationOptions, QuatMatrix, _hamilton, power_iteration
from .solver import (
    AttitudeVector,
    DegenerateEigenvectorError,
    ReferenceSet,
    RelativeAttitudeMatrix,
    attitude_error,
    bounds_report,
    build_relative_matrix,
    relative_error,
    solve,
)

__all__ = [
    "NoiseModel",
    "SweepConfig",
    "SweepRow",
    "SweepResult",
    "RegressionResult",
    "random_unit_quaternion",
    "random_attitude_vector",
    "perturb_relative_matrix",
    "monte_carlo_sweep",
    "linear_regression",
    "polyhedron_fixture",
    "default_sweep_config",
    "sweep_config_from_json",
    "sweep_config_to_json",
    "write_sweep_csv",
    "write_regression_json",
]


@dataclass(frozen=True)
class NoiseModel:
    """Per-entry rotational noise: angle ``|Normal(0, sigma)|`` about a
    uniformly random axis, applied on the right of each upper-triangle entry."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ValueError("sigma must be non-negative")


@dataclass(frozen=True)
class SweepConfig:
    n_sensors: int
    ref_indices: tuple[int, ...]
    sigma_grid: tuple[float, ...]
    trials_per_sigma: int
    seed: int = 0

    def __post_init__(self):
        if self.n_sensors < 2:
            raise ValueError("n_sensors must be at least 2")
        refs = tuple(int(i) for i in self.ref_indices)
        if len(refs) == 0:
            raise ValueError("ref_indices must be non-empty")
        if len(set(refs)) != len(refs):
            raise ValueError("ref_indices must be distinct")
        if any(i < 0 or i >= self.n_sensors for i in refs):
            raise ValueError(f"ref_indices out of range for {self.n_sensors} sensors")
        grid = tuple(float(s) for s in self.sigma_grid)
        if len(grid) == 0:
            raise ValueError("sigma_grid must be non-empty")
        if any(s < 0.0 for s in grid):
            raise ValueError("sigma_grid values must be non-negative")
        if any(a > b for a, b in zip(grid, grid[1:])):
            raise ValueError("sigma_grid must be ascending")
        if self.trials_per_sigma < 1:
            raise ValueError("trials_per_sigma must be at least 1")
        object.__setattr__(self, "ref_indices", tuple(sorted(refs)))
        object.__setattr__(self, "sigma_grid", grid)


class RegressionResult(NamedTuple):
    slope: float
    intercept: float
    r2: float


@dataclass(frozen=True)
class SweepRow:
    """One trial.  Fractions throughout; percent scaling happens only when
    writing the CSV.  Failed trials keep their measured input error and NaN
    solver outputs."""

    sigma: float
    e_O: float
    e_Q: float
    c1_over_n2: float
    lambda1_over_n: float
    weyl_ok: bool | None
    dk_ok: bool | None
    failed: bool = False


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    regression: RegressionResult | None
    failures: int


def random_unit_quaternion(rng: np.random.Generator) -> UnitQuaternion:
    """Uniform draw on the unit 3-sphere (normalized 4-normal), canonical sign."""
    while True:
        a = rng.normal(size=4)
        n = float(np.linalg.norm(a))
        if n > 1e-8:
            return UnitQuaternion(a[0] / n, a[1] / n, a[2] / n, a[3] / n).canonical()


def random_attitude_vector(n: int, rng: np.random.Generator) -> AttitudeVector:
    """``n`` independent uniform random attitudes."""
    if n < 1:
        raise ValueError("n must be at least 1")
    a = rng.normal(size=(n, 4))
    norms = np.linalg.norm(a, axis=1)
    while np.any(norms <= 1e-8):  # astronomically unlikely; redraw to stay total
        bad = norms <= 1e-8
        a[bad] = rng.normal(size=(int(bad.sum()), 4))
        norms = np.linalg.norm(a, axis=1)
    return AttitudeVector(a / norms[:, None])


def perturb_relative_matrix(o: RelativeAttitudeMatrix,
                            noise: NoiseModel) -> RelativeAttitudeMatrix:
    """Right-multiply each upper-triangle entry by a small random rotation.

    Every perturbed entry stays a unit quaternion, the mirrored entry is its
    conjugate and the diagonal stays 1, so all matrix invariants survive by
    construction.  ``sigma = 0`` returns a bitwise copy of the input.
    """
    n = o.n
    d = o.matrix.data.copy()
    if noise.sigma == 0.0:
        return RelativeAttitudeMatrix(QuatMatrix(d))
    rng = np.random.default_rng(noise.seed)
    iu, ju = np.triu_indices(n, k=1)
    m = iu.size
    if m > 0:
        axes = rng.normal(size=(m, 3))
        norms = np.linalg.norm(axes, axis=1)
        while np.any(norms <= 1e-8):
            bad = norms <= 1e-8
            axes[bad] = rng.normal(size=(int(bad.sum()), 3))
            norms = np.linalg.norm(axes, axis=1)
        axes /= norms[:, None]
        angles = np.abs(rng.normal(0.0, noise.sigma, size=m))
        half = 0.5 * angles
        deltas = np.concatenate([np.cos(half)[:, None],
                                 np.sin(half)[:, None] * axes], axis=1)
        upper = _hamilton(d[iu, ju], deltas)
        d[iu, ju] = upper
        d[ju, iu] = upper * np.array([1.0, -1.0, -1.0, -1.0])
    return RelativeAttitudeMatrix(QuatMatrix(d))


def linear_regression(xs, ys) -> RegressionResult:
    """Ordinary least squares line of ``ys`` on ``xs``.

    ``r2`` is defined as 1 for a constant ``ys`` (the fit is exact).
    Degenerate ``xs`` (fewer than two points, or all equal) raise.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError(f"xs and ys must be 1-d arrays of equal length, got "
                         f"{xs.shape} and {ys.shape}")
    if xs.size < 2:
        raise ValueError("need at least two points")
    x_mean = float(xs.mean())
    var = float(np.sum((xs - x_mean) ** 2))
    if var == 0.0:
        raise ValueError("xs are all equal; the slope is undefined")
    y_mean = float(ys.mean())
    slope = float(np.sum((xs - x_mean) * (ys - y_mean))) / var
    intercept = y_mean - slope * x_mean
    ss_res = float(np.sum((ys - (slope * xs + intercept)) ** 2))
    ss_tot = float(np.sum((ys - y_mean) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RegressionResult(slope=slope, intercept=intercept, r2=r2)


def monte_carlo_sweep(config: SweepConfig) -> SweepResult:
    """Run the full noise sweep and regress output error on input error.

    Per trial: draw attitudes, build the exact relative matrix, perturb it,
    solve with exact references, and record the row.  Solver failures
    (convergence or degeneracy) are kept as rows with NaN outputs, counted,
    and excluded from the regression.  The regression is omitted when fewer
    than two usable rows remain or all input errors coincide (e.g. an
    all-zero sigma grid).

    Rows are a pure function of the config: per-trial seeds are spawned
    deterministically from ``config.seed``, so any execution order (or a
    parallel map) yields identical rows.
    """
    n = config.n_sensors
    master = np.random.SeedSequence(config.seed)
    children = master.spawn(len(config.sigma_grid) * config.trials_per_sigma)

    rows: list[SweepRow] = []
    failures = 0
    for si, sigma in enumerate(config.sigma_grid):
        for trial in range(config.trials_per_sigma):
            child = children[si * config.trials_per_sigma + trial]
            ss_att, ss_noise, ss_pi = child.spawn(3)
            rng = np.random.default_rng(ss_att)
            q = random_attitude_vector(n, rng)
            o = build_relative_matrix(q)
            o_hat = perturb_relative_matrix(
                o, NoiseModel(sigma=sigma,
                              seed=int(ss_noise.generate_state(1, np.uint64)[0])))
            e_o = relative_error(o_hat, o)
            refs = ReferenceSet(config.ref_indices,
                                tuple(q[i] for i in config.ref_indices))
            opts = PowerIterationOptions(
                seed=int(ss_pi.generate_state(1, np.uint64)[0]))
            try:
                report = solve(o_hat, refs, opts)
                # same options => bitwise the same eigenvector as inside solve
                pair = power_iteration(o_hat.matrix, opts)
                br = bounds_report(o_hat, o,
                                   r_hat=pair.vector.scaled(math.sqrt(n)),
                                   r=q.as_quat_vector())
                rows.append(SweepRow(
                    sigma=sigma,
                    e_O=e_o,
                    e_Q=attitude_error(report.attitudes, q),
                    c1_over_n2=report.c1_value / (n * n),
                    lambda1_over_n=report.lambda1 / n,
                    weyl_ok=br.weyl_ok,
                    dk_ok=br.dk_ok,
                ))
            except (ConvergenceError, DegenerateEigenvectorError):
                failures += 1
                rows.append(SweepRow(
                    sigma=sigma, e_O=e_o, e_Q=math.nan, c1_over_n2=math.nan,
                    lambda1_over_n=math.nan, weyl_ok=None, dk_ok=None,
                    failed=True))

    usable = [r for r in rows if not r.failed]
    regression = None
    if len(usable) >= 2:
        xs = np.array([r.e_O for r in usable])
        ys = np.array([r.e_Q for r in usable])
        if not np.all(xs == xs[0]):
            regression = linear_regression(xs, ys)
    return SweepResult(rows=tuple(rows), regression=regression, failures=failures)


def polyhedron_fixture() -> tuple[AttitudeVector, np.ndarray, np.ndarray]:
    """A fixed 9-sensor rig with known attitudes and world field vectors.

    Mimics sensors mounted on the faces of a polyhedron: one top face, four
    side faces (quarter turns about the horizontal axes) and four faces
    tilted 45 degrees and spun by quarter turns.  Sensor 0 is the identity,
    which is also the default reference of the estimation pipeline.  The
    world vectors are a downward gravity and a magnetic field with a
    realistic dip, far from parallel.
    """
    x = np.array([1.0, 0.0, 0.0])
    y = np.array([0.0, 1.0, 0.0])
    z = np.array([0.0, 0.0, 1.0])
    half_pi = math.pi / 2.0
    tilt = UnitQuaternion.from_axis_angle(x, math.pi / 4.0)
    attitudes = [
        UnitQuaternion.identity(),
        UnitQuaternion.from_axis_angle(x, half_pi),
        UnitQuaternion.from_axis_angle(y, half_pi),
        UnitQuaternion.from_axis_angle(x, -half_pi),
        UnitQuaternion.from_axis_angle(y, -half_pi),
        tilt,
        UnitQuaternion.from_axis_angle(z, half_pi) * tilt,
        UnitQuaternion.from_axis_angle(z, math.pi) * tilt,
        UnitQuaternion.from_axis_angle(z, -half_pi) * tilt,
    ]
    g0 = np.array([0.0, 0.0, -9.81])       # gravity, m/s^2
    h0 = np.array([20.0, 0.0, -44.0])      # magnetic field with dip, uT
    return AttitudeVector.from_quaternions(attitudes), g0, h0


# ---------------------------------------------------------------------------
# config and output files

def default_sweep_config(seed: int = 0) -> SweepConfig:
    """The stock robustness study: 20 sensors, one reference, input errors
    spanning roughly (0, 10%] (e(O) ~ sigma/2), 50 trials per noise level."""
    return SweepConfig(
        n_sensors=20,
        ref_indices=(0,),
        sigma_grid=tuple(round(0.02 * k, 10) for k in range(1, 11)),
        trials_per_sigma=50,
        seed=seed,
    )


def sweep_config_to_json(config: SweepConfig) -> dict:
    return {
        "n_sensors": config.n_sensors,
        "ref_indices": list(config.ref_indices),
        "sigma_grid": list(config.sigma_grid),
        "trials_per_sigma": config.trials_per_sigma,
        "seed": config.seed,
    }


def sweep_config_from_json(obj: dict) -> SweepConfig:
    if not isinstance(obj, dict):
        raise ValueError("sweep config JSON must be an object")
    for field in ("n_sensors", "ref_indices", "sigma_grid", "trials_per_sigma"):
        if field not in obj:
            raise ValueError(f"sweep config is missing the '{field}' field")
    return SweepConfig(
        n_sensors=int(obj["n_sensors"]),
        ref_indices=tuple(int(i) for i in obj["ref_indices"]),
        sigma_grid=tuple(float(s) for s in obj["sigma_grid"]),
        trials_per_sigma=int(obj["trials_per_sigma"]),
        seed=int(obj.get("seed", 0)),
    )


_SWEEP_HEADER = ["sigma", "e_O_pct", "e_Q_pct", "c1_pct",
                 "lambda1_over_N", "weyl_ok", "dk_ok"]


def _flag(value: bool | None) -> str:
    return "" if value is None else ("true" if value else "false")


def write_sweep_csv(path, result: SweepResult) -> None:
    """Plot-ready rows; errors and the criterion are scaled to percent here."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_SWEEP_HEADER)
        for r in result.rows:
            writer.writerow([
                repr(float(r.sigma)),
                repr(100.0 * r.e_O),
                repr(100.0 * r.e_Q),
                repr(100.0 * r.c1_over_n2),
                repr(float(r.lambda1_over_n)),
                _flag(r.weyl_ok),
                _flag(r.dk_ok),
            ])


def write_regression_json(path, result: SweepResult) -> None:
    usable = sum(1 for r in result.rows if not r.failed)
    if result.regression is not None:
        payload = {
            "slope": result.regression.slope,
            "intercept": result.regression.intercept,
            "r2": result.regression.r2,
            "rows_used": usable,
            "failures": result.failures,
            "note": None,
        }
    else:
        payload = {
            "slope": None,
            "intercept": None,
            "r2": None,
            "rows_used": usable,
            "failures": result.failures,
            "note": "regression undefined: fewer than two usable rows or "
                    "constant input error",
        }
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
