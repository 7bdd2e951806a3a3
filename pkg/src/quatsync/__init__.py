"""Attitude synchronization for sensor networks.

Recovers every sensor's absolute attitude (a unit quaternion) from the
complete matrix of pairwise relative attitudes plus at least one reference
sensor, via the dominant eigenpair of a hermitian quaternion matrix.
Includes the quaternion linear algebra this requires, an estimator that
builds the relative matrix from shared gravity/magnetic-field measurements,
perturbation-bound diagnostics, and a Monte-Carlo robustness harness.
"""

from .quat import Quaternion, UnitQuaternion, rotation_distance
from .qmat import (
    ConvergenceError,
    EigenPair,
    PowerIterationOptions,
    QuatMatrix,
    QuatVector,
    SpectrumPairingError,
    align_right_gauge,
    complex_adjoint,
    complex_embed,
    hermitian_spectrum,
    jacobi_eigh,
    operator_norm,
    power_iteration,
)
from .solver import (
    AttitudeVector,
    BoundsReport,
    DegenerateEigenvectorError,
    ReferenceSet,
    RelativeAttitudeMatrix,
    SolveReport,
    attitude_error,
    bounds_report,
    build_relative_matrix,
    compute_s,
    criterion_c1,
    criterion_c2,
    relative_error,
    solve,
)
from .relative import (
    AmbiguousSolutionError,
    FieldMeasurement,
    SampleSeries,
    UnobservableRotationError,
    average_static_samples,
    relative_matrix_from_measurements,
    relative_rotation,
    synthesize_measurements,
)
from .simulate import (
    NoiseModel,
    SweepConfig,
    SweepResult,
    linear_regression,
    monte_carlo_sweep,
    perturb_relative_matrix,
    polyhedron_fixture,
    random_attitude_vector,
    random_unit_quaternion,
)

__version__ = "0.1.0"
