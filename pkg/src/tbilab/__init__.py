"""Temporal Bell inequalities versus measurement resolution for bistable systems."""

from .errors import (
    BasisTruncationError,
    ConfigError,
    DegenerateSpectrumError,
    DomainTruncationError,
    ImpossibleBranchError,
    NoDoubleWellError,
    NoViolationError,
    TbiError,
    TwoLevelRegimeError,
    UnsupportedInequalityError,
)
from .inequalities import (
    InequalityType,
    PseudoJoint,
    SignAssignment,
    ViolationCell,
    delta_p,
    pseudo_joint,
    violation_grid,
    violation_map,
)
from .overlap import OverlapCurve, admissible, criterion, overlap_curve, overlap_integral, xi_threshold
from .two_level import (
    CorrelationTable,
    Outcome,
    RabiParams,
    SpinDynamics,
    TwoLevelState,
    apply_projector,
    effective_uncertainty,
    evolve,
    pair_probability,
    sequential_joint_probability,
    spin_closed_form,
)

__version__ = "0.1.0"
