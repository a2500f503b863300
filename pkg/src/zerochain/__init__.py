"""Worst-case smooth nonconvex instances and oracle-complexity experiments.

The package builds chain-structured hard functions whose derivatives
release one coordinate of information per query, the optimal first- and
second-order methods that match them, an oracle layer that logs queries
and checks the zero-respecting property, a resisting-oracle adversary,
and a verification harness with reproducible CSV artifacts.
"""

from .errors import (
    DegenerateBudgetError,
    DomainError,
    NumericalRankError,
    SolverError,
    UnsupportedOrderError,
    UsageError,
    VacuousBoundError,
    ZerochainError,
)
from .instances import (
    DistanceInstance,
    PlainInstance,
    RotatedInstance,
    ScalingParams,
    bump_grad,
    bump_value,
    fbar_grad,
    fbar_hess,
    fbar_support,
    fbar_value,
    instance_from_string,
    instance_to_string,
    large_gradient_witness,
    load_instance,
    save_instance,
    scaling_for,
    soft_project,
)
from .kernels import kernel_bound, phi, phi_deriv, psi, psi_deriv
from .optimizers import (
    CubicSubproblemResult,
    OptimizerConfig,
    cubic_subproblem,
    gd_step,
    run_optimizer,
)
from .oracles import (
    OracleReply,
    Trace,
    check_zero_respecting,
    derivative_support,
    parse_trace_csv,
    query,
    t_eps,
)
from .adversary import run_resisting, extend_orthonormal
from .randmat import SeededRng, sample_orthogonal, sphere_marginal_tail

__version__ = "0.1.0"
