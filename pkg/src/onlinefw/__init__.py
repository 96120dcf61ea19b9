"""Projection-free online optimization toolkit.

Online Frank-Wolfe style solvers (forward-only and away-step variants) over
l1 balls, vertex polytopes, and trace-norm balls, driven by constant-time
gradient aggregators for streaming regression, matrix completion, and
classification losses, plus workload generators and a benchmark harness that
checks the expected convergence rates empirically.
"""

from .core import (
    ActiveSet,
    Harmonic,
    Power,
    RankOne,
    SignedBasis,
    Vertex,
    active_set_point,
    apply_away_step,
    apply_fw_step,
    gamma_max,
    step_size,
    zeros,
)
from .exceptions import (
    NoDataError,
    ShapeMismatchError,
    StepBoundError,
    UnsupportedConstraintError,
)
from .gradients import (
    GAUSSIAN,
    LINKS,
    LOGISTIC,
    POISSON,
    LabeledVector,
    LassoSample,
    LassoStats,
    LogisticLoss,
    McSample,
    McStats,
    ReplayStats,
    SigmoidLoss,
    oracle_gradient,
)
from .lmo import (
    L1Ball,
    PowerIterConfig,
    TraceNormBall,
    VertexPolytope,
    lmo,
    lmo_l1,
    lmo_trace,
    lmo_vertices,
    top_singular_pair,
)
from .metrics import (
    SlopeFit,
    Trace,
    average_regret,
    duality_gap_aw,
    duality_gap_fw,
    geometric_checkpoints,
    grad_error,
    loglog_slope,
    min_gap_tail,
    primal_gap,
)
from .solvers import OawState, OfwState, StepRecord, oaw_init, oaw_step, ofw_init, ofw_step, run
from .workloads import (
    ReferenceSolution,
    Workload,
    gen_classification,
    gen_fixed_design_lasso,
    gen_mc,
    gen_random_design_lasso,
    reference_solve,
)

__version__ = "0.1.0"
