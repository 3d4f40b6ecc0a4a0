"""Maximum-entropy learning of Gibbs states, with the supporting numerics.

Modules
-------
operators     dense multi-qudit operator algebra and norms
gibbs         Gibbs states, the dual objective and its derivatives
shadows       randomized Pauli measurements and median-of-means estimates
solver        projected gradient descent with stopping-rule certificates
wasserstein   Lipschitz constants, W1 brackets and transportation cost
commuting     Petz maps, contraction coefficients and Hessian bounds
chain         transfer-matrix fast path for classical 1D chains
experiments   end-to-end pipelines used by the command line
"""

__version__ = "0.1.0"

from .operators import LocalOperator, SiteSystem, embed_local, herm_fn, norms, partial_trace
from .gibbs import (
    GibbsModel,
    dual_gradient,
    dual_hessian,
    dual_objective,
    expectations,
    gibbs_state,
    log_partition,
    relative_entropy,
    symmetric_divergence,
)
from .solver import SolverOptions, solve

__all__ = [
    "LocalOperator",
    "SiteSystem",
    "embed_local",
    "herm_fn",
    "norms",
    "partial_trace",
    "GibbsModel",
    "dual_gradient",
    "dual_hessian",
    "dual_objective",
    "expectations",
    "gibbs_state",
    "log_partition",
    "relative_entropy",
    "symmetric_divergence",
    "SolverOptions",
    "solve",
]
