"""Discrete optimal transport toolkit.

Solvers for the squared-Euclidean transport problem between weighted
point clouds: a height-based semi-discrete gradient method, entropic
matrix scaling, and an exact network simplex, plus transport-based
balanced clustering, synthetic data generators, file I/O, and a CLI.
"""

from .brenier import (
    BrenierConfig,
    BrenierTransport,
    EnvelopeAssignment,
    NumericalError,
    SolveReport,
    cell_weights,
    default_step_size,
    energy,
    evaluate_envelope,
    extract_plan,
    gradient,
    solve,
)
from .clustering import (
    ClusterConfig,
    ClusterReport,
    ClusterStep,
    WassersteinKMeans,
    center_gradient,
    cluster,
    init_centers,
    update_centers,
)
from .datasets import make_gaussian_mixture, make_uniform
from .exact_lp import ExactReport, ExactTransport, brute_force_solve, lp_solve
from .measures import (
    DiscreteMeasure,
    KernelMatrix,
    TransportPlan,
    cost_matrix,
    inner_product_matrix,
    marginal_residuals,
    normalize,
    plan_cost,
)
from .pointio import (
    load_measure,
    load_result,
    result_payload,
    save_measure,
    write_result,
)
from .sinkhorn import SinkhornConfig, SinkhornReport, SinkhornTransport, sinkhorn_solve
from .svg import save_scatter_svg, scatter_svg

__version__ = "0.1.0"

__all__ = [
    "BrenierConfig",
    "BrenierTransport",
    "ClusterConfig",
    "ClusterReport",
    "ClusterStep",
    "DiscreteMeasure",
    "EnvelopeAssignment",
    "ExactReport",
    "ExactTransport",
    "KernelMatrix",
    "NumericalError",
    "SinkhornConfig",
    "SinkhornReport",
    "SinkhornTransport",
    "SolveReport",
    "TransportPlan",
    "WassersteinKMeans",
    "brute_force_solve",
    "cell_weights",
    "center_gradient",
    "cluster",
    "cost_matrix",
    "default_step_size",
    "energy",
    "evaluate_envelope",
    "extract_plan",
    "gradient",
    "init_centers",
    "inner_product_matrix",
    "load_measure",
    "load_result",
    "lp_solve",
    "make_gaussian_mixture",
    "make_uniform",
    "marginal_residuals",
    "normalize",
    "plan_cost",
    "result_payload",
    "save_measure",
    "save_scatter_svg",
    "scatter_svg",
    "sinkhorn_solve",
    "solve",
    "update_centers",
    "write_result",
]
