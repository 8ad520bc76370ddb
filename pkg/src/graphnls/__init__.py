"""Standing waves, functionals and blow-up experiments for NLS on a star graph with a delta vertex
and on the line with a delta-prime point interaction."""

__version__ = "0.1.0"

from .grid import GraphField, LineField, StarGraphGrid, lp_norm, quadrature  # noqa: E402
from .profiles import (  # noqa: E402
    Branch,
    CoarseGridError,
    DeltaPrimeParams,
    WaveParams,
    build_profile_delta,
    build_profile_delta_prime,
    scale_field,
    solve_t1_t2,
)
from .functionals import (  # noqa: E402
    FunctionalReport,
    functional_report,
    instability_threshold,
    second_variation_E,
)
from .evolution import EvolutionConfig, TrajectoryRecord, evolve, evolve_delta_prime, step  # noqa: E402

__all__ = [
    "__version__",
    "StarGraphGrid",
    "GraphField",
    "LineField",
    "quadrature",
    "lp_norm",
    "WaveParams",
    "DeltaPrimeParams",
    "Branch",
    "CoarseGridError",
    "build_profile_delta",
    "build_profile_delta_prime",
    "scale_field",
    "solve_t1_t2",
    "FunctionalReport",
    "functional_report",
    "instability_threshold",
    "second_variation_E",
    "EvolutionConfig",
    "TrajectoryRecord",
    "evolve",
    "evolve_delta_prime",
    "step",
]
