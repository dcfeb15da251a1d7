"""falsify-kit: simulation-guided falsification and parameter synthesis.

Search an abstract feature space for simulator configurations that violate
(or, in synthesis mode, satisfy) a bounded-MTL property, record
counterexamples in an analyzable error table, and talk to external
simulators over a length-prefixed JSON socket protocol.
"""

from .errors import FalsifyKitError
from .falsify import InProcessSim, Objective, RunConfig, RunResult, SocketSim, replay, run
from .mtl import Trace, parse_formula, robustness, satisfies
from .samplers import (
    AnnealingSampler,
    BayesOptSampler,
    CrossEntropySampler,
    Feedback,
    HaltonSampler,
    UniformSampler,
    make_sampler,
)
from .space import (
    Array,
    Box,
    DistributionSpec,
    FeatureSpace,
    FiniteSet,
    Point,
    Struct,
    build_space,
    dimensions,
    flatten,
    parse_constraint,
    sample_prior,
    unflatten,
)
from .table import ErrorTable, import_csv

__version__ = "0.1.0"

__all__ = [
    "AnnealingSampler", "Array", "BayesOptSampler", "Box", "CrossEntropySampler",
    "DistributionSpec", "ErrorTable", "FalsifyKitError", "FeatureSpace", "Feedback",
    "FiniteSet", "HaltonSampler", "InProcessSim", "Objective", "Point", "RunConfig",
    "RunResult", "SocketSim", "Struct", "Trace", "UniformSampler", "build_space",
    "dimensions", "flatten", "import_csv", "make_sampler", "parse_constraint",
    "parse_formula", "replay", "robustness", "run", "sample_prior", "satisfies",
    "unflatten",
]
