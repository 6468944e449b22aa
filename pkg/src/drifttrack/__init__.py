"""drifttrack: joint sensor-drift estimation and multi-object filtering.

A library and CLI for single-cluster multi-object filtering: three
Gaussian-mixture daughter filters (first-order, second-order/Panjer, and
cardinalized) with their conditional multi-object likelihoods, an
association-based alternative likelihood, a sequential-Monte-Carlo parent
filter over the sensor state, and a simulation/benchmark harness.
"""

from .backend import available_backends, backend_name
from .cardinality import (
    CardinalityDist,
    ClutterModel,
    DiscreteCardinality,
    PanjerCardinality,
    PanjerParams,
    PoissonCardinality,
    Window,
    esf,
    panjer_from_moments,
    pochhammer,
)
from .gm import (
    GaussianComponent,
    GaussianMixture,
    ReductionConfig,
    eval_gaussian,
    kalman_predict,
    kalman_update,
    reduce_mixture,
)
from .models import BirthModel, MotionModel, ObservationModel

__version__ = "0.1.0"

__all__ = [
    "available_backends",
    "backend_name",
    "CardinalityDist",
    "ClutterModel",
    "DiscreteCardinality",
    "PanjerCardinality",
    "PanjerParams",
    "PoissonCardinality",
    "Window",
    "esf",
    "panjer_from_moments",
    "pochhammer",
    "GaussianComponent",
    "GaussianMixture",
    "ReductionConfig",
    "eval_gaussian",
    "kalman_predict",
    "kalman_update",
    "reduce_mixture",
    "BirthModel",
    "MotionModel",
    "ObservationModel",
    "__version__",
]
