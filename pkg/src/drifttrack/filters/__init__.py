"""Conditional multi-object filters (daughter layer)."""

from .common import (
    CphdState,
    MeasurementTerms,
    PhdState,
    SoPhdState,
    association_term,
    missed_detection_term,
    predict_mixture,
)
from .cphd import (
    CphdCorrectors,
    CphdFilter,
    cphd_correctors,
    cphd_log_likelihood,
    cphd_predict,
    cphd_update,
)
from .phd import PhdFilter, phd_log_likelihood, phd_predict, phd_update, phd_update_terms
from .sophd import (
    SoPhdCorrectors,
    SoPhdFilter,
    sophd_correctors,
    sophd_log_likelihood,
    sophd_predict,
    sophd_update,
)

__all__ = [
    "PhdState",
    "SoPhdState",
    "CphdState",
    "MeasurementTerms",
    "missed_detection_term",
    "association_term",
    "predict_mixture",
    "PhdFilter",
    "phd_predict",
    "phd_update",
    "phd_update_terms",
    "phd_log_likelihood",
    "SoPhdFilter",
    "SoPhdCorrectors",
    "sophd_correctors",
    "sophd_predict",
    "sophd_update",
    "sophd_log_likelihood",
    "CphdFilter",
    "CphdCorrectors",
    "cphd_correctors",
    "cphd_predict",
    "cphd_update",
    "cphd_log_likelihood",
]
