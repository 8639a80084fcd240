"""Causal discovery and root-cause analysis for multivariate time series.

The toolkit covers the full loop: synthetic lagged-SCM corpora with known
graphs and interventions, a window-attention model that predicts lagged
causal links and models exogenous noise with a routed Gaussian mixture,
pretraining with intervention and mixup augmentation, fine-tuning on new
series, and root-cause scoring with streaming extreme-value thresholds.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, NumericError, TscausalError
from .types import InterventionRecord, LaggedCausalGraph, MultivariateSeries

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "TscausalError",
    "InterventionRecord",
    "LaggedCausalGraph",
    "MultivariateSeries",
    "__version__",
]
