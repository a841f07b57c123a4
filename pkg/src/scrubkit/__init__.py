"""scrubkit: train small classifiers, scrub a forget set's influence, evaluate.

The pipeline trims the parameters most sensitive to the forget data (scoring
by loss change or its single-sweep first-order surrogate), re-initializes
them, then repairs the model on the retain data with descent directions
projected away from the forget-gradient halfspace. Baselines (retraining,
fine-tuning, gradient ascent) and a metric suite (split accuracies,
membership inference, gap-to-retrain, relearn time, runtime ratio) round out
the toolkit.
"""

from ._kernels import active_backend
from .nn import ModelSpec, Network

__version__ = "0.1.0"

__all__ = ["ModelSpec", "Network", "active_backend", "__version__"]
