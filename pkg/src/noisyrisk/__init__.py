"""Label-noise robust training and cost-weighted clinical risk evaluation for binary screening."""

from . import datagen, metrics, nnet, selection, semisup

__version__ = "0.1.0"

__all__ = ["datagen", "metrics", "nnet", "selection", "semisup", "__version__"]
