"""Drug and adverse-reaction mention extraction, normalization and scoring."""

__version__ = "0.1.0"
