"""Pool-based active-learning benchmark for class-imbalanced image classification."""

__version__ = "0.1.0"
