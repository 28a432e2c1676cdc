"""Cost-sensitive credit-card fraud detection benchmarks.

Resampling (undersampling, SMOTE), five classical classifiers, confusion-matrix
and fraud-cost evaluation, a genetic-algorithm-weighted voting ensemble, and a
seeded Monte Carlo harness tying them together.
"""

__version__ = "0.1.0"
