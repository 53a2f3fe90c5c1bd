"""Touchscreen gesture authentication toolkit.

Simulates capacitive sensor frames, segments them into gesture events,
extracts pressure/velocity/duration features, and trains three classifier
families (logistic/softmax regression, kernel SVM, Gaussian-mixture
anomaly detector). A CLI and an enrollment/authentication HTTP service sit
on top of the same pipeline.
"""

__version__ = "0.1.0"
