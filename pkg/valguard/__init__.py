"""
# valguard - leakage-safe validation of PLS-family models
# Double cross-validation, honest baselines, permutation nulls and paired comparisons
"""

__version__ = "0.1.0"
