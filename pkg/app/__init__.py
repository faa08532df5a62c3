"""
Noisy-text translation robustness toolkit
"""

__version__ = "1.0.0"
