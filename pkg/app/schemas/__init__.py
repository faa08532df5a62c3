"""
Schemas for the translation robustness toolkit.
"""
