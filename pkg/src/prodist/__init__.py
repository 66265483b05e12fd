"""
prodist - Variational distance between n-fold product distributions.
"""
__version__ = "0.1.0"
