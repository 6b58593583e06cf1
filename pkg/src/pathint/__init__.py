"""Path-integral solvers for linear second-order boundary-value problems."""

__version__ = "0.1.0"
