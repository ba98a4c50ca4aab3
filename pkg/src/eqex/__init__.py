"""Equitable exchange simulator: a limit-order-book market with a
learning fee-setting exchange and a learning market maker."""

__version__ = "0.1.0"
