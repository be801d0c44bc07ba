"""Progressive recovery of interdependent networks under per-step resource budgets."""

__version__ = "0.1.0"
