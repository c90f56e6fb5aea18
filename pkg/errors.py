"""
Exception family for the VQE toolkit.

Each class carries the process exit code the CLI maps it to, so library code
only has to raise and the entry point stays a single try/except.
"""


class VqeError(Exception):
    """Base class for toolkit failures"""

    exit_code = 1


class InputError(VqeError, ValueError):
    """Bad user input: dims, lengths, config fields, files"""

    exit_code = 2


class UnsupportedError(VqeError, ValueError):
    """A valid request for a combination the toolkit does not define"""

    exit_code = 3


class OptimizerAbort(VqeError, RuntimeError):
    """The optimizer cannot continue (non-finite objective)"""

    exit_code = 4


class InsufficientDataError(VqeError, ValueError):
    """Not enough (or incomplete) data points for a fit"""

    exit_code = 5


class BudgetExhausted(VqeError):
    """
    Raised by a budgeted objective when no evaluations are left.

    Optimizers catch it and return their best point; it is a normal stop.
    """

    exit_code = 0

    def __init__(self, reason: str = "budget"):
        super().__init__(f"evaluation budget exhausted ({reason})")
        self.reason = reason
