"""Exception hierarchy for strataquad.

Every error raised on purpose by the library derives from StrataquadError so
the CLI can map failures to its exit-code contract without catching
unrelated exceptions.
"""

from typing import Optional


class StrataquadError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(StrataquadError, ValueError):
    """An argument has the wrong shape, length or range."""


class DomainError(StrataquadError, ValueError):
    """A computation left its mathematical domain (e.g. non-positive amplitude)."""


class SingularityError(DomainError):
    """A singular model reached a path that only supports regular models,
    or a singular integral diverges."""


class DesignError(StrataquadError):
    """A design could not be built (unnormalized density, non-monotone CDF)."""


class OracleError(StrataquadError):
    """The simulation oracle failed, e.g. on an indefinite covariance matrix."""


class ConfigError(StrataquadError):
    """An experiment config failed to parse or validate."""


class BudgetExceededError(StrataquadError):
    """The projected number of kernel evaluations exceeds the configured cap.

    Attributes:
        projected: Projected kernel evaluations for the refused call.
        budget: The cap that was in force.
    """

    def __init__(self, projected: int, budget: float, message: Optional[str] = None):
        self.projected = projected
        self.budget = budget
        super().__init__(
            message
            or (
                f"projected {projected:,} kernel evaluations exceed the budget of "
                f"{budget:,.0f}; lower the cubature order or N, or raise STRATAQUAD_BUDGET"
            )
        )
