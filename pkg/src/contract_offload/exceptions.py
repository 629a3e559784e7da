"""Exception hierarchy shared by every module of the package."""


class ContractError(Exception):
    """Base class for all errors raised by contract_offload."""


class DomainError(ContractError, ValueError):
    """An argument lies outside the domain of a valuation function."""


class NoSolutionError(ContractError):
    """A first-order condition has no solution for the chosen valuation."""


class NonregularInstanceError(ContractError):
    """The payment recursion hit a nonpositive virtual weight.

    ``index`` is the 1-based type index k where
    mu_k * theta_k - mu_{k+1} * theta_{k+1} <= 0.
    """

    def __init__(self, index, weight, reason=None):
        self.index = index
        self.weight = weight
        reason = reason or (
            f"virtual weight mu_k*theta_k - mu_k+1*theta_k+1 = {weight:.6g} <= 0"
        )
        super().__init__(
            f"nonregular instance at type index {index}: {reason}; "
            "ironing is not supported"
        )


class DegenerateMarketError(ContractError):
    """Linear pricing cannot make a positive profit at any price above cost."""


class InfeasibleMenuError(ContractError):
    """A solved menu failed verification."""

    def __init__(self, mechanism, report, message=None):
        self.mechanism = mechanism
        self.report = report
        super().__init__(message or f"{mechanism} menu failed verification")


class WidenGridError(ContractError):
    """A grid search maximizer sits on the grid boundary."""


class OracleInfeasibleError(ContractError):
    """No grid point satisfied the constraints."""
