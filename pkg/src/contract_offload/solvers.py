"""Optimal contract menus under the three mechanisms.

``solve_perfect_discrimination``
    full-information benchmark: every AP is held to zero payoff and paid
    until its marginal valuation equals the BS payment cost.
``solve_linear_pricing``
    one posted price per unit of payment; each AP picks its own payment and
    the BS sets the monopoly price.
``solve_anti_adverse_selection``
    the second-best screening menu under hidden types, obtained from the
    reduced program (IR for the lowest type, downward-adjacent IC) by
    backward induction on the Lagrange multipliers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .economy import (
    ContractMenu,
    EconomyConfig,
    Mechanism,
    ValuationKind,
    inverse_marginal_valuation,
    valuation,
    valuation_second_derivative,
)
from .exceptions import DegenerateMarketError, NoSolutionError, NonregularInstanceError


@dataclass(frozen=True)
class LinearPricingSolution:
    price_per_unit: float
    per_type_payment: tuple[float, ...]
    menu: ContractMenu


@dataclass(frozen=True)
class KktMultipliers:
    """IC multipliers ``mu`` (one per type) and the IR multiplier ``nu``.

    ``mu_k`` is the probability mass of types k..K; ``nu`` equals ``mu_1``.
    """

    mu: tuple[float, ...]
    nu: float


def solve_perfect_discrimination(config: EconomyConfig) -> ContractMenu:
    kind = config.valuation
    T = np.array([inverse_marginal_valuation(kind, config.c / th) for th in config.theta])
    q = config.theta_array * valuation(kind, T)
    return ContractMenu.from_arrays(Mechanism.PERFECT_DISCRIMINATION, T, q)


def demand(theta_k: float, P: float, kind: ValuationKind) -> float:
    """Payment an AP of type ``theta_k`` requests at unit price ``P``."""
    if not P > 0:
        raise ValueError(f"price must be positive, got {P}")
    return inverse_marginal_valuation(kind, P / theta_k)


def aggregate_demand(config: EconomyConfig, P: float) -> float:
    return math.fsum(b * demand(th, P, config.valuation) for th, b in zip(config.theta, config.beta))


def aggregate_demand_derivative(config: EconomyConfig, P: float) -> float:
    # d_k'(P) = 1 / (theta_k v''(d_k(P))) by the inverse function theorem
    kind = config.valuation
    total = []
    for th, b in zip(config.theta, config.beta):
        d = demand(th, P, kind)
        total.append(b / (th * valuation_second_derivative(kind, d)))
    return math.fsum(total)


def linear_pricing_profit(config: EconomyConfig, P: float) -> float:
    """(P - c) D(P)."""
    return (P - config.c) * aggregate_demand(config, P)


def _profit_slope(config, P):
    return aggregate_demand(config, P) + (P - config.c) * aggregate_demand_derivative(config, P)


def solve_linear_pricing(config: EconomyConfig) -> LinearPricingSolution:
    """Monopoly price from the first-order condition P = c - D(P)/D'(P)."""
    c = config.c
    # demand is only defined while P / theta_1 stays inside the range of v'
    cap = config.theta[0] * config.valuation.marginal_sup
    if cap <= c:
        raise DegenerateMarketError(
            f"no price above c={c} keeps every type trading (cap {cap})"
        )
    lo = c * (1.0 + 1e-9)
    if _profit_slope(config, lo) <= 0:
        raise DegenerateMarketError("profit (P - c) D(P) is not increasing above c")
    hi = 2.0 * c
    while True:
        if hi >= cap:
            hi = c + (cap - c) * (1.0 - 1e-9)
            if _profit_slope(config, hi) > 0:
                raise NoSolutionError(
                    "monopoly price would exclude the lowest type; "
                    "linear pricing with a corner demand is not supported"
                )
            break
        if _profit_slope(config, hi) < 0:
            break
        lo, hi = hi, 2.0 * hi
    P_m = brentq(lambda p: _profit_slope(config, p), lo, hi, xtol=1e-300, rtol=1e-14, maxiter=500)
    if linear_pricing_profit(config, P_m) <= 0:
        raise DegenerateMarketError("monopoly profit is not positive")
    T = np.array([demand(th, P_m, config.valuation) for th in config.theta])
    menu = ContractMenu.from_arrays(Mechanism.LINEAR_PRICING, T, P_m * T, price_per_unit=P_m)
    return LinearPricingSolution(P_m, tuple(float(t) for t in T), menu)


def kkt_multipliers(config: EconomyConfig) -> KktMultipliers:
    """Backward recursion mu_K = beta_K, mu_k = beta_k + mu_{k+1}."""
    mu = [0.0] * config.K
    acc = 0.0
    for k in range(config.K - 1, -1, -1):
        acc += config.beta[k]
        mu[k] = acc
    return KktMultipliers(tuple(mu), mu[0])


def virtual_weights(config: EconomyConfig) -> np.ndarray:
    """mu_k theta_k - mu_{k+1} theta_{k+1} for k < K, and mu_K theta_K for the top type."""
    mu = np.asarray(kkt_multipliers(config).mu)
    th = config.theta_array
    w = mu * th
    w[:-1] -= mu[1:] * th[1:]
    return w


def solve_anti_adverse_selection(config: EconomyConfig) -> ContractMenu:
    """Second-best menu under hidden types.

    Raises NonregularInstanceError (1-based index) when a virtual weight is
    nonpositive, or when the resulting payments are not strictly increasing;
    both cases would need ironing, which is not implemented.
    """
    kind = config.valuation
    c = config.c
    beta = config.beta_array
    th = config.theta_array
    w = virtual_weights(config)
    for k in range(config.K - 1):
        if not w[k] > 0:
            raise NonregularInstanceError(k + 1, float(w[k]))

    T = np.empty(config.K)
    T[-1] = inverse_marginal_valuation(kind, c / th[-1])
    for k in range(config.K - 2, -1, -1):
        T[k] = inverse_marginal_valuation(kind, beta[k] * c / w[k])
    for k in range(config.K - 1):
        if not T[k] < T[k + 1]:
            raise NonregularInstanceError(
                k + 1, float(w[k]),
                reason=f"payments not increasing (T_{k + 1} >= T_{k + 2})",
            )

    v = valuation(kind, T)
    q = np.empty(config.K)
    q[0] = th[0] * v[0]
    for k in range(1, config.K):
        q[k] = th[k] * v[k] - th[k] * v[k - 1] + q[k - 1]
    return ContractMenu.from_arrays(Mechanism.ANTI_ADVERSE_SELECTION, T, q)


def solve(config: EconomyConfig, mechanism) -> ContractMenu:
    mechanism = Mechanism(mechanism)
    if mechanism is Mechanism.PERFECT_DISCRIMINATION:
        return solve_perfect_discrimination(config)
    if mechanism is Mechanism.LINEAR_PRICING:
        return solve_linear_pricing(config).menu
    return solve_anti_adverse_selection(config)
