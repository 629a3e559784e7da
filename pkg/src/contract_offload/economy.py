"""Problem instance, valuation functions and payoff formulas.

The base station (BS) buys offloaded traffic ``q`` from access points (APs)
with payments ``T``.  An AP of type ``theta`` values a payment through a
strictly increasing concave ``v`` with ``v(0) = 0``.  The BS gain per unit of
traffic and the AP cost per unit of traffic are both fixed at 1, and the
reservation payoff of every AP is 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .exceptions import DomainError, NoSolutionError

BRACKET_LO = 1e-12
BRACKET_HI = 1e12
ROOT_RTOL = 1e-10
BETA_SUM_TOL = 1e-12


class Mechanism(str, enum.Enum):
    PERFECT_DISCRIMINATION = "pd"
    LINEAR_PRICING = "lp"
    ANTI_ADVERSE_SELECTION = "aas"

    @property
    def label(self):
        return {
            "pd": "perfect discrimination",
            "lp": "linear pricing",
            "aas": "anti-adverse-selection",
        }[self.value]


# Column order used by every table the package writes.
MECHANISM_ORDER = (
    Mechanism.PERFECT_DISCRIMINATION,
    Mechanism.ANTI_ADVERSE_SELECTION,
    Mechanism.LINEAR_PRICING,
)


@dataclass(frozen=True)
class ValuationKind:
    """Choice of AP valuation function.

    ``tag`` is one of ``"sqrt"`` (square root), ``"log1p"`` (``ln(1 + T)``)
    or ``"power"`` (``T**alpha`` with ``0 < alpha < 1``).
    """

    tag: str = "sqrt"
    alpha: float | None = None

    def __post_init__(self):
        if self.tag not in ("sqrt", "log1p", "power"):
            raise ValueError(f"unknown valuation {self.tag!r}")
        if self.tag == "power":
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise ValueError("power valuation needs 0 < alpha < 1")
        elif self.alpha is not None:
            raise ValueError(f"{self.tag} valuation takes no alpha")

    @classmethod
    def square_root(cls):
        return cls("sqrt")

    @classmethod
    def log_one_plus(cls):
        return cls("log1p")

    @classmethod
    def power(cls, alpha):
        return cls("power", float(alpha))

    @classmethod
    def parse(cls, text):
        """Build from ``"sqrt"``, ``"log1p"`` / ``"log"`` or ``"power:<alpha>"``."""
        text = text.strip().lower()
        if text in ("sqrt", "squareroot", "square_root"):
            return cls.square_root()
        if text in ("log", "log1p", "logoneplus", "log_one_plus"):
            return cls.log_one_plus()
        if text.startswith("power"):
            _, _, alpha = text.partition(":")
            if not alpha:
                raise ValueError("power valuation must be written power:<alpha>")
            return cls.power(float(alpha))
        raise ValueError(f"unknown valuation {text!r}")

    def __str__(self):
        return f"power:{self.alpha!r}" if self.tag == "power" else self.tag

    @property
    def marginal_sup(self):
        """Supremum of v' over T > 0 (v' is decreasing, so this is v'(0+))."""
        return 1.0 if self.tag == "log1p" else math.inf


@dataclass(frozen=True)
class ContractBundle:
    """One payment/traffic pair. ``(0, 0)`` means the AP declines."""

    T: float
    q: float

    def __post_init__(self):
        if not (self.T >= 0.0 and self.q >= 0.0):
            raise ValueError(f"bundle needs T >= 0 and q >= 0, got ({self.T}, {self.q})")


@dataclass(frozen=True)
class ContractMenu:
    mechanism: Mechanism
    bundles: tuple[ContractBundle, ...]
    price_per_unit: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "mechanism", Mechanism(self.mechanism))
        object.__setattr__(self, "bundles", tuple(self.bundles))

    @classmethod
    def from_arrays(cls, mechanism, T, q, price_per_unit=None):
        return cls(
            mechanism,
            tuple(ContractBundle(float(t), float(x)) for t, x in zip(T, q)),
            price_per_unit,
        )

    def __len__(self):
        return len(self.bundles)

    @property
    def T(self) -> np.ndarray:
        return np.array([b.T for b in self.bundles], dtype=float)

    @property
    def q(self) -> np.ndarray:
        return np.array([b.q for b in self.bundles], dtype=float)


@dataclass(frozen=True)
class EconomyConfig:
    """A discrete-type offloading economy.

    ``theta`` must be strictly increasing and positive, ``beta`` positive and
    summing to one, ``c`` (the BS cost per unit of payment) positive.
    """

    theta: tuple[float, ...]
    beta: tuple[float, ...]
    c: float = 0.01
    valuation: ValuationKind = field(default_factory=ValuationKind.square_root)

    def __post_init__(self):
        theta = tuple(float(t) for t in np.atleast_1d(np.asarray(self.theta, dtype=float)))
        beta = tuple(float(b) for b in np.atleast_1d(np.asarray(self.beta, dtype=float)))
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "beta", beta)
        if len(theta) == 0:
            raise ValueError("at least one type is required")
        if len(theta) != len(beta):
            raise ValueError(f"theta has {len(theta)} entries but beta has {len(beta)}")
        if not all(math.isfinite(t) and t > 0 for t in theta):
            raise ValueError("every theta_k must be positive and finite")
        if any(b <= a for a, b in zip(theta, theta[1:])):
            raise ValueError("theta must be strictly increasing")
        if not all(math.isfinite(b) and b > 0 for b in beta):
            raise ValueError("every beta_k must be positive")
        if abs(math.fsum(beta) - 1.0) > BETA_SUM_TOL:
            raise ValueError(f"beta must sum to 1, sums to {math.fsum(beta)!r}")
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError("c must be positive")
        if isinstance(self.valuation, str):
            object.__setattr__(self, "valuation", ValuationKind.parse(self.valuation))

    @classmethod
    def uniform(cls, theta: Sequence[float], c=0.01, valuation=None):
        """Config with ``beta_k = 1/K``."""
        K = len(theta)
        return cls(tuple(theta), (1.0 / K,) * K, c, valuation or ValuationKind.square_root())

    @classmethod
    def default(cls, K=20, c=0.01, valuation=None, theta_offset=0.0):
        """Reconstructed simulation setup: ``theta_k = k + theta_offset``, uniform beta."""
        return cls.uniform(
            [k + theta_offset for k in range(1, K + 1)], c, valuation
        )

    @property
    def K(self) -> int:
        return len(self.theta)

    @property
    def theta_array(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=float)

    @property
    def beta_array(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=float)


def valuation(kind: ValuationKind, T):
    """v(T). Accepts scalars or arrays; raises DomainError on negative input."""
    T_arr = np.asarray(T, dtype=float)
    if np.any(T_arr < 0) or np.any(np.isnan(T_arr)):
        raise DomainError(f"valuation needs T >= 0, got {T}")
    if kind.tag == "sqrt":
        out = np.sqrt(T_arr)
    elif kind.tag == "log1p":
        out = np.log1p(T_arr)
    else:
        out = np.power(T_arr, kind.alpha)
    return float(out) if out.ndim == 0 else out


def valuation_derivative(kind: ValuationKind, T):
    """v'(T) for T > 0."""
    T_arr = np.asarray(T, dtype=float)
    if np.any(~(T_arr > 0)):
        raise DomainError(f"valuation derivative needs T > 0, got {T}")
    if kind.tag == "sqrt":
        out = 0.5 / np.sqrt(T_arr)
    elif kind.tag == "log1p":
        out = 1.0 / (1.0 + T_arr)
    else:
        out = kind.alpha * np.power(T_arr, kind.alpha - 1.0)
    return float(out) if out.ndim == 0 else out


def valuation_second_derivative(kind: ValuationKind, T):
    T_arr = np.asarray(T, dtype=float)
    if np.any(~(T_arr > 0)):
        raise DomainError(f"valuation second derivative needs T > 0, got {T}")
    if kind.tag == "sqrt":
        out = -0.25 * np.power(T_arr, -1.5)
    elif kind.tag == "log1p":
        out = -1.0 / (1.0 + T_arr) ** 2
    else:
        out = kind.alpha * (kind.alpha - 1.0) * np.power(T_arr, kind.alpha - 2.0)
    return float(out) if out.ndim == 0 else out


def _check_marginal(kind, m):
    if not (m > 0 and math.isfinite(m)):
        raise NoSolutionError(f"marginal valuation target must be positive, got {m}")
    if m >= kind.marginal_sup:
        raise NoSolutionError(
            f"v'(T) = {m} has no solution for {kind} (v' < {kind.marginal_sup})"
        )


def inverse_marginal_valuation(kind: ValuationKind, m: float) -> float:
    """The payment T > 0 with v'(T) = m."""
    m = float(m)
    _check_marginal(kind, m)
    if kind.tag == "sqrt":
        return 1.0 / (4.0 * m * m)
    if kind.tag == "log1p":
        return 1.0 / m - 1.0
    return (m / kind.alpha) ** (1.0 / (kind.alpha - 1.0))


def solve_marginal_numeric(kind: ValuationKind, m: float, lo=BRACKET_LO, hi=BRACKET_HI) -> float:
    """Root-find v'(T) = m without the closed forms.

    The bracket starts at ``[lo, hi]`` and is widened geometrically until it
    changes sign, then Brent's method refines it.
    """
    m = float(m)
    _check_marginal(kind, m)

    def gap(t):
        return valuation_derivative(kind, t) - m

    for _ in range(200):
        g_lo, g_hi = gap(lo), gap(hi)
        if g_lo >= 0 >= g_hi:
            break
        if g_lo < 0:
            lo *= 1e-3
        if g_hi > 0:
            hi *= 1e3
        if lo < 1e-300 or hi > 1e300:
            raise NoSolutionError(f"could not bracket v'(T) = {m} for {kind}")
    else:
        raise NoSolutionError(f"could not bracket v'(T) = {m} for {kind}")
    # Bracket in log space: payments span many decades.
    root = brentq(lambda s: gap(math.exp(s)), math.log(lo), math.log(hi),
                  xtol=1e-300, rtol=1e-15, maxiter=500)
    return math.exp(root)


def ap_payoff(theta_k: float, bundle: ContractBundle, kind: ValuationKind) -> float:
    """theta_k * v(T) - q."""
    return theta_k * valuation(kind, bundle.T) - bundle.q


def bs_payoff(bundle: ContractBundle, c: float) -> float:
    """q - c * T."""
    return bundle.q - c * bundle.T


def _check_length(menu, config):
    if len(menu) != config.K:
        raise ValueError(f"menu has {len(menu)} bundles but the economy has {config.K} types")


def ap_payoffs(menu: ContractMenu, config: EconomyConfig) -> np.ndarray:
    _check_length(menu, config)
    return config.theta_array * valuation(config.valuation, menu.T) - menu.q


def bs_payoffs(menu: ContractMenu, config: EconomyConfig) -> np.ndarray:
    _check_length(menu, config)
    return menu.q - config.c * menu.T


def welfare_per_type(menu: ContractMenu, config: EconomyConfig) -> np.ndarray:
    """theta_k v(T_k) - c T_k; traffic cancels between BS and AP."""
    _check_length(menu, config)
    return config.theta_array * valuation(config.valuation, menu.T) - config.c * menu.T


def social_welfare(menu: ContractMenu, config: EconomyConfig) -> float:
    """Expected welfare sum_k beta_k (theta_k v(T_k) - c T_k)."""
    return float(np.dot(config.beta_array, welfare_per_type(menu, config)))


def expected_bs_payoff(menu: ContractMenu, config: EconomyConfig) -> float:
    return float(np.dot(config.beta_array, bs_payoffs(menu, config)))


def expected_ap_payoff(menu: ContractMenu, config: EconomyConfig) -> float:
    return float(np.dot(config.beta_array, ap_payoffs(menu, config)))
