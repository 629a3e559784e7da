"""scikit-learn style wrappers around the contract solvers.

``fit(theta, beta)`` designs the menu for a type distribution; ``predict``
tells which bundle an AP of a given type picks from that menu, and
``transform`` returns the payoff of every type at every bundle.

>>> est = AntiAdverseSelection(c=0.01).fit([1.0, 1.5], [0.5, 0.5])
>>> est.T_
array([ 625., 5625.])
>>> est.predict([1.0, 1.5])
array([1, 2])
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted, column_or_1d

from . import solvers
from ._validation import make_config
from .economy import (
    EconomyConfig,
    expected_ap_payoff,
    expected_bs_payoff,
    social_welfare,
    valuation,
)
from .verifier import SLACK_TOL, verify_menu


class _ContractDesigner(BaseEstimator):
    def __init__(self, c=0.01, valuation="sqrt", alpha=None):
        self.c = c
        self.valuation = valuation
        self.alpha = alpha

    def _solve(self, config: EconomyConfig):
        raise NotImplementedError

    def fit(self, theta, beta=None):
        """Design the menu for types ``theta`` with probabilities ``beta``."""
        self.config_ = make_config(theta, beta, self.c, self.valuation, self.alpha)
        self.menu_ = self._solve(self.config_)
        self.T_ = self.menu_.T
        self.q_ = self.menu_.q
        self.n_types_ = self.config_.K
        self.expected_bs_payoff_ = expected_bs_payoff(self.menu_, self.config_)
        self.expected_ap_payoff_ = expected_ap_payoff(self.menu_, self.config_)
        self.social_welfare_ = social_welfare(self.menu_, self.config_)
        return self

    def transform(self, theta):
        """Payoff matrix: row i is the payoff of type ``theta[i]`` at every bundle."""
        check_is_fitted(self, "menu_")
        theta = column_or_1d(np.asarray(theta, dtype=float))
        v = valuation(self.config_.valuation, self.T_)
        return np.outer(theta, v) - self.q_[None, :]

    def predict(self, theta):
        """1-based index of the bundle each type picks.

        A type equal to a designed type keeps its own bundle when it is tied
        with another.
        """
        theta = column_or_1d(np.asarray(theta, dtype=float))
        P = self.transform(theta)
        own = {t: k for k, t in enumerate(self.config_.theta)}
        scale = max(1.0, float(np.abs(P).max()))
        out = np.empty(len(theta), dtype=int)
        for r, t in enumerate(theta):
            best = P[r].max()
            k = own.get(float(t))
            if k is not None and P[r, k] >= best - SLACK_TOL * scale:
                out[r] = k + 1
            else:
                out[r] = int(np.argmax(P[r])) + 1
        return out

    def verify(self):
        check_is_fitted(self, "menu_")
        return verify_menu(self.menu_, self.config_)


class PerfectDiscrimination(_ContractDesigner):
    """Full-information menu: zero AP payoff, marginal valuation equal to c."""

    def _solve(self, config):
        return solvers.solve_perfect_discrimination(config)


class LinearPricing(_ContractDesigner):
    """Posted unit price; APs choose their payment."""

    def _solve(self, config):
        sol = solvers.solve_linear_pricing(config)
        self.price_per_unit_ = sol.price_per_unit
        return sol.menu


class AntiAdverseSelection(_ContractDesigner):
    """Optimal incentive-compatible menu under hidden types."""

    def _solve(self, config):
        self.multipliers_ = solvers.kkt_multipliers(config)
        self.virtual_weights_ = solvers.virtual_weights(config)
        return solvers.solve_anti_adverse_selection(config)
