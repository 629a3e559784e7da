"""Solver-independent checks of a contract menu.

Everything here is computed from the payoff formulas in
:mod:`contract_offload.economy` alone, so menus from any source (a solver,
an oracle, a CSV file) can be checked.

Slack comparisons use an absolute tolerance of ``1e-9`` on payoffs
normalised by the menu's scale ``max(1, max |theta v(T)|, max |q|)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .economy import (
    MECHANISM_ORDER,
    ContractMenu,
    EconomyConfig,
    Mechanism,
    ap_payoffs,
    bs_payoffs,
    valuation,
    welfare_per_type,
)

SLACK_TOL = 1e-9
MONOTONE_TOL = 1e-12


def _scale(menu: ContractMenu, config: EconomyConfig) -> float:
    gains = config.theta_array * valuation(config.valuation, menu.T)
    return float(max(1.0, np.max(np.abs(gains)), np.max(np.abs(menu.q))))


def payoff_matrix(menu: ContractMenu, config: EconomyConfig) -> np.ndarray:
    """Entry (k, l): payoff of a type-k AP that picks bundle l."""
    if len(menu) != config.K:
        raise ValueError(f"menu has {len(menu)} bundles but the economy has {config.K} types")
    v = valuation(config.valuation, menu.T)
    return np.outer(config.theta_array, v) - menu.q[None, :]


def check_ir(menu: ContractMenu, config: EconomyConfig) -> np.ndarray:
    """Participation slack theta_k v(T_k) - q_k of every type."""
    return ap_payoffs(menu, config)


def check_ic(menu: ContractMenu, config: EconomyConfig) -> np.ndarray:
    """K x K matrix: own-bundle payoff minus payoff at bundle l (zero diagonal)."""
    P = payoff_matrix(menu, config)
    slack = np.diag(P)[:, None] - P
    np.fill_diagonal(slack, 0.0)
    return slack


def _strictly_increasing(x):
    return bool(np.all(np.diff(x) > MONOTONE_TOL))


def check_monotonicity(menu: ContractMenu, config: EconomyConfig):
    """Strict-increase flags ``(monotone_T, monotone_q, monotone_V)``.

    A single type is vacuously monotone.
    """
    if config.K == 1:
        return True, True, True
    V = ap_payoffs(menu, config)
    return _strictly_increasing(menu.T), _strictly_increasing(menu.q), _strictly_increasing(V)


def _is_unimodal(seq, tol):
    peak = int(np.argmax(seq))
    rising = np.diff(seq[: peak + 1])
    falling = np.diff(seq[peak:])
    return bool(np.all(rising >= -tol) and np.all(falling <= tol))


@dataclass(frozen=True)
class SelfRevelation:
    self_revealing: bool
    choice: tuple[int, ...]          # 1-based bundle each type picks after tie-break
    argmax_sets: tuple[tuple[int, ...], ...]
    unimodal: tuple[bool, ...]
    degenerate: bool


def check_self_revealing(menu: ContractMenu, config: EconomyConfig) -> SelfRevelation:
    """Enumerate every type against every bundle.

    Bundles whose payoff is within tolerance of the best one form the argmax
    set; an AP in a tie keeps its own bundle.
    """
    P = payoff_matrix(menu, config)
    tol = SLACK_TOL * _scale(menu, config)
    choice, sets, unimodal = [], [], []
    for k in range(config.K):
        row = P[k]
        best = row.max()
        ties = tuple(int(l) + 1 for l in np.flatnonzero(row >= best - tol))
        sets.append(ties)
        choice.append(k + 1 if (k + 1) in ties else ties[0])
        unimodal.append(_is_unimodal(row, tol))
    degenerate = config.K > 1 and bool(
        np.all(menu.T == menu.T[0]) and np.all(menu.q == menu.q[0])
    )
    revealing = all(ch == k + 1 for k, ch in enumerate(choice))
    return SelfRevelation(revealing, tuple(choice), tuple(sets), tuple(unimodal), degenerate)


@dataclass(frozen=True)
class FeasibilityReport:
    theta: np.ndarray
    T: np.ndarray
    q: np.ndarray
    ir_slacks: np.ndarray
    ic_slack_matrix: np.ndarray
    monotone_T: bool
    monotone_q: bool
    monotone_V: bool
    self_revealing: bool
    worst_violation: float
    tolerance: float
    choice: tuple[int, ...] = ()
    unimodal: tuple[bool, ...] = ()
    degenerate: bool = False
    mechanism: str | None = None

    @property
    def ir_feasible(self) -> bool:
        return bool(self.ir_slacks.min() >= -self.tolerance)

    @property
    def ic_feasible(self) -> bool:
        off = self.ic_slack_matrix[~np.eye(len(self.theta), dtype=bool)]
        return bool(off.size == 0 or off.min() >= -self.tolerance)

    @property
    def feasible(self) -> bool:
        return self.ir_feasible and self.ic_feasible

    @property
    def zero_payoffs(self) -> bool:
        return bool(np.all(np.abs(self.ir_slacks) <= self.tolerance))

    def violations(self):
        """Human-readable list of every violated constraint."""
        out = []
        for k, s in enumerate(self.ir_slacks, 1):
            if s < -self.tolerance:
                out.append(f"IR type {k}: slack {s:.6g}")
        K = len(self.theta)
        for k in range(K):
            for l in range(K):
                s = self.ic_slack_matrix[k, l]
                if k != l and s < -self.tolerance:
                    out.append(f"IC type {k + 1} vs bundle {l + 1}: slack {s:.6g}")
        return out

    def to_csv(self) -> str:
        """One row per type; see README for the column meanings."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "theta", "T", "q", "ir_slack", "min_ic_slack", "chosen_bundle"])
        K = len(self.theta)
        for k in range(K):
            others = np.delete(self.ic_slack_matrix[k], k)
            min_ic = others.min() if others.size else 0.0
            w.writerow([
                k + 1, _fmt(self.theta[k]), _fmt(self.T[k]), _fmt(self.q[k]),
                _fmt(self.ir_slacks[k]), _fmt(min_ic),
                self.choice[k] if self.choice else "",
            ])
        return buf.getvalue()

    def summary(self) -> str:
        name = Mechanism(self.mechanism).label if self.mechanism else "menu"
        lines = [
            f"{name}: K={len(self.theta)}",
            f"  feasible        {self.feasible} (IR {self.ir_feasible}, IC {self.ic_feasible})",
            f"  worst violation {self.worst_violation:.3g}",
            f"  monotone T/q/V  {self.monotone_T}/{self.monotone_q}/{self.monotone_V}",
            f"  self revealing  {self.self_revealing}"
            + (" (degenerate: identical bundles)" if self.degenerate else ""),
        ]
        if self.zero_payoffs:
            lines.append("  all AP payoffs are zero")
        lines.extend("  violated: " + v for v in self.violations())
        return "\n".join(lines)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def verify_menu(menu: ContractMenu, config: EconomyConfig) -> FeasibilityReport:
    ir = check_ir(menu, config)
    ic = check_ic(menu, config)
    mT, mq, mV = check_monotonicity(menu, config)
    rev = check_self_revealing(menu, config)
    off = ic[~np.eye(config.K, dtype=bool)]
    worst = min(0.0, float(ir.min()), float(off.min()) if off.size else 0.0)
    return FeasibilityReport(
        theta=config.theta_array, T=menu.T, q=menu.q,
        ir_slacks=ir, ic_slack_matrix=ic,
        monotone_T=mT, monotone_q=mq, monotone_V=mV,
        self_revealing=rev.self_revealing,
        worst_violation=-worst,
        tolerance=SLACK_TOL * _scale(menu, config),
        choice=rev.choice, unimodal=rev.unimodal, degenerate=rev.degenerate,
        mechanism=menu.mechanism.value,
    )


@dataclass
class ExperimentResult:
    """Per-type and aggregate payoffs of each solved mechanism.

    Per-type arrays are keyed by :class:`Mechanism`; ``aggregates`` maps a
    mechanism to its expected BS payoff, expected AP payoff and expected
    welfare.
    """

    theta: np.ndarray
    beta: np.ndarray
    mechanisms: tuple[Mechanism, ...]
    T: dict = field(default_factory=dict)
    q: dict = field(default_factory=dict)
    V: dict = field(default_factory=dict)
    U: dict = field(default_factory=dict)
    W: dict = field(default_factory=dict)
    aggregates: dict = field(default_factory=dict)
    price_per_unit: float | None = None
    selection_payoffs: np.ndarray | None = None
    reports: dict = field(default_factory=dict)
    sweep_rows: list | None = None

    @property
    def K(self):
        return len(self.theta)


def payoff_table(menus, config: EconomyConfig) -> ExperimentResult:
    """Assemble per-type BS payoff, AP payoff and welfare of each menu."""
    by_mech = {Mechanism(m.mechanism): m for m in menus}
    order = tuple(m for m in MECHANISM_ORDER if m in by_mech)
    res = ExperimentResult(config.theta_array, config.beta_array, order)
    beta = config.beta_array
    for mech in order:
        menu = by_mech[mech]
        res.T[mech] = menu.T
        res.q[mech] = menu.q
        res.V[mech] = ap_payoffs(menu, config)
        res.U[mech] = bs_payoffs(menu, config)
        res.W[mech] = welfare_per_type(menu, config)
        res.aggregates[mech] = {
            "bs_payoff": float(np.dot(beta, res.U[mech])),
            "ap_payoff": float(np.dot(beta, res.V[mech])),
            "welfare": float(np.dot(beta, res.W[mech])),
        }
        if mech is Mechanism.LINEAR_PRICING:
            res.price_per_unit = menu.price_per_unit
        if mech is Mechanism.ANTI_ADVERSE_SELECTION:
            res.selection_payoffs = payoff_matrix(menu, config)
    return res
