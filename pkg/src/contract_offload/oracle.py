"""Brute-force grid references for the closed-form solvers.

These never call into :mod:`contract_offload.solvers`.  AP best responses are
found by numeric root finding rather than the closed-form inverses, and
the screening problem is searched with every IR and IC constraint enforced.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numba import njit

from .economy import (
    BRACKET_HI,
    BRACKET_LO,
    ContractMenu,
    EconomyConfig,
    Mechanism,
    solve_marginal_numeric,
    valuation,
    valuation_derivative,
)
from .exceptions import OracleInfeasibleError, WidenGridError

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Log-spaced payment grid ``[t_min, t_max]`` refined around the incumbent."""

    t_min: float = 1.0
    t_max: float = 1e6
    points_per_axis: int = 16
    refinement_rounds: int = 12
    half_width_cells: float = 3.0

    def __post_init__(self):
        if not 0 < self.t_min < self.t_max:
            raise ValueError("GridSpec needs 0 < t_min < t_max")
        if self.points_per_axis < 16:
            raise ValueError("GridSpec needs points_per_axis >= 16")
        if self.refinement_rounds < 1:
            raise ValueError("GridSpec needs refinement_rounds >= 1")


@dataclass(frozen=True)
class OracleResult:
    menu: ContractMenu
    objective: float
    cell: np.ndarray     # final grid spacing per payment axis (log10 units)


def _refine(axis_grid, x, lo, hi, n, half_cells):
    """New axis grid centred on ``x`` spanning ``half_cells`` local spacings."""
    g = np.asarray(axis_grid)
    i = int(np.argmin(np.abs(g - x)))
    left = g[i] - g[i - 1] if i > 0 else 0.0
    right = g[i + 1] - g[i] if i + 1 < len(g) else 0.0
    h = half_cells * max(left, right)
    new = np.linspace(max(lo, x - h), min(hi, x + h), n)
    return np.unique(np.append(new, x))


def _best(objective, feasible):
    """Index of the best feasible point; ties go to the smallest flat index."""
    if not feasible.any():
        return None
    masked = np.where(feasible, objective, -np.inf)
    return int(np.argmax(masked))


def _objective(config, T, q):
    return (q - config.c * T) @ config.beta_array


def _feasible(config, T, q):
    """IR and all K(K-1) IC constraints for a batch of menus (rows)."""
    th = config.theta_array
    v = valuation(config.valuation, T)                         # (N, K)
    scale = np.maximum(1.0, np.maximum(np.abs(th * v).max(axis=1), np.abs(q).max(axis=1)))
    tol = FEAS_TOL * scale
    own = th * v - q                                           # (N, K)
    ok = (own >= -tol[:, None]).all(axis=1)
    for k in range(config.K):
        for l in range(config.K):
            if k != l:
                ok &= own[:, k] >= th[k] * v[:, l] - q[:, l] - tol
    return ok


def _binding_traffic(config, T):
    """q_1 = theta_1 v(T_1), q_k = q_{k-1} + theta_k (v(T_k) - v(T_{k-1}))."""
    th = config.theta_array
    v = valuation(config.valuation, T)
    q = np.empty_like(T)
    q[:, 0] = th[0] * v[:, 0]
    for k in range(1, config.K):
        q[:, k] = q[:, k - 1] + th[k] * (v[:, k] - v[:, k - 1])
    return q


def _search_binding(config, grid):
    K, n = config.K, grid.points_per_axis
    lo, hi = np.log(grid.t_min), np.log(grid.t_max)
    axes = [np.linspace(lo, hi, n) for _ in range(K)]
    inc = None
    for _ in range(grid.refinement_rounds + 1):
        if inc is not None:
            axes = [_refine(axes[k], inc[k], lo, hi, n, grid.half_width_cells) for k in range(K)]
        mesh = np.array(list(itertools.product(*axes)))
        T = np.exp(mesh)
        q = _binding_traffic(config, T)
        i = _best(_objective(config, T, q), _feasible(config, T, q))
        if i is None:
            raise OracleInfeasibleError("no feasible payment tuple on the grid")
        inc = mesh[i]
    T = np.exp(inc)[None, :]
    q = _binding_traffic(config, T)
    return T[0], q[0], axes


@njit(cache=True)
def _scan_rent_grid(th, beta, gains, v, base, tol, r_mesh):
    """Best (payment tuple, rent share tuple) pair meeting every IC constraint.

    Rent of type k is ``gains[a, k] * r_mesh[i, k]``; IR holds by construction.
    Scans in lexicographic (a, i) order and keeps the first maximiser.
    """
    NT, K = gains.shape
    NR = r_mesh.shape[0]
    best_a, best_i, best_val = -1, -1, -np.inf
    rent = np.empty(K)
    for a in range(NT):
        for i in range(NR):
            obj = base[a]
            for k in range(K):
                rent[k] = gains[a, k] * r_mesh[i, k]
                obj -= beta[k] * rent[k]
            if obj <= best_val:
                continue
            ok = True
            for k in range(K):
                for l in range(K):
                    # IC (k, l): rent_k - rent_l >= (theta_k - theta_l) v(T_l)
                    if k != l and rent[k] - rent[l] < (th[k] - th[l]) * v[a, l] - tol[a]:
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                best_a, best_i, best_val = a, i, obj
    return best_a, best_i


def _search_full(config, grid):
    """Joint grid over payments (log) and traffic.

    Traffic is parametrised as ``q_k = (1 - r_k) theta_k v(T_k)`` with the
    rent share ``r_k`` in [0, 1], which covers every (T, q) pair meeting IR.
    This is a 2K-dimensional search of the unreduced program.
    """
    K, n = config.K, grid.points_per_axis
    th = config.theta_array
    beta = config.beta_array
    lo, hi = np.log(grid.t_min), np.log(grid.t_max)
    t_axes = [np.linspace(lo, hi, n) for _ in range(K)]
    r_axes = [np.linspace(0.0, 1.0, n) for _ in range(K)]
    inc = None
    for _ in range(grid.refinement_rounds + 1):
        if inc is not None:
            t_axes = [_refine(t_axes[k], inc[k], lo, hi, n, grid.half_width_cells) for k in range(K)]
            r_axes = [_refine(r_axes[k], inc[K + k], 0.0, 1.0, n, grid.half_width_cells)
                      for k in range(K)]
        t_mesh = np.array(list(itertools.product(*t_axes)))
        # Adding IC (k, l) and IC (l, k) gives (theta_k - theta_l)(v(T_k) - v(T_l)) >= 0,
        # so a decreasing payment tuple admits no feasible traffic at all.
        t_mesh = t_mesh[np.all(np.diff(t_mesh, axis=1) >= 0, axis=1)]
        r_mesh = np.array(list(itertools.product(*r_axes)))
        T_all = np.exp(t_mesh)
        v = valuation(config.valuation, T_all)                 # (NT, K)
        gains = th * v
        tol = FEAS_TOL * np.maximum(1.0, gains.max(axis=1))
        base = (gains - config.c * T_all) @ beta                  # objective with zero rent
        a, i = _scan_rent_grid(th, beta, gains, v, base, tol, r_mesh)
        best = None if a < 0 else np.concatenate([t_mesh[a], r_mesh[i]])
        if best is None:
            raise OracleInfeasibleError("no feasible (T, q) point on the grid")
        inc = best
    T = np.exp(inc[:K])
    q = (1.0 - inc[K:]) * th * valuation(config.valuation, T)
    return T, q, t_axes


def oracle_anti_adverse_selection(config: EconomyConfig, grid: GridSpec | None = None,
                                  mode: str = "binding") -> OracleResult:
    """Exhaustive search of the screening program for K <= 3.

    ``mode="binding"`` grids payments only and fills traffic from the binding
    IR/adjacent-IC structure; ``mode="full"`` grids payments and traffic
    jointly.  Both modes keep only menus meeting every IR and IC constraint.
    """
    if config.K > 3:
        raise ValueError("grid oracle supports K <= 3")
    grid = grid or GridSpec()
    if mode == "binding":
        T, q, axes = _search_binding(config, grid)
    elif mode == "full":
        T, q, axes = _search_full(config, grid)
    else:
        raise ValueError(f"unknown oracle mode {mode!r}")
    logT = np.log(T)
    if np.any(np.isclose(logT, np.log(grid.t_min))) or np.any(np.isclose(logT, np.log(grid.t_max))):
        raise WidenGridError(f"oracle optimum {T} touches the payment grid bounds")
    cell = np.array([np.diff(a).max() for a in axes]) / np.log(10)
    menu = ContractMenu.from_arrays(Mechanism.ANTI_ADVERSE_SELECTION, T, np.maximum(q, 0.0))
    obj = float(_objective(config, T[None, :], q[None, :])[0])
    return OracleResult(menu, obj, cell)


def _best_response(theta_k, P, kind):
    # the AP maximises theta_k v(T) - P T; corner at T = 0 when v'(0+) <= P / theta_k
    m = P / theta_k
    if m >= kind.marginal_sup:
        return 0.0
    return solve_marginal_numeric(kind, m)


def _best_responses(theta, prices, kind, iters=200):
    """Vectorised ``_best_response`` for every (price, type) pair by log-space bisection."""
    m = np.asarray(prices, dtype=float)[:, None] / np.asarray(theta, dtype=float)[None, :]
    lo = np.full(m.shape, np.log(BRACKET_LO))
    hi = np.full(m.shape, np.log(BRACKET_HI))
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        above = valuation_derivative(kind, np.exp(mid)) > m
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(lo))):
            break
    return np.where(m >= kind.marginal_sup, 0.0, np.exp(0.5 * (lo + hi)))


def oracle_profit(config: EconomyConfig, P: float) -> float:
    d = [_best_response(th, P, config.valuation) for th in config.theta]
    return (P - config.c) * float(np.dot(config.beta_array, d))


def _profits(config, prices):
    d = _best_responses(config.theta, prices, config.valuation)
    return (np.asarray(prices) - config.c) * (d @ config.beta_array)


def oracle_linear_pricing(config: EconomyConfig, p_grid=None, rounds: int = 2):
    """Scan (P - c) D(P) over a price grid, then refine twice around the best price.

    Returns ``(P_m, profit)``.
    """
    c = config.c
    if p_grid is None:
        p_grid = np.linspace(c, 100.0 * c, 2001)[1:]
    grid = np.asarray(p_grid, dtype=float)
    if np.any(grid <= c):
        raise ValueError("price grid must lie above c")
    n = len(grid)
    for r in range(rounds + 1):
        profit = _profits(config, grid)
        i = int(np.argmax(profit))
        if i in (0, n - 1):
            if r == 0:
                raise WidenGridError(f"profit maximiser {grid[i]} is on the price grid boundary")
            break
        if r < rounds:
            grid = np.linspace(grid[i - 1], grid[i + 1], n)
    return float(grid[i]), float(profit[i])


def oracle_perfect_discrimination(config: EconomyConfig, t_grid=None) -> ContractMenu:
    """Per-type scan of q - c T over payments with q = theta_k v(T).

    ``t_grid`` is an explicit array of candidate payments (scanned once) or a
    :class:`GridSpec` (scanned and refined).
    """
    kind = config.valuation
    if t_grid is None:
        t_grid = GridSpec(refinement_rounds=20)
    T_best = []
    for th in config.theta:
        if isinstance(t_grid, GridSpec):
            lo, hi = np.log(t_grid.t_min), np.log(t_grid.t_max)
            axis = np.linspace(lo, hi, t_grid.points_per_axis)
            for r in range(t_grid.refinement_rounds + 1):
                T = np.exp(axis)
                obj = th * valuation(kind, T) - config.c * T
                i = int(np.argmax(obj))
                if r == 0 and i in (0, len(axis) - 1):
                    raise WidenGridError(f"optimum for theta={th} is on the grid boundary")
                x = axis[i]
                axis = _refine(axis, x, lo, hi, t_grid.points_per_axis, t_grid.half_width_cells)
            T_best.append(float(np.exp(x)))
        else:
            T = np.asarray(t_grid, dtype=float)
            obj = th * valuation(kind, T) - config.c * T
            i = int(np.argmax(obj))
            if len(T) > 2 and i in (0, len(T) - 1):
                raise WidenGridError(f"optimum for theta={th} is on the grid boundary")
            T_best.append(float(T[i]))
    T = np.array(T_best)
    return ContractMenu.from_arrays(
        Mechanism.PERFECT_DISCRIMINATION, T, config.theta_array * valuation(kind, T)
    )
