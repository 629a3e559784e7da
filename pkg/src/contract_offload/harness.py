"""Experiment runner: solve, verify, tabulate and write figure data.

Output files (UTF-8, LF, one header line, floats with 17 significant digits):

=====================  ========================================================
contract_menus.csv     ``k,theta,T_<m>...,q_<m>...``
selection_payoffs.csv  ``k,theta,bundle_1..bundle_K``: type k's payoff at every
                       bundle of the anti-adverse-selection menu
payoffs_bs.csv         ``k,theta,bs_payoff_<m>...``
payoffs_ap.csv         ``k,theta,ap_payoff_<m>...``
welfare.csv            ``k,theta,welfare_<m>...``
sweep.csv              ``K,bs_payoff_<m>...,ap_payoff_<m>...,welfare_<m>...``
=====================  ========================================================

``<m>`` runs over the solved mechanisms in the order ``pd, aas, lp``.
"""

from __future__ import annotations

import csv
import io
import logging
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import solvers
from .economy import MECHANISM_ORDER, EconomyConfig, Mechanism, ValuationKind
from .exceptions import InfeasibleMenuError
from .verifier import ExperimentResult, payoff_table, verify_menu

log = logging.getLogger(__name__)

OUT_ENV = "CONTRACT_OFFLOAD_OUT"
DEFAULT_OUTPUT_DIR = "figures"
DEFAULT_SWEEP = tuple(range(2, 21))


@dataclass(frozen=True)
class ExperimentConfig:
    """What to solve and where to write it.

    With a sweep, each K in ``sweep_K`` gets ``theta_k = k + theta_offset``
    and ``beta_k = 1/K``, keeping ``c`` and the valuation of ``economy``.
    """

    economy: EconomyConfig = field(default_factory=EconomyConfig.default)
    mechanisms: tuple[Mechanism, ...] = MECHANISM_ORDER
    sweep_K: tuple[int, ...] | None = None
    output_dir: Path = Path(DEFAULT_OUTPUT_DIR)
    emit_oracle_checks: bool = False
    theta_offset: float = 0.0

    def __post_init__(self):
        mechs = tuple(Mechanism(m) for m in self.mechanisms)
        if not mechs:
            raise ValueError("at least one mechanism is required")
        object.__setattr__(self, "mechanisms", tuple(m for m in MECHANISM_ORDER if m in mechs))
        if self.sweep_K is not None:
            ks = tuple(int(k) for k in self.sweep_K)
            if not ks or min(ks) < 1:
                raise ValueError("sweep K values must be >= 1")
            object.__setattr__(self, "sweep_K", ks)
        object.__setattr__(self, "output_dir", Path(self.output_dir))


def solve_and_verify(config: EconomyConfig, mechanisms):
    """Solve each mechanism and check it; returns ``(menus, reports)``.

    The full-information menu only has to satisfy participation: its types
    are observed, so incentive compatibility does not apply.
    """
    menus, reports = [], {}
    for mech in mechanisms:
        menu = solvers.solve(config, mech)
        report = verify_menu(menu, config)
        ok = report.ir_feasible if mech is Mechanism.PERFECT_DISCRIMINATION else report.feasible
        if not ok:
            raise InfeasibleMenuError(
                mech, report,
                f"{mech.label} menu failed verification: " + "; ".join(report.violations()[:5]),
            )
        menus.append(menu)
        reports[mech] = report
    return menus, reports


def sweep_economy(base: EconomyConfig, K: int, theta_offset=0.0) -> EconomyConfig:
    return EconomyConfig.default(K, base.c, base.valuation, theta_offset)


def run_sweep(base: EconomyConfig, K_values, mechanisms, theta_offset=0.0):
    rows = []
    for K in K_values:
        econ = sweep_economy(base, K, theta_offset)
        menus, _ = solve_and_verify(econ, mechanisms)
        table = payoff_table(menus, econ)
        row = {"K": K}
        for mech in table.mechanisms:
            for key, val in table.aggregates[mech].items():
                row[f"{key}_{mech.value}"] = val
        rows.append(row)
    return rows


def run_experiment(cfg: ExperimentConfig, write=True) -> ExperimentResult:
    menus, reports = solve_and_verify(cfg.economy, cfg.mechanisms)
    result = payoff_table(menus, cfg.economy)
    result.reports = reports
    if cfg.sweep_K is not None:
        result.sweep_rows = run_sweep(cfg.economy, cfg.sweep_K, cfg.mechanisms, cfg.theta_offset)
    if write:
        emit_figure_data(result, cfg.output_dir)
    return result


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _table(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def write_atomic(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def figure_tables(result: ExperimentResult) -> dict[str, str]:
    """CSV text of every figure table, keyed by file name."""
    mechs = [m.value for m in result.mechanisms]
    ks = np.arange(1, result.K + 1)
    per_type = lambda arrays: [arrays[m] for m in result.mechanisms]  # noqa: E731

    def columns(*cols):
        return list(zip(ks, result.theta, *cols))

    tables = {
        "contract_menus.csv": _table(
            ["k", "theta"] + [f"T_{m}" for m in mechs] + [f"q_{m}" for m in mechs],
            columns(*per_type(result.T), *per_type(result.q)),
        ),
        "payoffs_bs.csv": _table(
            ["k", "theta"] + [f"bs_payoff_{m}" for m in mechs], columns(*per_type(result.U))
        ),
        "payoffs_ap.csv": _table(
            ["k", "theta"] + [f"ap_payoff_{m}" for m in mechs], columns(*per_type(result.V))
        ),
        "welfare.csv": _table(
            ["k", "theta"] + [f"welfare_{m}" for m in mechs], columns(*per_type(result.W))
        ),
    }
    if result.selection_payoffs is not None:
        tables["selection_payoffs.csv"] = _table(
            ["k", "theta"] + [f"bundle_{l}" for l in ks],
            [(k, th, *row) for k, th, row in zip(ks, result.theta, result.selection_payoffs)],
        )
    if result.sweep_rows is not None:
        tables["sweep.csv"] = sweep_csv(result.sweep_rows, result.mechanisms)
    return tables


def sweep_csv(rows, mechanisms) -> str:
    mechs = [Mechanism(m).value for m in mechanisms]
    keys = ["K"] + [f"{a}_{m}" for a in ("bs_payoff", "ap_payoff", "welfare") for m in mechs]
    return _table(keys, [[r[k] for k in keys] for r in rows])


def emit_figure_data(result: ExperimentResult, output_dir) -> list[Path]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in sorted(figure_tables(result).items()):
        path = out / name
        write_atomic(path, text)
        written.append(path)
    log.info("wrote %d files to %s", len(written), out)
    return written


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""
    hard: bool = True


def _ordered(a, b, tol):
    return bool(np.all(a >= b - tol))


def ordering_checks(result: ExperimentResult, tol=1e-9) -> list[Check]:
    """Cross-mechanism orderings expected of a regular instance.

    Only mechanisms present in ``result`` are compared.  The high-type
    crossover (some type earning more rent under screening than under linear
    pricing) is reported with ``hard=False``.
    """
    PD, AAS, LP = (Mechanism.PERFECT_DISCRIMINATION, Mechanism.ANTI_ADVERSE_SELECTION,
                   Mechanism.LINEAR_PRICING)
    have = set(result.mechanisms)
    checks = []
    scale = lambda *xs: tol * max(1.0, *(float(np.abs(x).max()) for x in xs))  # noqa: E731

    for label, arrays in (("T", result.T), ("q", result.q), ("bs_payoff", result.U),
                          ("welfare", result.W)):
        for hi, lo in ((PD, AAS), (AAS, LP), (PD, LP)):
            if hi in have and lo in have:
                ok = _ordered(arrays[hi], arrays[lo], scale(arrays[hi], arrays[lo]))
                checks.append(Check(f"{label}: {hi.value} >= {lo.value} per type", ok))
    if PD in have:
        V = result.V[PD]
        checks.append(Check("ap_payoff: pd identically zero", bool(np.all(np.abs(V) <= scale(result.q[PD])))))
    if AAS in have:
        V = result.V[AAS]
        t = scale(result.q[AAS])
        checks.append(Check("ap_payoff: aas V(1) = 0", bool(abs(V[0]) <= t)))
        checks.append(Check("ap_payoff: aas strictly increasing", bool(np.all(np.diff(V) > 0))))
    if PD in have and AAS in have:
        # the top type keeps its information rent, so only payment and welfare coincide
        dT = abs(result.T[PD][-1] - result.T[AAS][-1])
        dW = abs(result.W[PD][-1] - result.W[AAS][-1])
        checks.append(Check(
            "top type: aas payment and welfare equal pd (no distortion at the top)",
            dT <= tol * max(1.0, result.T[PD][-1]) and dW <= tol * max(1.0, abs(result.W[PD][-1])),
            f"|dT|={dT:.3g} |dW|={dW:.3g}",
        ))
    if AAS in have and LP in have:
        above = np.flatnonzero(result.V[AAS] > result.V[LP]) + 1
        checks.append(Check(
            "crossover: some type earns more rent under aas than lp",
            above.size > 0,
            f"types {above.tolist()}" if above.size else "none",
            hard=False,
        ))
    if result.sweep_rows:
        checks.extend(sweep_checks(result.sweep_rows, result.mechanisms, tol))
    return checks


def sweep_checks(rows, mechanisms, tol=1e-9) -> list[Check]:
    """Welfare nondecreasing in K per mechanism, and pd >= aas >= lp at every K."""
    have = [Mechanism(m) for m in mechanisms]
    checks = []
    for mech in have:
        w = np.array([r[f"welfare_{mech.value}"] for r in rows])
        ok = bool(np.all(np.diff(w) >= -tol * max(1.0, float(np.abs(w).max()))))
        checks.append(Check(f"sweep: welfare_{mech.value} nondecreasing in K", ok))
    order = [m for m in MECHANISM_ORDER if m in have]
    for hi, lo in zip(order, order[1:]):
        ok = all(r[f"welfare_{hi.value}"] >= r[f"welfare_{lo.value}"]
                 - tol * max(1.0, abs(r[f"welfare_{hi.value}"])) for r in rows)
        checks.append(Check(f"sweep: welfare {hi.value} >= {lo.value} at every K", ok))
    return checks


_LIST_KEYS = {"theta", "beta", "mechanisms", "sweep_K"}


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment, lists use commas."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = key.strip(), value.strip()
        if key in _LIST_KEYS:
            out[key] = [v.strip() for v in value.split(",") if v.strip()]
        else:
            out[key] = value
    return out


_KNOWN_KEYS = {"K", "theta", "beta", "c", "valuation", "mechanisms", "sweep_K", "output_dir",
               "emit_oracle_checks", "theta_offset"}


def build_experiment_config(settings: dict) -> ExperimentConfig:
    """ExperimentConfig from parsed settings (config file merged with CLI overrides).

    Missing theta defaults to ``k + theta_offset``; missing beta to uniform.
    """
    unknown = set(settings) - _KNOWN_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    offset = float(settings.get("theta_offset", 0.0))
    theta = settings.get("theta")
    theta = [float(t) for t in theta] if theta is not None else None
    K = int(settings["K"]) if settings.get("K") is not None else (len(theta) if theta else 20)
    if theta is None:
        theta = [k + offset for k in range(1, K + 1)]
    if len(theta) != K:
        raise ValueError(f"K={K} but theta has {len(theta)} entries")
    beta = settings.get("beta")
    beta = [float(b) for b in beta] if beta is not None else [1.0 / K] * K
    valuation = settings.get("valuation", "sqrt")
    if not isinstance(valuation, ValuationKind):
        valuation = ValuationKind.parse(str(valuation))
    economy = EconomyConfig(tuple(theta), tuple(beta), float(settings.get("c", 0.01)), valuation)
    mechs = settings.get("mechanisms") or [m.value for m in MECHANISM_ORDER]
    sweep = settings.get("sweep_K")
    flag = str(settings.get("emit_oracle_checks", "false")).lower() in ("1", "true", "yes", "on")
    out = settings.get("output_dir") or DEFAULT_OUTPUT_DIR
    return ExperimentConfig(
        economy=economy,
        mechanisms=tuple(Mechanism(m) for m in mechs),
        sweep_K=tuple(int(k) for k in sweep) if sweep else None,
        output_dir=Path(os.environ.get(OUT_ENV) or out),
        emit_oracle_checks=flag,
        theta_offset=offset,
    )


def load_config(path) -> ExperimentConfig:
    return build_experiment_config(parse_config_text(Path(path).read_text(encoding="utf-8")))


def default_setup(**overrides) -> ExperimentConfig:
    """Default experiment: K=20, theta_k=k, uniform beta, c=0.01, sqrt."""
    cfg = ExperimentConfig(sweep_K=DEFAULT_SWEEP,
                           output_dir=Path(os.environ.get(OUT_ENV) or DEFAULT_OUTPUT_DIR))
    return replace(cfg, **overrides)


def menu_to_csv(menu) -> str:
    """Menu interchange format: a ``# mechanism: <m>`` comment, then ``k,T,q`` rows."""
    head = f"# mechanism: {menu.mechanism.value}\n"
    return head + _table(["k", "T", "q"], [(k, b.T, b.q) for k, b in enumerate(menu.bundles, 1)])


def read_menu_csv(path):
    """Returns ``(mechanism or None, T, q)``; rows must be ordered k = 1..K."""
    mechanism = None
    lines = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            if key.strip() == "mechanism" and value.strip():
                mechanism = Mechanism(value.strip())
            continue
        if line.strip():
            lines.append(line)
    rows = list(csv.DictReader(lines))
    if not rows or set(rows[0]) != {"k", "T", "q"}:
        raise ValueError(f"{path}: expected columns k,T,q")
    ks = [int(r["k"]) for r in rows]
    if ks != list(range(1, len(rows) + 1)):
        raise ValueError(f"{path}: k must run 1..K in order")
    T = np.array([float(r["T"]) for r in rows])
    q = np.array([float(r["q"]) for r in rows])
    return mechanism, T, q
