"""Command line entry point ``contract-offload``.

Exit status: 0 on success, 1 when a menu is infeasible or an instance is
nonregular (or a reproduction check fails), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import oracle, solvers
from .economy import ContractMenu, EconomyConfig, Mechanism
from .exceptions import ContractError, NonregularInstanceError
from .harness import (
    DEFAULT_SWEEP,
    build_experiment_config,
    menu_to_csv,
    ordering_checks,
    parse_config_text,
    read_menu_csv,
    run_experiment,
    run_sweep,
    sweep_checks,
    sweep_csv,
    write_atomic,
)
from .verifier import ExperimentResult, verify_menu

log = logging.getLogger("contract_offload")


class UsageError(Exception):
    pass


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value config file")
    common.add_argument("--valuation", help="sqrt, log1p or power:<alpha> (default sqrt)")
    common.add_argument("--c", type=float, help="BS cost per unit of payment (default 0.01)")
    common.add_argument("--K", type=int, help="number of types (default 20)")
    common.add_argument("--theta", type=_csv_list, help="comma-separated type values")
    common.add_argument("--beta", type=_csv_list, help="comma-separated type probabilities")
    common.add_argument("--theta-offset", type=float,
                        help="generated types are theta_k = k + offset (default 0)")
    common.add_argument("--mechanisms", type=_csv_list, help="subset of pd,aas,lp")
    common.add_argument("--output-dir", type=Path,
                        help="where CSV files go (env CONTRACT_OFFLOAD_OUT, default ./figures)")
    common.add_argument("--with-oracle", action="store_true",
                        help="cross-check solvers against the grid oracles")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="contract-offload",
        description="Contract menus for traffic offloading under hidden AP types.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="solve and print the menus")
    p.add_argument("--menu-dir", type=Path, help="also write menu_<m>.csv files here")
    p = sub.add_parser("verify", parents=[common], help="check a k,T,q menu file")
    p.add_argument("--menu", type=Path, required=True)
    p.add_argument("--mechanism", choices=[m.value for m in Mechanism],
                   help="constraints to require (default: from the file, else IR and IC)")
    p.add_argument("--report", type=Path, help="write the per-type report CSV here")
    p = sub.add_parser("sweep", parents=[common], help="aggregates over the number of types")
    p.add_argument("--K-values", type=_csv_list, help="default 2..20")
    p = sub.add_parser("reproduce-figures", parents=[common],
                       help="write all figure tables for the simulation setup")
    p.add_argument("--K-values", type=_csv_list, help="sweep K values, default 2..20")
    sub.add_parser("oracle-check", parents=[common], help="compare solvers with grid oracles")
    return parser


def _settings(args) -> dict:
    settings = {}
    if args.config is not None:
        try:
            settings = parse_config_text(args.config.read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
    if args.K is not None and args.theta is None:
        settings.pop("theta", None)
        settings.pop("beta", None)
    overrides = {
        "valuation": args.valuation, "c": args.c, "K": args.K, "theta": args.theta,
        "beta": args.beta, "theta_offset": args.theta_offset, "mechanisms": args.mechanisms,
    }
    if args.theta is not None and args.beta is None and args.K is None:
        settings.pop("beta", None)
        settings.pop("K", None)
    settings.update({k: v for k, v in overrides.items() if v is not None})
    if getattr(args, "K_values", None):
        settings["sweep_K"] = args.K_values
    if args.with_oracle:
        settings["emit_oracle_checks"] = "true"
    return settings


def _experiment(args, **extra):
    settings = _settings(args)
    settings.update(extra)
    try:
        cfg = build_experiment_config(settings)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    if args.output_dir is not None:
        cfg = replace(cfg, output_dir=args.output_dir)
    return cfg


def _print_result(result: ExperimentResult, out):
    for mech in result.mechanisms:
        print(f"[{mech.label}]", file=out)
        if mech is Mechanism.LINEAR_PRICING and result.price_per_unit is not None:
            print(f"  price per unit {result.price_per_unit:.10g}", file=out)
        print(f"  {'k':>3} {'theta':>10} {'T':>14} {'q':>14} {'V':>14} {'U':>14}", file=out)
        for k in range(result.K):
            print(f"  {k + 1:>3} {result.theta[k]:>10.6g} {result.T[mech][k]:>14.8g} "
                  f"{result.q[mech][k]:>14.8g} {result.V[mech][k]:>14.8g} "
                  f"{result.U[mech][k]:>14.8g}", file=out)
        agg = result.aggregates[mech]
        print(f"  expected BS payoff {agg['bs_payoff']:.10g}  AP payoff {agg['ap_payoff']:.10g}"
              f"  welfare {agg['welfare']:.10g}", file=out)


def _oracle_lines(config: EconomyConfig, mechanisms):
    """(description, passed) pairs comparing each solver with its oracle."""
    lines = []
    if Mechanism.PERFECT_DISCRIMINATION in mechanisms:
        menu = solvers.solve_perfect_discrimination(config)
        ref = oracle.oracle_perfect_discrimination(config)
        err = float(np.max(np.abs(ref.T - menu.T) / menu.T))
        lines.append((f"pd payments vs grid scan: max rel diff {err:.2e}", err <= 1e-4))
    if Mechanism.LINEAR_PRICING in mechanisms:
        sol = solvers.solve_linear_pricing(config)
        p_hi = min(100.0 * config.c, config.theta[0] * config.valuation.marginal_sup * 0.999)
        P, _ = oracle.oracle_linear_pricing(config, np.linspace(config.c, p_hi, 2001)[1:])
        err = abs(P - sol.price_per_unit) / sol.price_per_unit
        lines.append((f"lp price {sol.price_per_unit:.8g} vs scan {P:.8g}: rel diff {err:.2e}",
                      err <= 1e-5))
    if Mechanism.ANTI_ADVERSE_SELECTION in mechanisms and config.K <= 3:
        menu = solvers.solve_anti_adverse_selection(config)
        obj = float(np.dot(config.beta_array, menu.q - config.c * menu.T))
        for mode in ("binding", "full"):
            ref = oracle.oracle_anti_adverse_selection(config, mode=mode)
            rel = (obj - ref.objective) / abs(obj)
            lines.append((f"aas objective {obj:.8g} vs {mode} grid {ref.objective:.8g}: "
                          f"rel gap {rel:.2e}", rel >= -1e-9 and rel <= 5e-3))
    elif Mechanism.ANTI_ADVERSE_SELECTION in mechanisms:
        lines.append(("aas grid oracle skipped (K > 3)", True))
    return lines


def _cmd_solve(args, out):
    cfg = _experiment(args)
    result = run_experiment(cfg, write=False)
    _print_result(result, out)
    if args.menu_dir is not None:
        args.menu_dir.mkdir(parents=True, exist_ok=True)
        for mech in result.mechanisms:
            menu = ContractMenu.from_arrays(mech, result.T[mech], result.q[mech])
            (args.menu_dir / f"menu_{mech.value}.csv").write_text(menu_to_csv(menu), encoding="utf-8")
    if cfg.emit_oracle_checks:
        return _report_oracle(cfg.economy, cfg.mechanisms, out)
    return 0


def _cmd_verify(args, out):
    try:
        mechanism, T, q = read_menu_csv(args.menu)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    settings = _settings(args)
    if "theta" not in settings and "K" not in settings:
        settings["K"] = len(T)
    try:
        cfg = build_experiment_config(settings)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    if cfg.economy.K != len(T):
        raise UsageError(f"menu has {len(T)} rows but the economy has {cfg.economy.K} types")
    if args.mechanism:
        mechanism = Mechanism(args.mechanism)
    menu = ContractMenu.from_arrays(mechanism or Mechanism.ANTI_ADVERSE_SELECTION, T, q)
    report = verify_menu(menu, cfg.economy)
    print(report.summary(), file=out)
    if args.report is not None:
        args.report.write_text(report.to_csv(), encoding="utf-8")
    # observed types make incentive compatibility moot for the full-information menu
    ok = report.ir_feasible if mechanism is Mechanism.PERFECT_DISCRIMINATION else report.feasible
    print("OK" if ok else "INFEASIBLE", file=out)
    return 0 if ok else 1


def _cmd_sweep(args, out):
    cfg = _experiment(args)
    ks = cfg.sweep_K or DEFAULT_SWEEP
    rows = run_sweep(cfg.economy, ks, cfg.mechanisms, cfg.theta_offset)
    text = sweep_csv(rows, cfg.mechanisms)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    write_atomic(cfg.output_dir / "sweep.csv", text)
    print(text, end="", file=out)
    failed = [c for c in sweep_checks(rows, cfg.mechanisms) if not c.passed]
    for c in failed:
        print(f"FAIL {c.name}", file=out)
    return 1 if failed else 0


def _cmd_reproduce(args, out):
    cfg = _experiment(args)
    if cfg.sweep_K is None:
        cfg = replace(cfg, sweep_K=DEFAULT_SWEEP)
    result = run_experiment(cfg)
    print(f"wrote figure tables to {cfg.output_dir}", file=out)
    status = 0
    for rep_mech, rep in result.reports.items():
        if rep_mech is Mechanism.ANTI_ADVERSE_SELECTION and not rep.self_revealing:
            print("FAIL aas menu is not self revealing", file=out)
            status = 1
    for check in ordering_checks(result):
        tag = "PASS" if check.passed else ("FAIL" if check.hard else "NOTE")
        detail = f" ({check.detail})" if check.detail else ""
        print(f"{tag} {check.name}{detail}", file=out)
        if check.hard and not check.passed:
            status = 1
    if cfg.emit_oracle_checks:
        status = max(status, _report_oracle(cfg.economy, cfg.mechanisms, out))
    return status


def _report_oracle(config, mechanisms, out):
    status = 0
    for text, ok in _oracle_lines(config, mechanisms):
        print(f"{'PASS' if ok else 'FAIL'} oracle: {text}", file=out)
        status |= not ok
    return int(status)


def _cmd_oracle(args, out):
    cfg = _experiment(args)
    return _report_oracle(cfg.economy, cfg.mechanisms, out)


COMMANDS = {
    "solve": _cmd_solve,
    "verify": _cmd_verify,
    "sweep": _cmd_sweep,
    "reproduce-figures": _cmd_reproduce,
    "oracle-check": _cmd_oracle,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"contract-offload: error: {exc}", file=sys.stderr)
        return 2
    except NonregularInstanceError as exc:
        print(f"contract-offload: {exc}", file=sys.stderr)
        return 1
    except ContractError as exc:
        print(f"contract-offload: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
