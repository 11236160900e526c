"""Command-line front end.

    owska derive     --config run.json [--json]
    owska run        --config run.json [--seed N] [--tamper STRATEGY] [--json]
    owska experiment --config run.json [--seed N] [--out DIR]
    owska entropy    --config run.json [--json]
    owska selftest

Exit codes: 0 ok, 1 some verdict FAIL, 2 infeasible parameters, 3 config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import adversary as adv
from .config import ConfigError, RunConfig, load_config
from .hashes import hex_field
from .protocol import InfeasibleParams, ProtocolParams, alice, bob, derive_params
from .source import BudgetExceeded, entropy_report, sample_iid, vec_to_int

EXIT_OK, EXIT_FAIL, EXIT_INFEASIBLE, EXIT_CONFIG = 0, 1, 2, 3


def _dump(obj) -> str:
    return json.dumps(adv._jsonable(obj), sort_keys=True, indent=2)


def _derive(cfg: RunConfig, seed: int) -> ProtocolParams:
    return derive_params(cfg.spec, cfg.n, cfg.eps, cfg.sigma, cfg.delta, mode=cfg.mode,
                         nu=cfg.nu, t=cfg.t, rng=np.random.default_rng(adv.child_seed(seed, 0)),
                         field_overrides=cfg.fields)


def _params_text(d: dict) -> str:
    keys = ["n", "t", "l", "nu", "r", "eps", "sigma", "delta", "nu_source", "t_source",
            "robustness_bound", "fuzzy_term"]
    lines = [f"  {k:17s} {d[k]}" for k in keys if k in d]
    lines += [f"  note: {note}" for note in d.get("notes", [])]
    return "\n".join(lines)


def cmd_derive(cfg: RunConfig, args) -> int:
    try:
        params = _derive(cfg, args.seed)
    except InfeasibleParams as e:
        block = {"feasible": False, "violations": e.violations, "params": e.partial}
        if args.json:
            print(_dump(block))
        else:
            print("INFEASIBLE")
            print(_params_text(e.partial))
            for v in e.violations:
                print(f"  violated: {v}")
        return EXIT_INFEASIBLE
    block = {"feasible": True, "params": params.to_dict()}
    if args.json:
        print(_dump(block))
    else:
        print("FEASIBLE")
        print(_params_text(params.to_dict()))
    return EXIT_OK


def _symbols_hex(vec, base: int) -> str | list[int]:
    vec = [int(v) for v in vec]
    return hex_field(vec_to_int(vec), len(vec)) if base == 2 else vec


def cmd_run(cfg: RunConfig, args) -> int:
    try:
        params = _derive(cfg, args.seed)
    except InfeasibleParams as e:
        print(_dump({"feasible": False, "violations": e.violations}))
        return EXIT_INFEASIBLE
    root = adv.child_seed(args.seed, 1)
    rng = np.random.default_rng(root)
    s = sample_iid(cfg.spec, params.n, rng)
    key_a, msg = alice(s.x, params, rng)
    transcript = {
        "params": params.to_dict(),
        "x": _symbols_hex(s.x, cfg.spec.shape[0]),
        "y": _symbols_hex(s.y, cfg.spec.shape[1]),
        "z": _symbols_hex(s.z, cfg.spec.shape[2]),
        "message": msg.to_dict(),
        "key_alice": hex_field(key_a, params.l),
    }
    delivered = msg
    if args.tamper:
        strategy = adv.make_strategy(args.tamper, cfg.spec, params)
        delivered = strategy.forge(s.z, msg, np.random.default_rng(adv.child_seed(root, 1)))
        transcript["tamper"] = {"strategy": args.tamper, "forged": delivered.to_dict()}
    out = bob(s.y, delivered, params, cfg.spec)
    transcript["key_bob"] = None if out.key is None else hex_field(out.key, params.l)
    transcript["bob"] = {"diagnostic": out.diagnostic, "candidates_tested": out.candidates_tested,
                         "matches_found": out.matches_found}
    if out.key is None:
        transcript["outcome"] = "rejected"
    else:
        transcript["outcome"] = "agreed" if out.key == key_a else "mismatch"
    print(_dump(transcript))
    return EXIT_OK


def _run_experiment(i: int, exp, cfg: RunConfig, params: ProtocolParams, seed: int) -> adv.ExperimentReport:
    ss = adv.child_seed(seed, 2, i)
    spec = cfg.spec
    kw = {"budget": exp.budget} if exp.budget else {}
    try:
        if exp.kind == "reliability":
            return adv.reliability_experiment(spec, params, exp.trials, ss)
        if exp.kind == "secrecy":
            return adv.secrecy_distance(spec, params, exp.trials, ss, **kw)
        if exp.kind == "impersonation":
            return adv.impersonation_oracle(spec, params, **kw)
        if exp.kind == "substitution":
            return adv.substitution_oracle(spec, params, observed=exp.observed, seed=ss, **kw)
        strategy = adv.make_strategy(exp.strategy, spec, params)
        return adv.robustness_experiment(spec, params, strategy, exp.trials, ss)
    except BudgetExceeded as e:
        name = exp.kind if exp.kind != "robustness" else f"robustness/{exp.strategy}"
        return adv.ExperimentReport.skipped(name, str(e), params.to_dict())


def write_reports(reports: list[adv.ExperimentReport], jsonl: Path, csv_path: Path) -> None:
    jsonl.parent.mkdir(parents=True, exist_ok=True)
    with open(jsonl, "w") as fh:
        for rep in reports:
            fh.write(rep.to_json() + "\n")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(adv.CSV_FIELDS)
        for rep in reports:
            d = rep.to_dict()
            w.writerow(["" if d[k] is None else repr(d[k]) if isinstance(d[k], float) else d[k]
                        for k in adv.CSV_FIELDS])


def cmd_experiment(cfg: RunConfig, args) -> int:
    try:
        params = _derive(cfg, args.seed)
    except InfeasibleParams as e:
        print(_dump({"feasible": False, "violations": e.violations}))
        return EXIT_INFEASIBLE
    try:
        reports = [_run_experiment(i, exp, cfg, params, args.seed) for i, exp in enumerate(cfg.experiments)]
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else Path(".")
    write_reports(reports, out / cfg.jsonl, out / cfg.csv)
    for rep in reports:
        bound = "-" if rep.bound is None else f"{rep.bound:.4g}"
        print(f"{rep.name:32s} {rep.verdict:14s} estimate={rep.estimate:.6g} "
              f"ci=[{rep.ci_low:.4g}, {rep.ci_high:.4g}] bound={bound}")
    return EXIT_FAIL if any(r.verdict == adv.FAIL for r in reports) else EXIT_OK


def cmd_entropy(cfg: RunConfig, args) -> int:
    report = entropy_report(cfg.spec, cfg.n, cfg.nu)
    if args.json:
        print(_dump(report))
    else:
        for k, v in report.items():
            print(f"{k:24s} {v}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_all

    results = run_all()
    for name, ok in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK if all(ok for _, ok in results) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="owska", description="One-way secret key agreement toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("derive", "run", "experiment", "entropy"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--seed", type=int, default=None, help="override the config's master seed")
        sp.add_argument("--json", action="store_true")
        if name == "run":
            sp.add_argument("--tamper", default=None, choices=adv.STRATEGY_NAMES)
        if name == "experiment":
            sp.add_argument("--out", default=None, help="directory for report files")
    sub.add_parser("selftest")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return cmd_selftest(args)
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is None:
        args.seed = cfg.seed
    handlers = {"derive": cmd_derive, "run": cmd_run, "experiment": cmd_experiment, "entropy": cmd_entropy}
    try:
        return handlers[args.command](cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
