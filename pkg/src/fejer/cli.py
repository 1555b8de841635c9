"""Command-line entry point: ``fejer {run,certify,verify,estimate-modulus}``.

Tables and traces go to ``--out`` (or standard output); one-line summaries
go to standard error.  Exit status: 0 success, 1 audit failure, 2 usage or
parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import problems as P
from . import verify as V
from .config import ConfigError, RunConfig, load_problem
from .core import ETA
from .iterations import HorizonExceeded
from .moduli import estimate_modulus_empirical
from .rates import cauchy_modulus, dist_rate, finite_termination_index

EXIT_OK, EXIT_AUDIT, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _eps_list(text: str) -> tuple:
    try:
        vals = tuple(float(t) for t in text.replace(" ", "").split(",") if t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty eps list")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fejer", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, problem_required=True):
        p.add_argument("--problem", required=problem_required,
                       help="problem file (JSON) or the name of a catalog instance")
        p.add_argument("--format", dest="fmt", choices=("csv", "json"), default=None)
        p.add_argument("--out", help="output path (default: standard output)")
        p.add_argument("--eps", type=_eps_list, help="comma-separated eps grid")
        p.add_argument("--seed", type=int, default=0)

    run = sub.add_parser("run", help="iterate the instance recipe and write its trace")
    common(run)
    run.add_argument("--steps", type=int, help="number of steps (default: the recipe's)")

    cert = sub.add_parser("certify", help="tabulate certified indices")
    common(cert)

    ver = sub.add_parser("verify", help="audit certificates and invariants")
    common(ver, problem_required=False)
    ver.add_argument("--samples", type=int, default=V.DEFAULT_SAMPLES)
    ver.add_argument("--eta", type=float, default=ETA)
    ver.add_argument("--inject-fault", dest="fault", choices=V.FAULTS)

    est = sub.add_parser("estimate-modulus", help="sample an empirical modulus of regularity")
    common(est)
    est.add_argument("--samples", type=int, default=V.DEFAULT_SAMPLES)
    return ap


def _config(ns) -> RunConfig:
    default_fmt = "json" if ns.command == "verify" else "csv"
    return RunConfig(
        command=ns.command, problem=ns.problem, steps=getattr(ns, "steps", None),
        eps=tuple(ns.eps or ()), samples=getattr(ns, "samples", V.DEFAULT_SAMPLES), seed=ns.seed,
        eta=getattr(ns, "eta", ETA), fmt=ns.fmt or default_fmt, out=ns.out, fault=getattr(ns, "fault", None),
    )


def _problem(ref: str):
    path = Path(ref)
    if path.exists():
        return load_problem(path)
    if ref in P.DEFAULT_SPECS:
        return P.get_instance(ref)
    raise UsageError(f"no such problem file or catalog instance: {ref}")


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _table(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else [], lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None else format(v, ".17g") if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def cmd_run(cfg: RunConfig) -> int:
    prob = _problem(cfg.problem)
    tr = prob.run(cfg.steps)
    _emit(cfg, tr.to_csv() if cfg.fmt == "csv" else tr.to_json() + "\n")
    last = tr.length - 1
    print(f"{prob.name}: n={last} residual={tr.value('residual', last):.17g} dist={tr.value('dist', last):.17g}",
          file=sys.stderr)
    return EXIT_OK


def certificate_table(prob, eps_grid) -> list[dict]:
    if prob.rate is None:
        raise UsageError(f"{prob.name}: no rate bundled")
    if prob.modulus is None:
        raise UsageError(f"{prob.name}: no modulus bundled")
    d, c = dist_rate(prob.rate, prob.modulus), cauchy_modulus(prob.rate, prob.modulus)
    term = None
    if prob.eps_star is not None:
        term = finite_termination_index(prob.rate, prob.termination_modulus, prob.eps_star)
    return [{"eps": float(e), "dist_index": d(e), "cauchy_index": c(e), "termination_index": term}
            for e in eps_grid]


def cmd_certify(cfg: RunConfig) -> int:
    prob = _problem(cfg.problem)
    rows = certificate_table(prob, cfg.eps or V.DEFAULT_EPS)
    _emit(cfg, _table(rows, cfg.fmt))
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    eps = cfg.eps or V.DEFAULT_EPS
    kw = dict(seed=cfg.seed, eps_grid=eps, samples=cfg.samples, eta=cfg.eta, fault=cfg.fault)
    if cfg.problem is None:
        reps = V.run_full_audit(**kw)
    else:
        reps = V.run_full_audit([], instances=[_problem(cfg.problem)], **kw)
    if cfg.fmt == "json":
        text = json.dumps([r.to_dict() for r in reps], indent=1) + "\n"
    else:
        text = _table([{"check": r.name, "passed": r.passed, "worst_violation": float(r.worst_violation),
                        "eta": float(r.eta)} for r in reps], "csv")
    _emit(cfg, text)
    failed = [r for r in reps if not r.passed]
    for r in failed:
        print(r.line(), file=sys.stderr)
    print(f"{len(reps) - len(failed)}/{len(reps)} checks passed", file=sys.stderr)
    return EXIT_AUDIT if failed else EXIT_OK


def cmd_estimate_modulus(cfg: RunConfig) -> int:
    prob = _problem(cfg.problem)
    table = estimate_modulus_empirical(prob, prob.ball, cfg.eps or V.DEFAULT_EPS, cfg.samples, cfg.seed)
    rows = [{"eps": e, "delta_hat": v} for e, v in zip(table.eps, table.values)]
    _emit(cfg, _table(rows, cfg.fmt))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "certify": cmd_certify, "verify": cmd_verify, "estimate-modulus": cmd_estimate_modulus}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = _config(ns)
        return COMMANDS[cfg.command](cfg)
    except (UsageError, ConfigError, HorizonExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
