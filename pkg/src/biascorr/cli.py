"""Command-line front end.

Subcommands: ``synth``, ``train``, ``eval``, ``sweep`` and ``oracle-check``.
Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage or config
error. ``BIASCORR_SEED`` in the environment overrides the training seed.
"""
from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import BiasCorrError, ConfigurationError
from .experiments import (DEFAULT_CONFIG, SWEEP_COLUMNS, build_datasets, resolve_train_config,
                          run_sweep, validate_config)
from .oracle import run_equivalence_suite
from .sampling import make_scenario, sample_biased_trainset, sample_population
from .trainer import evaluate, train

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageFailure(Exception):
    """Raised for problems that map to exit code 2."""


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _invocation(argv) -> str:
    return "biascorr " + " ".join(shlex.quote(a) for a in argv)


def _load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise UsageFailure(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise UsageFailure(f"config file {path} is not valid JSON: {exc}")
    try:
        validate_config(cfg)
    except ConfigurationError as exc:
        raise UsageFailure(str(exc))
    return cfg


def _seed_override(cfg: dict) -> dict:
    env = os.environ.get("BIASCORR_SEED")
    if env is not None:
        try:
            cfg["train"]["seed"] = int(env)
        except ValueError:
            raise UsageFailure(f"BIASCORR_SEED must be an integer, got {env!r}")
    return cfg


def _out_dir(args, cfg: dict | None) -> Path:
    out = Path(args.out_dir or (cfg or {}).get("output_dir") or DEFAULT_CONFIG["output_dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


# -- synth -------------------------------------------------------------------

def cmd_synth(args, invocation: str) -> int:
    model = make_scenario(args.scenario, args.prevalence)
    if args.population:
        data = sample_population(model, args.n, args.seed)
    else:
        ptilde = np.asarray(args.ptilde, dtype=np.float64) if args.ptilde else model.true_marginal
        if ptilde.shape != (model.num_classes,):
            raise UsageFailure(f"--ptilde needs {model.num_classes} entries")
        if abs(ptilde.sum() - 1.0) > 1e-9:
            raise UsageFailure("--ptilde must sum to 1")
        data = sample_biased_trainset(model, ptilde / ptilde.sum(), args.n, args.seed)
    data.provenance["invocation"] = invocation
    out = Path(args.out)
    try:
        data.to_csv(out, header_comment=invocation)
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc.strerror}") from None
    counts = data.class_counts()
    print(f"wrote {out} ({len(data)} rows, class counts {counts.tolist()})")
    return EXIT_OK


# -- train / eval ------------------------------------------------------------

def _train_setup(args):
    cfg = _seed_override(_load_config(args.config))
    try:
        tcfg = resolve_train_config(cfg, loss=getattr(args, "loss", None))
    except (ConfigurationError, TypeError) as exc:
        raise UsageFailure(f"config field train: {exc}")
    tr, ev, _ = build_datasets(cfg, 0, tcfg.true_marginal)
    return cfg, tcfg, tr, ev


def cmd_train(args, invocation: str) -> int:
    cfg, tcfg, tr, ev = _train_setup(args)
    out = _out_dir(args, cfg)
    params, trace = train(tcfg, tr, ev)
    io.write_params_csv(out / "params.csv", params, invocation)
    io.write_text(out / "trace.jsonl", trace.to_jsonl())
    io.write_json(out / "report.json", {
        "provenance": invocation,
        "config": tcfg.to_dict(),
        "report": trace.final.report.to_dict(),
        "tracked_marginal": trace.final.tracked_marginal,
    })
    rep = trace.final.report
    print(f"trained {tcfg.loss} for {tcfg.steps} steps: acc={rep.acc:.4f} ba={rep.ba:.4f} "
          f"w_acc={rep.w_acc:.4f}; outputs in {out}")
    return EXIT_OK


def cmd_eval(args, invocation: str) -> int:
    cfg, tcfg, tr, ev = _train_setup(args)
    try:
        params = io.read_params_csv(args.params, tcfg.scorer)
    except FileNotFoundError:
        raise UsageFailure(f"params file not found: {args.params}")
    rep = evaluate(params, tcfg, ev, tcfg.true_marginal or tr.apparent_marginal)
    doc = {"provenance": invocation, "report": rep.to_dict()}
    if args.out:
        io.write_json(args.out, doc)
        print(f"wrote {args.out}")
    else:
        print(json.dumps(io.jsonable(doc), indent=2, sort_keys=True))
    return EXIT_OK


# -- sweep -------------------------------------------------------------------

def _tag(prevalence: float, loss: str, seed: int) -> str:
    return f"{loss}_prev{prevalence!r}_seed{seed}"


def cmd_sweep(args, invocation: str) -> int:
    cfg = _load_config(args.config) if args.config else json.loads(json.dumps(DEFAULT_CONFIG))
    cfg = _seed_override(cfg)
    prevalences = args.prevalences or cfg.get("eval", {}).get("prevalences")
    if not prevalences:
        raise UsageFailure("no prevalences given (use --prevalences or eval.prevalences)")
    if any(not 0.0 < p < 1.0 for p in prevalences):
        raise UsageFailure("prevalences must lie in (0, 1)")
    seeds = args.seed_list if args.seed_list else list(range(args.seeds))
    losses = args.losses.split(",")
    if any(l not in ("nll", "weighted", "bayes_ig") for l in losses):
        raise UsageFailure(f"unknown loss in {args.losses!r}")
    out = _out_dir(args, cfg)
    runs_dir = out / "runs"
    runs_dir.mkdir(exist_ok=True)

    results = run_sweep(cfg, prevalences, losses, seeds, args.jobs)
    for r in results:
        tag = _tag(r.prevalence, r.loss, r.seed)
        if r.roc:
            io.write_roc_csv(runs_dir / f"roc_{tag}.csv", r.roc, invocation)
        if r.histogram is not None:
            io.write_histogram_csv(runs_dir / f"hist_{tag}.csv", *r.histogram, invocation)
        io.write_json(runs_dir / f"report_{tag}.json", {
            "provenance": invocation, "prevalence": r.prevalence, "loss": r.loss, "seed": r.seed,
            "status": r.status, "report": r.report, "calibration_error": r.calibration_error,
            "tracked_marginal": r.tracked_marginal,
        })
    rows = [[row[c] for c in SWEEP_COLUMNS] for row in (r.row() for r in results)]
    io.write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows, invocation)
    failed = sum(r.status != "ok" for r in results)
    print(f"sweep: {len(results)} runs, {failed} failed; table at {out / 'sweep.csv'}")
    return EXIT_OK


# -- oracle-check ------------------------------------------------------------

def cmd_oracle_check(args, invocation: str) -> int:
    results, elapsed = run_equivalence_suite(args.instances, args.tol, args.seed)
    failures = [r for r in results if not r.passed]
    for r in failures:
        print(f"FAIL instance seed={r.seed}: max |surrogate - first-principles| = "
              f"{r.max_abs_diff:.3e} > tol {args.tol:g}")
    worst = max((r.max_abs_diff for r in results), default=0.0)
    print(f"oracle-check: {len(results) - len(failures)}/{len(results)} instances pass "
          f"at tol {args.tol:g} (worst diff {worst:.3e}, {elapsed:.2f}s)")
    if args.out:
        io.write_json(args.out, {
            "provenance": invocation, "tol": args.tol,
            "instances": [{"seed": r.seed, "max_abs_diff": r.max_abs_diff, "passed": r.passed}
                          for r in results],
        })
    return EXIT_OK if not failures else EXIT_RUNTIME


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="biascorr", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic dataset CSV")
    s.add_argument("--scenario", default="binary-overlap",
                   choices=["binary-overlap", "binary-separable", "ordinal5"])
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--ptilde", type=_floats, help="label quota of the training set")
    s.add_argument("--prevalence", type=float, help="true positive rate (binary scenarios)")
    s.add_argument("--population", action="store_true",
                   help="draw i.i.d. from the population instead of by label quota")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    for name, func, helptext in (("train", cmd_train, "train one model"),
                                 ("eval", cmd_eval, "evaluate saved parameters")):
        t = sub.add_parser(name, help=helptext)
        t.add_argument("--config", required=True)
        t.add_argument("--out-dir")
        if name == "train":
            t.add_argument("--loss", choices=["nll", "weighted", "bayes_ig"])
        else:
            t.add_argument("--params", required=True)
            t.add_argument("--loss", choices=["nll", "weighted", "bayes_ig"])
            t.add_argument("--out")
        t.set_defaults(func=func)

    w = sub.add_parser("sweep", help="prevalence x loss x seed sweep")
    w.add_argument("--config")
    w.add_argument("--prevalences", type=_floats)
    w.add_argument("--seeds", type=int, default=5, help="use seeds 0..N-1")
    w.add_argument("--seed-list", type=_ints)
    w.add_argument("--losses", default="weighted,bayes_ig")
    w.add_argument("--jobs", type=int)
    w.add_argument("--out-dir")
    w.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle-check", help="exact-enumeration posterior equivalence suite")
    o.add_argument("--instances", type=int, default=100)
    o.add_argument("--tol", type=float, default=1e-10)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle_check)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    invocation = _invocation(argv)
    try:
        return args.func(args, invocation)
    except UsageFailure as exc:
        print(f"biascorr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"biascorr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BiasCorrError, OSError) as exc:
        print(f"biascorr: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
