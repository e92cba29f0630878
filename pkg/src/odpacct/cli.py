"""Command-line entry point: ``odp <command> ...``.

Exit codes: 0 success, 1 computation-domain error, 2 usage or parse error.
Every file written via ``--out`` gets a ``<out>.manifest.json`` next to it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from . import __version__
from .erm import noise_percentile
from .iterative import (
    REFERENCE_CUTOFFS,
    OptDeltaSpec,
    cutoff_interpretation_note,
    min_iterations_for_advantage,
    nonopt_delta,
    opt_delta,
)
from .ledger import Budget, export_history, read_history, replay
from .mechanisms import SvtParams, sparse_release_noise_study, split_svt_budget
from .noise import NoiseSource
from .verify import verify_mechanism

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad input that is the caller's fault (exit 2)."""


def _default_seed() -> int:
    raw = os.environ.get("ODP_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"ODP_SEED must be an integer, got {raw!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _emit(args, text: str, parameters: dict, seed: int | None) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.write_text(text)
    manifest = {
        "command": args.command,
        "parameters": parameters,
        "seed": seed,
        "artifact_version": __version__,
        "output_path": str(out),
    }
    Path(str(out) + ".manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- commands ------------------------------------------------------------------


def cmd_svt_noise(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    eps1, eps2 = split_svt_budget(args.eps * args.svt_share, args.c)
    eps3 = args.eps * (1.0 - args.svt_share)
    params = SvtParams(eps1, eps2, args.c, args.sensitivity)
    counts = range(0, min(args.c, args.n_entries) + 1)
    rows = sparse_release_noise_study(
        args.n_entries, counts, params, eps3, args.trials, NoiseSource(seed),
        large_value=args.large_value, threshold=args.threshold, value_sensitivity=args.sensitivity,
    )
    text = _csv_text(
        ["n_large", "odp_expected_noise", "baseline_noise", "trials", "seed"],
        [[r.n_large, repr(r.odp_expected_noise), repr(r.baseline_noise), r.trials, seed] for r in rows],
    )
    params_out = {k: getattr(args, k) for k in ("n_entries", "c", "eps", "svt_share", "threshold",
                                                  "large_value", "sensitivity", "trials")}
    params_out.update(eps1=eps1, eps2=eps2, eps3=eps3)
    _emit(args, text, params_out, seed)
    return EXIT_OK


def cmd_erm_noise(args) -> int:
    rows = []
    for e2 in args.eps2_list:
        for n in args.n_list:
            v = noise_percentile(n, e2, args.lam, args.train_frac, args.pct, absolute=args.absolute)
            rows.append([n, repr(e2), repr(v)])
    text = _csv_text(["n", "eps2", "percentile"], rows)
    _emit(args, text, {"n_list": args.n_list, "eps2_list": args.eps2_list, "lambda": args.lam,
                       "train_frac": args.train_frac, "pct": args.pct, "absolute": args.absolute}, None)
    return EXIT_OK


def cmd_comp_cutoff(args) -> int:
    results = [min_iterations_for_advantage(args.eps, d) for d in args.deltas]
    text = _csv_text(["delta", "min_iterations"], [[repr(d), k] for d, k in zip(args.deltas, results)])
    note = cutoff_interpretation_note(args.eps, args.deltas, results)
    if note:
        print(note, file=sys.stderr)
    _emit(args, text, {"eps": args.eps, "deltas": args.deltas, "note": note}, None)
    return EXIT_OK


def _load_json(path: str):
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def cmd_optdelta(args) -> int:
    obj = _load_json(args.spec)
    if not isinstance(obj, dict):
        raise UsageError(f"{args.spec}: expected a JSON object with stops, eps, delta, eps_targets")
    try:
        spec = OptDeltaSpec.from_json_obj(obj)
    except ValueError as exc:
        raise UsageError(f"{args.spec}: {exc}") from None
    result = {
        "opt_delta": opt_delta(spec, args.max_depth),
        "nonopt_delta": nonopt_delta(spec, args.max_depth),
        "spec": spec.to_json_obj(),
    }
    _emit(args, json.dumps(result, indent=2) + "\n", {"spec": spec.to_json_obj(), "max_depth": args.max_depth}, None)
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    res = verify_mechanism(args.mechanism, args.trials, seed, args.eps, args.delta)
    obj = {"mechanism": args.mechanism, "seed": seed, **res.to_json_obj()}
    _emit(args, json.dumps(obj, indent=2) + "\n",
          {"mechanism": args.mechanism, "trials": args.trials, "eps": args.eps, "delta": args.delta}, seed)
    return EXIT_OK


def cmd_ledger_replay(args) -> int:
    try:
        with open(args.history) as fh:
            records = read_history(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {args.history}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"{args.history}: {exc}") from None
    state = replay(Budget(args.eps_total, args.delta_total), records)
    if args.export:
        with open(args.export, "w") as fh:
            export_history(state, fh)
    obj = {
        "records": len(state.history),
        "eps_remaining": state.eps_remaining,
        "delta_remaining": state.delta_remaining,
    }
    _emit(args, json.dumps(obj, indent=2) + "\n",
          {"history": args.history, "eps_total": args.eps_total, "delta_total": args.delta_total}, None)
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="odp", description="Output-specific privacy accounting tools.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seeded=False):
        sp.add_argument("--out", help="write here instead of stdout (a manifest goes next to it)")
        if seeded:
            sp.add_argument("--seed", type=int, default=None, help="random seed (default: $ODP_SEED or 0)")

    sp = sub.add_parser("svt-noise", help="expected per-entry noise of sparse-vector release, ODP vs baseline")
    common(sp, seeded=True)
    sp.add_argument("--n-entries", type=int, default=100)
    sp.add_argument("--c", type=int, default=20, help="maximum number of above-threshold answers")
    sp.add_argument("--eps", type=float, default=1.0, help="total budget for SVT plus release")
    sp.add_argument("--svt-share", type=float, default=0.5, help="fraction of --eps given to SVT")
    sp.add_argument("--threshold", type=float, default=500.0)
    sp.add_argument("--large-value", type=float, default=1000.0)
    sp.add_argument("--sensitivity", type=float, default=1.0)
    sp.add_argument("--trials", type=int, default=10_000)
    sp.set_defaults(func=cmd_svt_noise)

    sp = sub.add_parser("erm-noise", help="percentile of the noise added to the test error")
    common(sp)
    sp.add_argument("--n-list", type=_int_list, default=list(range(250, 2001, 250)))
    sp.add_argument("--eps2-list", type=_float_list, default=[0.05, 0.1, 0.2, 0.5, 1.0])
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--train-frac", type=float, default=0.7)
    sp.add_argument("--pct", type=float, default=0.95)
    sp.add_argument("--absolute", action="store_true", help="percentile of |r| instead of r")
    sp.set_defaults(func=cmd_erm_noise)

    sp = sub.add_parser("comp-cutoff", help="fewest eps-DP steps where optimal composition beats simple")
    common(sp)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--deltas", type=_float_list, default=list(REFERENCE_CUTOFFS))
    sp.set_defaults(func=cmd_comp_cutoff)

    sp = sub.add_parser("optdelta", help="optimal and prefix-wise delta for a stop schedule (JSON spec)")
    common(sp)
    sp.add_argument("--spec", required=True, help="JSON file with stops, eps, delta, eps_targets ('-' for stdin)")
    sp.add_argument("--max-depth", type=int, default=10)
    sp.set_defaults(func=cmd_optdelta)

    sp = sub.add_parser("verify", help="Monte-Carlo check of a reference mechanism's claimed guarantee")
    common(sp, seeded=True)
    sp.add_argument("--mechanism", required=True, choices=["toy", "laplace", "svt", "rr", "broken"])
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument("--eps", type=float, default=1.0)
    sp.add_argument("--delta", type=float, default=0.0)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("ledger", help="ledger utilities")
    lsub = sp.add_subparsers(dest="ledger_command", required=True)
    rp = lsub.add_parser("replay", help="replay an exported JSONL charge history")
    common(rp)
    rp.add_argument("--history", required=True)
    rp.add_argument("--eps-total", type=float, required=True)
    rp.add_argument("--delta-total", type=float, default=0.0)
    rp.add_argument("--export", help="write the replayed history back out as JSONL")
    rp.set_defaults(func=cmd_ledger_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"odp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, ArithmeticError) as exc:
        print(f"odp {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
