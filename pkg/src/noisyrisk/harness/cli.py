"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure
(including a run or matrix cell that failed during training).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

from ..datagen import PRESETS, DataError, NoiseSpec, generate_synthetic, ingest_csv, inject_symmetric_noise, write_csv
from . import reports, runner
from .config import ConfigError, load_config

log = logging.getLogger("noisyrisk")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; route it to our config/usage code instead
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    return [_u64(t.strip()) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="noisyrisk", description="Label-noise robustness vs clinical risk experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic train/val/test split as CSV files")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--config", help="take the [data] section from this config")
    g.add_argument("--preset", choices=sorted(PRESETS), default="derma")
    g.add_argument("--seed", type=_u64)

    n = sub.add_parser("inject-noise", help="flip labels of a training CSV with symmetric noise")
    n.add_argument("--in", dest="inp", required=True)
    n.add_argument("--out", required=True)
    n.add_argument("--rate", type=float, required=True)
    n.add_argument("--seed", type=_u64, default=0)
    n.add_argument("--label-column", default="label")

    r = sub.add_parser("run", help="train and evaluate a single config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True, help="JSONL file to write")
    r.add_argument("--seed", type=_u64, help="override the config seed")

    m = sub.add_parser("matrix", help="run methods x noise rates x seeds")
    m.add_argument("--config", required=True)
    m.add_argument("--out", required=True, help="JSONL file to write (timings go to a sidecar CSV)")
    m.add_argument("--parallel", type=int, default=1)
    m.add_argument("--methods", help="comma-separated labels, e.g. baseline,unicon+cs")
    m.add_argument("--noise-rates", type=_float_list)
    m.add_argument("--seeds", type=_int_list)

    rep = sub.add_parser("report", help="render tables and figures from a results file")
    rep.add_argument("--in", dest="inp", required=True)
    rep.add_argument("--kind", choices=("table", "tradeoff", "noise-impact"), default="table")
    rep.add_argument("--out", help="output directory for CSV/SVG files")
    rep.add_argument("--scenario", default="II", help="risk scenario for the trade-off plot")
    rep.add_argument("--method", help="restrict to one method (noise-impact)")
    return p


# -- subcommands ---------------------------------------------------------------


def _generate(args) -> int:
    if args.config:
        cfg, _ = load_config(args.config)
        if not hasattr(cfg.data, "n_train"):
            raise ConfigError("generate needs a synthetic [data] section")
        spec = cfg.data
    else:
        spec = PRESETS[args.preset]
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    try:
        spec.validate()
    except DataError as exc:
        raise ConfigError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for ds in generate_synthetic(spec):
        write_csv(ds, out / f"{ds.split_tag}.csv")
    print(f"wrote train/val/test CSV files to {out}")
    return EXIT_OK


def _inject(args) -> int:
    try:
        spec = NoiseSpec(args.rate, args.seed)
    except DataError as exc:
        raise ConfigError(str(exc)) from None
    ds = ingest_csv(args.inp, args.label_column)
    noisy = inject_symmetric_noise(ds, spec)
    write_csv(noisy, args.out, args.label_column)
    print(f"flipped {int(noisy.flip_mask.sum())} of {len(noisy)} labels -> {args.out}")
    return EXIT_OK


def _run(args) -> int:
    cfg, _ = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    result = runner.run_single(cfg)
    runner.persist([result], args.out)
    if not result.ok:
        print(f"run failed: {result.error}", file=sys.stderr)
        return EXIT_RUNTIME
    m = result.metrics
    print(
        f"{cfg.label} noise={cfg.noise_rate:g} seed={cfg.seed}: BAC {m['bac']:.3f}  "
        + "  ".join(f"Risk {s.name} {m['risk_' + s.name]:.4f}" for s in cfg.scenarios)
        + ("  [collapse]" if result.collapse else "")
    )
    return EXIT_OK


def _matrix(args) -> int:
    cfg, table = load_config(args.config)
    methods = args.methods.split(",") if args.methods else table.get("methods", [cfg.label])
    etas = args.noise_rates if args.noise_rates is not None else table.get("noise_rates", [cfg.noise_rate])
    seeds = args.seeds if args.seeds is not None else table.get("seeds", [cfg.seed])
    if args.parallel < 1:
        raise ConfigError("--parallel must be >= 1")
    results = runner.run_matrix(cfg, methods, etas, seeds, args.parallel)
    out = Path(args.out)
    # timings vary between runs; keep them out of the JSONL so it is byte-reproducible
    runner.persist(results, out, timing=False)
    with out.with_suffix(".timing.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["fingerprint", "method", "cs", "noise", "seed", "status", "wall_clock_seconds"])
        for r in results:
            w.writerow([r.fingerprint, r.method, r.cost_sensitive, r.noise_rate, r.seed, r.status, r.wall_clock_seconds])
    failed = [r for r in results if not r.ok]
    print(f"{len(results) - len(failed)} of {len(results)} runs succeeded -> {out}")
    for r in failed:
        print(f"failed: {r.label} noise={r.noise_rate} seed={r.seed}: {r.error}", file=sys.stderr)
    return EXIT_RUNTIME if failed else EXIT_OK


def _report(args) -> int:
    results = runner.load(args.inp)
    if args.method:
        results = [r for r in results if r.method == args.method]
    if args.kind == "table":
        text = reports.emit_method_table(results)
        sys.stdout.write(text)
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / "method_table.txt").write_text(text, encoding="utf-8")
    elif args.kind == "tradeoff":
        res = reports.emit_tradeoff_data(results, args.scenario, args.out or ".")
        print(f"wrote {res.csv_path}" + (f" and {res.svg_path}" if res.svg_path else ""))
        if res.notice:
            print(f"notice: {res.notice}", file=sys.stderr)
    else:
        rep = reports.emit_noise_impact_report(results, args.out)
        sys.stdout.write(rep.text())
    return EXIT_OK


COMMANDS = {"generate": _generate, "inject-noise": _inject, "run": _run, "matrix": _matrix, "report": _report}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, reports.ReportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, runner.ResultsFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
