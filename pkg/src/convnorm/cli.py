"""Command-line interface: ``convnorm {norms,verify,bench,decay-demo}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .decay import DecayConfig, NormKind, run_decay_demo
from .errors import AssumptionViolated, ConvNormError, SizeOverflow
from .io import BatchNormLayer, Conv2dLayer, DenseLayer, load_model
from .norms import bn_norm, dense_norms, l1_norm, linf_norm, norm_report
from .oracle import materialize, matrix_frobenius, matrix_l1, matrix_linf
from .verify import run_verification

log = logging.getLogger("convnorm")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_ASSUMPTION = 2

NORM_COLUMNS = ["layer", "kind", "l1", "linf", "l2_upper", "frobenius", "assumption1", "source"]


def layer_row(layer) -> dict:
    """One output row of ``convnorm norms`` for a loaded layer."""
    row = {"layer": layer.name, "kind": layer.kind}
    if isinstance(layer, Conv2dLayer):
        rep = norm_report(layer.kernel)
        row.update(l1=rep.l1, linf=rep.linf, l2_upper=rep.l2_upper, frobenius=rep.frobenius,
                   assumption1=rep.assumption1_holds, source="formula")
        if rep.oracle_fallback:
            try:
                M = materialize(layer.kernel)
            except SizeOverflow:
                row["source"] = "none"
            else:
                fro = matrix_frobenius(M)
                row.update(l1=matrix_l1(M), linf=matrix_linf(M), l2_upper=fro, frobenius=fro, source="oracle")
    elif isinstance(layer, DenseLayer):
        l1, linf = dense_norms(layer.weight)
        fro = float(np.linalg.norm(layer.weight))
        row.update(l1=l1, linf=linf, l2_upper=fro, frobenius=fro, assumption1=None, source="formula")
    elif isinstance(layer, BatchNormLayer):
        v = bn_norm(layer.gamma, layer.sigma)
        row.update(l1=v, linf=v, l2_upper=v, frobenius=None, assumption1=None, source="formula")
    return row


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "NO"
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def render(rows: list, columns: list, fmt: str) -> str:
    if fmt == "json":
        return json.dumps([{c: r.get(c) for c in columns} for r in rows], indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({c: "" if r.get(c) is None else r.get(c) for c in columns})
        return buf.getvalue()
    cells = [[_fmt(r.get(c)) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def cmd_norms(args) -> int:
    layers = load_model(args.manifest)
    rows = [layer_row(layer) for layer in layers]
    sys.stdout.write(render(rows, NORM_COLUMNS, args.format))
    if any(r.get("assumption1") is False for r in rows):
        for r in rows:
            if r.get("assumption1") is False:
                log.warning("layer %s: kernel placement assumption fails (values from %s)", r["layer"], r["source"])
        return EXIT_ASSUMPTION
    return EXIT_OK


def _corrupt(fn):
    return lambda kernel: fn(kernel) * (1 + 1e-6)


def cmd_verify(args) -> int:
    l1_fn, linf_fn = l1_norm, linf_norm
    if args.inject_fault == "l1":
        l1_fn = _corrupt(l1_norm)
    elif args.inject_fault == "linf":
        linf_fn = _corrupt(linf_norm)
    if args.trials == 0:
        print("warning: --trials 0, nothing to verify (vacuous pass)", file=sys.stderr)
    report = run_verification(args.trials, args.seed, l1_fn=l1_fn, linf_fn=linf_fn)
    for name in sorted(report.checks):
        print(f"{name:16s} {report.checks[name]:6d} checked")
    print(f"subgradient checks skipped at non-differentiable points: {report.skipped_subgradient}")
    if report.passed:
        print(f"PASS: {args.trials} trials, seed {args.seed}")
        return EXIT_OK
    first = report.failures[0]
    print(f"FAIL: {len(report.failures)} failed checks; first counterexample:")
    print(f"  check={first['check']} geometry={first['geometry']}")
    print(f"  {first['detail']}")
    return EXIT_ERROR


def _read_shapes(spec: str) -> list:
    if spec in ("standard", "table1"):
        return list(bench_mod.STANDARD_SHAPES)
    shapes = []
    for line in Path(spec).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [int(p) for p in line.replace(",", " ").split()]
        if len(parts) != 4:
            raise ConvNormError(f"shape line {line!r}: expected k1 k2 d_in d_out")
        shapes.append(tuple(parts))
    return shapes


BENCH_COLUMNS = [
    "shape", "input",
    "l1_median", "linf_median", "oracle_median", "power_iter_median",
    "power_iter/l1", "power_iter/linf", "oracle/l1", "oracle/linf", "notes",
]


def cmd_bench(args) -> int:
    rows = []
    for shape in _read_shapes(args.shapes):
        res = bench_mod.bench_shape(
            shape,
            input_hw=tuple(args.input),
            runs=args.runs,
            warmup=args.warmup,
            slow_runs=args.slow_runs,
            power_iters=args.power_iters,
            seed=args.seed,
        )
        rows.append(res.row())
    sys.stdout.write(render(rows, BENCH_COLUMNS, args.format))
    return EXIT_OK


def cmd_decay_demo(args) -> int:
    model = load_model(args.manifest)
    names, layers = [], []
    for layer in model:
        if isinstance(layer, Conv2dLayer):
            layers.append(layer.kernel)
        elif isinstance(layer, DenseLayer):
            layers.append(layer.weight)
        else:
            log.info("skipping %s layer %s (not regularized)", layer.kind, layer.name)
            continue
        names.append(layer.name)
    if not layers:
        raise ConvNormError("manifest has no conv2d or dense layers to regularize")
    config = DecayConfig(NormKind(args.norm), args.beta, args.gamma, args.steps, args.lr)
    trace = run_decay_demo(layers, config)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["step", "layer", "norm"])
            for step, idx, value in trace.rows():
                writer.writerow([step, names[idx], repr(value)])
    for idx, name in enumerate(names):
        first, last = trace.norms[0, idx], trace.norms[-1, idx]
        change = (last / first - 1) * 100 if first else 0.0
        print(f"{name}: {args.norm} norm {first:.6g} -> {last:.6g} ({change:+.1f}%)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convnorm", description="Exact l1/linf norms of convolutional layers.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norms", help="per-layer norms of a saved model")
    p.add_argument("manifest")
    p.add_argument("--format", choices=["table", "json", "csv"], default="table")
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("verify", help="randomized check of the formulas against the dense oracle")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--inject-fault", choices=["l1", "linf"], help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="time formulas against oracle methods")
    p.add_argument("--shapes", default="standard", help="'standard' (alias 'table1') or a file of 'k1 k2 d_in d_out' lines")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--warmup", type=int, default=5)
    p.add_argument("--slow-runs", type=int, default=3, help="repetitions for oracle and power iteration")
    p.add_argument("--power-iters", type=int, default=20)
    p.add_argument("--input", type=int, nargs=2, default=[32, 32], metavar=("H", "W"))
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--format", choices=["table", "json", "csv"], default="table")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("decay-demo", help="run norm decay with zero task loss and trace the norms")
    p.add_argument("manifest")
    p.add_argument("--norm", choices=["l1", "linf"], default="l1")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--out", help="CSV path for the (step, layer, norm) trace")
    p.set_defaults(func=cmd_decay_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if getattr(args, "trials", 1) < 0 or getattr(args, "runs", 1) < 1:
        parser.error("--trials must be >= 0 and --runs >= 1")
    try:
        return args.func(args)
    except AssumptionViolated as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (ConvNormError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
