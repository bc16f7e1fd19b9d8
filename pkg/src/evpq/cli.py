"""Command-line entry point: ``evpq {gen,quantize,correlate,recall,bench,info}``.

Outputs go to ``--out`` (default ``$EVPQ_OUT`` or the current directory) as
JSON/CSV, and every command writes ``<command>-manifest.json`` recording its
full configuration. Exit codes: 0 ok, 1 invalid input, 2 I/O error,
3 internal invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .bench import KERNELS, bench_full_scan, bench_kernel
from .bitcode import CorruptCodeError, write_codes
from .metrics import correlate, isotonic_fit, spearman_rho
from .quantize import QUANTIZERS, EvpConfig, QuantizerConfig, log10_vertex_count, select_x
from .search import DEFAULT_K, DEFAULT_NS, ground_truth, run_recall_experiment
from .vecstore import FORMATS, Dataset, DatasetFormatError, generate_uniform_sphere, l2_normalize, load_dataset, write_dataset

log = logging.getLogger("evpq")

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3
PROXY_QUANTIZERS = ("evp", "one-bit", "b158")


class ValidationError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    options: dict

    def to_json(self) -> dict:
        return {"command": self.command, "version": __version__, **self.options}


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _name_list(text: str) -> list[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    bad = [n for n in names if n not in PROXY_QUANTIZERS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"quantizers must be drawn from {PROXY_QUANTIZERS}, got {text!r}")
    return names


def _add_data_args(p, required_d=False):
    g = p.add_argument_group("dataset")
    g.add_argument("--data", help="dataset file")
    g.add_argument("--format", choices=FORMATS, default="raw-f32")
    g.add_argument("--d", type=int, required=required_d, help="dimension (required for raw-f32)")
    g.add_argument("--uniform", type=int, metavar="N", help="generate N uniform-sphere vectors instead of reading --data")
    g.add_argument("--data-seed", type=int, default=1, help="seed for --uniform")
    g.add_argument("--normalize", action="store_true", help="L2-normalise rows of --data after loading")


def _add_common(p):
    p.add_argument("--out", default=None, help="output directory (default: $EVPQ_OUT or .)")
    p.add_argument("--pretty", action="store_true", help="also print a human-readable table")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: available cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evpq", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate uniform hypersphere data as raw float32")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default=None)
    _add_common(p)

    p = sub.add_parser("quantize", help="quantise a dataset to a packed code file")
    _add_data_args(p)
    p.add_argument("--quantizer", choices=PROXY_QUANTIZERS, default="evp")
    p.add_argument("--x", type=int, default=None, help="EVP nonzero count (default round(2d/3))")
    p.add_argument("--epsilon", type=float, default=1e-6)
    _add_common(p)

    p = sub.add_parser("correlate", help="Spearman correlation and Shepard data for each quantiser")
    _add_data_args(p)
    p.add_argument("--quantizers", type=_name_list, default=list(PROXY_QUANTIZERS))
    p.add_argument("--x", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--pairs", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0, help="pair sampling seed")
    _add_common(p)

    p = sub.add_parser("recall", help="k@n recall of proxy search against exact search")
    _add_data_args(p)
    p.add_argument("--queries", default=None, help="query file (same format/d as data)")
    p.add_argument("--n-queries", type=int, default=1000, help="queries drawn from the data when --queries is absent")
    p.add_argument("--query-seed", type=int, default=0)
    p.add_argument("--quantizers", type=_name_list, default=list(PROXY_QUANTIZERS))
    p.add_argument("--x", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--ns", type=_int_list, default=list(DEFAULT_NS))
    p.add_argument("--per-query-csv", action="store_true")
    p.add_argument("--cache-dir", default=None, help="ground-truth cache directory")
    _add_common(p)

    p = sub.add_parser("bench", help="kernel micro-benchmarks or end-to-end scan timing")
    p.add_argument("--kernel", choices=KERNELS, default="b2sp")
    p.add_argument("--count", type=int, default=1_000_000)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--full-scan", action="store_true", help="time exhaustive scans over a dataset instead")
    p.add_argument("--queries", type=int, default=100)
    p.add_argument("--quantizer", choices=("evp", "b158"), default="evp")
    p.add_argument("--x", type=int, default=None)
    _add_data_args(p)
    _add_common(p)

    p = sub.add_parser("info", help="EVP parameters for a dimension")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--x", type=int, default=None)
    _add_common(p)
    return parser


# --- helpers ----------------------------------------------------------------


def _out_dir(args) -> str:
    out = args.out or os.environ.get("EVPQ_OUT") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2)
        f.write("\n")


def _manifest(args, out, outputs, extra=None):
    opts = {k: v for k, v in vars(args).items() if k not in ("command", "func")}
    cfg = RunConfig(args.command, {"options": opts, "outputs": outputs, **(extra or {})})
    _write_json(os.path.join(out, f"{args.command}-manifest.json"), cfg.to_json())


def _load(args) -> Dataset:
    if args.uniform is not None:
        if args.d is None or args.d < 1 or args.uniform < 1:
            raise ValidationError("--uniform needs N >= 1 and --d >= 1")
        return generate_uniform_sphere(args.data_seed, args.uniform, args.d)
    if not args.data:
        raise ValidationError("give --data PATH or --uniform N")
    if not os.path.exists(args.data):
        raise FileNotFoundError(f"dataset not found: {args.data}")
    if args.format == "raw-f32" and not args.d:
        raise ValidationError("raw-f32 data needs --d")
    data = load_dataset(args.data, args.format, args.d)
    if getattr(args, "normalize", False):
        zero = np.flatnonzero(~np.any(data.vectors != 0, axis=1))
        if zero.size:
            raise DatasetFormatError(f"{args.data}: row {zero[0]} is a zero vector and cannot be normalised")
        data = Dataset(l2_normalize(data.vectors), name=data.name, normalized=True)
    return data


def _check_x(x, d):
    if x is not None and not 1 <= x <= d:
        raise ValidationError(f"--x must satisfy 1 <= x <= d={d}, got {x}")


def _table(rows, headers):
    cols = [headers] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cols) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cols]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _fmt(v):
    return f"{v:.4f}" if isinstance(v, float) else v


# --- commands ---------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.n < 1 or args.d < 1:
        raise ValidationError(f"--n and --d must be >= 1, got n={args.n}, d={args.d}")
    out = _out_dir(args)
    data = generate_uniform_sphere(args.seed, args.n, args.d)
    name = args.name or f"uniform-d{args.d}-n{args.n}-s{args.seed}"
    path = os.path.join(out, f"{name}.f32")
    write_dataset(path, data, "raw-f32")
    _manifest(args, out, [path], {"n": args.n, "d": args.d, "seed": args.seed, "format": "raw-f32",
                                  "rng": "PCG64", "normal_sampler": "ziggurat", "sha1": data.digest()})
    log.info("wrote %s (%d x %d)", path, args.n, args.d)
    return EXIT_OK


def _quantizer(kind, args, d) -> QuantizerConfig:
    _check_x(args.x, d)
    return QuantizerConfig(kind, args.x if kind == "evp" else None, args.epsilon)


def cmd_quantize(args) -> int:
    if args.d is not None:
        _check_x(args.x, args.d)
    data = _load(args)
    out = _out_dir(args)
    qc = _quantizer(args.quantizer, args, data.d)
    extra = {"d": data.d, "rows": len(data), "quantizer": qc.kind}
    if qc.kind == "evp":
        cfg = qc.evp_config(data.d)
        extra.update(x=cfg.x, log10_vertices=log10_vertex_count(cfg))
        log.info("EVP {%d,%d}: x=%d, log10 vertex count %.2f", cfg.x, cfg.d, cfg.x, extra["log10_vertices"])
        print(f"x={cfg.x} log10_vertices={extra['log10_vertices']:.2f}")
    codes = qc.encode(data)
    ext = "evps" if qc.kind == "one-bit" else "evpb"
    path = os.path.join(out, f"{data.name}.{qc.kind}.{ext}")
    write_codes(path, codes)
    _manifest(args, out, [path], extra)
    return EXIT_OK


def cmd_correlate(args) -> int:
    data = _load(args)
    _check_x(args.x, data.d)
    if args.pairs < 1:
        raise ValidationError("--pairs must be >= 1")
    total = len(data) * (len(data) - 1) // 2
    if args.pairs > total:
        raise ValidationError(f"--pairs {args.pairs} exceeds the {total} distinct pairs in {len(data)} rows")
    out = _out_dir(args)
    samples = correlate(data, args.quantizers, args.pairs, args.seed, args.x, args.epsilon)
    records, outputs = [], []
    for kind, s in samples.items():
        shep = os.path.join(out, f"shepard-{kind}.csv")
        with open(shep, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["proxy_value", "true_distance"])
            w.writerows(zip(s.proxy_value.tolist(), s.true_distance.tolist()))
        fit = isotonic_fit(s)
        iso = os.path.join(out, f"isotonic-{kind}.csv")
        with open(iso, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["proxy_value", "fitted_true_distance"])
            w.writerows(zip(fit.breakpoints.tolist(), fit.levels.tolist()))
        records.append({"dataset": data.name, "quantizer": kind, "rho": spearman_rho(s.proxy_value, s.true_distance),
                        "n_pairs": len(s), "seed": args.seed})
        outputs += [shep, iso]
    summary = os.path.join(out, "spearman.json")
    _write_json(summary, records)
    _manifest(args, out, outputs + [summary], {"dataset": data.name, "d": data.d, "rows": len(data)})
    if args.pretty:
        extra = {}
        if data.d >= 2:
            cfg = EvpConfig(data.d, args.x or select_x(data.d))
            extra = {"evp": f"{{{cfg.x},{cfg.d}}}", "vertices": f"10^{log10_vertex_count(cfg):.0f}"}
        row = [data.name, data.d, extra.get("evp", "-"), extra.get("vertices", "-")]
        row += [_fmt(next((r["rho"] for r in records if r["quantizer"] == k), "-")) for k in PROXY_QUANTIZERS]
        print(_table([row], ["data set", "d", "EVP used", "vertices", "rho EVP", "rho 1-bit", "rho b1.58"]))
    return EXIT_OK


def cmd_recall(args) -> int:
    data = _load(args)
    _check_x(args.x, data.d)
    if args.k < 1 or any(n < args.k for n in args.ns):
        raise ValidationError(f"need k >= 1 and every n >= k, got k={args.k}, ns={args.ns}")
    if args.queries:
        if not os.path.exists(args.queries):
            raise FileNotFoundError(f"query file not found: {args.queries}")
        queries = load_dataset(args.queries, args.format, data.d)
        flagged = False
    else:
        if args.n_queries < 1 or args.n_queries > len(data):
            raise ValidationError(f"--n-queries must be in [1, {len(data)}]")
        rng = np.random.default_rng(args.query_seed)
        queries = Dataset(data.vectors[rng.choice(len(data), args.n_queries, replace=False)], name="queries")
        flagged = True
        log.info("queries drawn from the data; each query's own row is counted as a neighbour")
    out = _out_dir(args)
    threads = args.threads or os.cpu_count()
    truth = ground_truth(data, queries, args.k, cache_dir=args.cache_dir, threads=threads)
    records, outputs, table = [], [], []
    for kind in args.quantizers:
        qc = _quantizer(kind, args, data.d)
        reports = run_recall_experiment(data, queries, args.k, args.ns, qc, truth=truth, threads=threads)
        for r in reports:
            records.append({"dataset": data.name, "queries_from_data": flagged, **r.to_record()})
            table.append([kind, f"{r.k}@{r.n}", _fmt(r.mean)])
            if args.per_query_csv:
                path = os.path.join(out, f"recall-{kind}-{r.k}at{r.n}.csv")
                with open(path, "w", newline="") as f:
                    w = csv.writer(f)
                    w.writerow(["query", "recall"])
                    w.writerows(enumerate(r.per_query.tolist()))
                outputs.append(path)
    path = os.path.join(out, "recall.json")
    _write_json(path, records)
    _manifest(args, out, outputs + [path], {"dataset": data.name, "n_queries": len(queries)})
    if args.pretty:
        print(_table(table, ["quantizer", "k@n", "mean recall"]))
    return EXIT_OK


def cmd_bench(args) -> int:
    out = _out_dir(args)
    if args.full_scan:
        data = _load(args)
        _check_x(args.x, data.d)
        result = bench_full_scan(data, args.queries, QuantizerConfig(args.quantizer, args.x), args.trials, args.seed)
        record = result.to_record()
        path = os.path.join(out, "bench-full-scan.json")
        rows = [[r.kernel, _fmt(r.fastest_ms), _fmt(r.slowest_ms), _fmt(r.median_ms), _fmt(r.mean_ms)]
                for r in (result.float_scan, result.code_scan)]
        footer = f"speed-up {result.speedup:.1f}x"
    else:
        if args.d is None or args.d < 1 or args.count < 1 or args.trials < 1:
            raise ValidationError("--d, --count and --trials must be >= 1")
        report = bench_kernel(args.kernel, args.d, args.count, args.trials, seed=args.seed)
        record = report.to_record()
        path = os.path.join(out, f"bench-{args.kernel}-d{args.d}.json")
        rows = [[report.kernel, _fmt(report.fastest_ms), _fmt(report.slowest_ms), _fmt(report.median_ms),
                 _fmt(report.mean_ms)]]
        footer = f"{report.per_op_ns:.2f} ns per comparison"
    _write_json(path, record)
    _manifest(args, out, [path])
    if args.pretty:
        print(_table(rows, ["metric", "fastest ms", "slowest ms", "median ms", "mean ms"]))
        print(footer)
    return EXIT_OK


def cmd_info(args) -> int:
    if args.d < 2 and args.x is None:
        raise ValidationError("--d must be >= 2")
    _check_x(args.x, args.d)
    cfg = EvpConfig(args.d, args.x if args.x is not None else select_x(args.d))
    record = {"d": cfg.d, "x": cfg.x, "log10_vertices": log10_vertex_count(cfg),
              "bits_per_plane": (-(-cfg.d // 256)) * 256}
    print(json.dumps(record))
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "quantize": cmd_quantize,
    "correlate": cmd_correlate,
    "recall": cmd_recall,
    "bench": cmd_bench,
    "info": cmd_info,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValidationError, DatasetFormatError) as e:
        print(f"evpq: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"evpq: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (CorruptCodeError, AssertionError, RuntimeError) as e:
        print(f"evpq: internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except ValueError as e:
        print(f"evpq: error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
