"""Command line front end.

Three subcommands:

* ``run``: cluster one CSV, optionally adjust memberships, emit a report.
* ``sweep-knn``: repeat the impurity-ranked adjustment for several
  neighborhood sizes and tabulate how little the quality ratio moves.
* ``bench-table``: run a manifest of datasets and tabulate fairness and
  quality for the original and both adjusted clusterings.

Reports are deterministic: the same invocation produces byte-identical
output. Timing is therefore confined to the human-readable summary on
stderr and never enters a report. Exit codes: 0 success, 1 data problems,
2 usage problems.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .core import (
    DataError,
    RunConfig,
    ValidityError,
    compute_cluster_stats,
    group_proportions,
    load_csv,
    standardize,
)
from .fairadjust import fair_adjust_multi
from .kmeans import run_kmeans
from .metrics import cluster_quality_kappa, fairness_index, ss_decomposition

# CLI spelling -> internal heuristic name
HEURISTIC_NAMES = {"near-foreign": "near_foreign", "gini": "gini"}


def _fmt_float(x: float):
    """Round-trip floats at 6 significant digits; keep inf textual."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return float(f"{x:.6g}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    return obj


def _float_cell(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.6g}"


def _cluster_count(text):
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("cluster count must be at least 2")
    return value


def _neighbor_count(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("neighborhood size must be at least 1")
    return value


def _tolerance(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError("balance tolerance must lie in (0, 1)")
    return value


def _round_cap(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("round cap must be >= 0")
    return value


def _sweep_list(text):
    try:
        values = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("sweep sizes must be positive integers")
    return values


def _add_shared_flags(sub, heuristics):
    sub.add_argument("--input", required=True, help="CSV file with a header row")
    sub.add_argument("--sensitive-col", required=True, help="column holding the group label")
    sub.add_argument("--id-col", default=None, help="column to carry through as row id")
    sub.add_argument("--k", required=True, type=_cluster_count, help="number of clusters")
    sub.add_argument(
        "--heuristic",
        choices=heuristics,
        default=heuristics[-1],
        help="which switching rule to apply after clustering",
    )
    sub.add_argument("--knn-k", type=_neighbor_count, default=10,
                     help="neighborhood size for the impurity ranking")
    sub.add_argument("--beta0", type=_tolerance, default=0.10,
                     help="relative band around the population ratio that counts as balanced")
    sub.add_argument("--seed", type=int, default=0, help="seed for centroid initialization")
    sub.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True,
                     help="scale each feature to mean 0, sd 1 before clustering")
    sub.add_argument("--literal-switch", action="store_true",
                     help="apply every ranked candidate instead of only improving ones")
    sub.add_argument("--max-pair-rounds", type=_round_cap, default=None,
                     help="cap on adjustment rounds (default K*(K-1)/2)")
    sub.add_argument("--output", default=None, help="write the report here instead of stdout")
    sub.add_argument("--format", choices=("json", "csv"), default="json",
                     help="report format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairkm",
        description="K-means clustering with fairness-aware membership switching",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    run = subs.add_parser("run", help="cluster one dataset and report")
    _add_shared_flags(run, ("near-foreign", "gini", "none", "both"))

    sweep = subs.add_parser("sweep-knn", help="rerun the impurity heuristic across neighborhood sizes")
    _add_shared_flags(sweep, ("gini",))
    sweep.add_argument("--knn-sweep", type=_sweep_list, default=[5, 10, 15],
                       help="comma-separated neighborhood sizes to try")

    bench = subs.add_parser("bench-table", help="run every dataset in a manifest CSV")
    bench.add_argument("manifest", help="CSV with columns path,sensitive_col,k and optional id_col")
    bench.add_argument("--knn-k", type=_neighbor_count, default=10)
    bench.add_argument("--beta0", type=_tolerance, default=0.10)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True)
    bench.add_argument("--literal-switch", action="store_true")
    bench.add_argument("--output", default=None)
    bench.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def _load(args):
    data = load_csv(args.input, args.sensitive_col, id_column=args.id_col)
    if args.standardize:
        data = standardize(data)
    return data


def _cluster_blocks(data, assignment):
    blocks = []
    for s in compute_cluster_stats(data, assignment):
        blocks.append(
            {
                "size": s.size,
                "group_counts": s.group_counts.tolist(),
                "centroid": s.centroid.tolist(),
            }
        )
    return blocks


def _baseline_block(data, result, full=True):
    ss_w, ss_b, ss_t = ss_decomposition(data, result.assignment)
    block = {
        "fairness": fairness_index(data, result.assignment).value,
        "kappa": cluster_quality_kappa(data, result.assignment),
        "ss_within": ss_w,
        "ss_between": ss_b,
        "ss_total": ss_t,
        "iterations": result.iterations,
    }
    if full:
        block["clusters"] = _cluster_blocks(data, result.assignment)
        block["assignment"] = result.assignment.cluster_of.tolist()
    return block


def _adjusted_block(data, trace, full=True):
    block = {
        "fairness": fairness_index(data, trace.assignment).value,
        "kappa": cluster_quality_kappa(data, trace.assignment),
        "switch_count": len(trace.switches),
        "reason": trace.reason,
    }
    if full:
        block["switches"] = [
            {
                "point": s.point,
                "source": s.source,
                "target": s.target,
                "score": s.score,
                "fairness_before": s.fairness_before,
                "fairness_after": s.fairness_after,
                "balance_a": s.balance_a,
                "balance_b": s.balance_b,
            }
            for s in trace.switches
        ]
        block["clusters"] = _cluster_blocks(data, trace.assignment)
        block["assignment"] = trace.assignment.cluster_of.tolist()
    return block


def _dataset_block(data):
    return {
        "n": data.n,
        "d": data.d,
        "groups": data.group_count,
        "group_names": list(data.group_names) if data.group_names else None,
        "group_proportions": group_proportions(data).tolist(),
        "dropped_rows": data.dropped_rows,
    }


def _config_block(args, heuristic_label):
    return {
        "k": args.k,
        "heuristic": heuristic_label,
        "knn_k": args.knn_k,
        "beta0": args.beta0,
        "seed": args.seed,
        "standardize": args.standardize,
        "literal_switch": args.literal_switch,
        "max_pair_rounds": args.max_pair_rounds,
    }


def _emit(text, output):
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv_text(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _config_for(args, heuristic):
    return RunConfig(
        K=args.k,
        heuristic=heuristic,
        knn_k=args.knn_k,
        beta0=args.beta0,
        seed=args.seed,
        standardize=args.standardize,
        max_pair_rounds=args.max_pair_rounds,
        literal_switch=args.literal_switch,
    )


def cmd_run(args) -> int:
    started = time.perf_counter()
    data = _load(args)
    if args.heuristic == "both":
        heuristics = list(HEURISTIC_NAMES.values())
    elif args.heuristic == "none":
        heuristics = []
    else:
        heuristics = [HEURISTIC_NAMES[args.heuristic]]
    _config_for(args, "none").validate_for(data.n)

    result = run_kmeans(data, args.k, seed=args.seed)
    report = {
        "dataset": _dataset_block(data),
        "config": _config_block(args, args.heuristic),
        "baseline": _baseline_block(data, result),
        "adjusted": {},
    }
    summaries = []
    for heuristic in heuristics:
        trace = fair_adjust_multi(data, result.assignment, _config_for(args, heuristic))
        block = _adjusted_block(data, trace)
        report["adjusted"][heuristic] = block
        summaries.append(
            f"{heuristic.replace('_', '-')}: fairness {_float_cell(block['fairness'])}, "
            f"kappa {_float_cell(block['kappa'])}, "
            f"{block['switch_count']} switches ({block['reason']})"
        )

    if args.format == "json":
        _emit(json.dumps(_jsonable(report), indent=2) + "\n", args.output)
    else:
        rows = [("section", "metric", "value")]
        d = report["dataset"]
        rows += [("dataset", k, d[k]) for k in ("n", "d", "groups", "dropped_rows")]
        b = report["baseline"]
        rows += [
            ("baseline", "fairness", _float_cell(b["fairness"])),
            ("baseline", "kappa", _float_cell(b["kappa"])),
            ("baseline", "ss_within", _float_cell(b["ss_within"])),
            ("baseline", "ss_between", _float_cell(b["ss_between"])),
            ("baseline", "ss_total", _float_cell(b["ss_total"])),
            ("baseline", "iterations", b["iterations"]),
        ]
        for heuristic, block in report["adjusted"].items():
            label = heuristic.replace("_", "-")
            rows += [
                (label, "fairness", _float_cell(block["fairness"])),
                (label, "kappa", _float_cell(block["kappa"])),
                (label, "switch_count", block["switch_count"]),
                (label, "reason", block["reason"]),
            ]
        _emit(_csv_text(rows), args.output)

    base = report["baseline"]
    print(
        f"loaded {data.n} points, {data.d} features, {data.group_count} groups "
        f"(dropped {data.dropped_rows} rows)",
        file=sys.stderr,
    )
    print(
        f"baseline: fairness {_float_cell(base['fairness'])}, "
        f"kappa {_float_cell(base['kappa'])}, {base['iterations']} iterations",
        file=sys.stderr,
    )
    for line in summaries:
        print(line, file=sys.stderr)
    print(f"elapsed {time.perf_counter() - started:.2f}s", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    started = time.perf_counter()
    data = _load(args)
    _config_for(args, "gini").validate_for(data.n)
    for k in args.knn_sweep:
        if not 1 <= k < data.n:
            raise ValidityError(f"sweep size {k} out of range for {data.n} points")

    result = run_kmeans(data, args.k, seed=args.seed)
    baseline = _baseline_block(data, result, full=False)
    rows = []
    for k in args.knn_sweep:
        config = RunConfig(
            K=args.k,
            heuristic="gini",
            knn_k=k,
            beta0=args.beta0,
            seed=args.seed,
            standardize=args.standardize,
            max_pair_rounds=args.max_pair_rounds,
            literal_switch=args.literal_switch,
        )
        trace = fair_adjust_multi(data, result.assignment, config)
        rows.append(
            {
                "knn_k": k,
                "fairness": fairness_index(data, trace.assignment).value,
                "kappa": cluster_quality_kappa(data, trace.assignment),
                "switch_count": len(trace.switches),
                "reason": trace.reason,
            }
        )

    if args.format == "json":
        report = {
            "dataset": _dataset_block(data),
            "config": _config_block(args, "gini"),
            "baseline": baseline,
            "sweep": rows,
        }
        _emit(json.dumps(_jsonable(report), indent=2) + "\n", args.output)
    else:
        table = [("knn_k", "fairness", "kappa", "switch_count", "reason")]
        table.append(
            ("baseline", _float_cell(baseline["fairness"]), _float_cell(baseline["kappa"]), "", "")
        )
        for r in rows:
            table.append(
                (r["knn_k"], _float_cell(r["fairness"]), _float_cell(r["kappa"]),
                 r["switch_count"], r["reason"])
            )
        _emit(_csv_text(table), args.output)

    kappas = [r["kappa"] for r in rows]
    print(
        f"baseline kappa {_float_cell(baseline['kappa'])}; "
        f"sweep kappa spread {_float_cell(max(kappas) - min(kappas))} "
        f"over knn_k={args.knn_sweep}",
        file=sys.stderr,
    )
    print(f"elapsed {time.perf_counter() - started:.2f}s", file=sys.stderr)
    return 0


def _read_manifest(path):
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise DataError(f"{path}: cannot open: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty manifest, expected a header row")
        required = {"path", "sensitive_col", "k"}
        missing = required - set(reader.fieldnames)
        if missing:
            raise DataError(f"{path}: manifest lacks columns {sorted(missing)}")
        rows = [row for row in reader if any((v or "").strip() for v in row.values())]
    base = Path(path).resolve().parent
    jobs = []
    for i, row in enumerate(rows, start=2):
        p = Path(row["path"])
        jobs.append(
            {
                "line": i,
                "path": str(p if p.is_absolute() else base / p),
                "shown_path": row["path"],
                "sensitive_col": row["sensitive_col"],
                "k": row["k"],
                "id_col": (row.get("id_col") or "").strip() or None,
            }
        )
    return jobs


def _thread_count() -> int:
    raw = os.environ.get("FAIRKM_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        print(f"fairkm: FAIRKM_THREADS must be a positive integer, got {raw!r}", file=sys.stderr)
        raise SystemExit(2)
    return value


def _bench_one(job, args):
    entry = {
        "path": job["shown_path"],
        "sensitive_col": job["sensitive_col"],
        "k": None,
        "original": None,
        "near_foreign": None,
        "gini": None,
        "error": None,
    }
    try:
        try:
            k = int(job["k"])
        except ValueError:
            raise ValidityError(f"cluster count {job['k']!r} is not an integer") from None
        if k < 2:
            raise ValidityError(f"cluster count must be at least 2, got {k}")
        entry["k"] = k
        data = load_csv(job["path"], job["sensitive_col"], id_column=job["id_col"])
        if args.standardize:
            data = standardize(data)
        RunConfig(K=k, knn_k=args.knn_k, beta0=args.beta0, seed=args.seed).validate_for(data.n)
        result = run_kmeans(data, k, seed=args.seed)
        entry["original"] = {
            "fairness": fairness_index(data, result.assignment).value,
            "kappa": cluster_quality_kappa(data, result.assignment),
        }
        for heuristic in ("near_foreign", "gini"):
            config = RunConfig(
                K=k,
                heuristic=heuristic,
                knn_k=args.knn_k,
                beta0=args.beta0,
                seed=args.seed,
                standardize=args.standardize,
                literal_switch=args.literal_switch,
            )
            trace = fair_adjust_multi(data, result.assignment, config)
            entry[heuristic] = {
                "fairness": fairness_index(data, trace.assignment).value,
                "kappa": cluster_quality_kappa(data, trace.assignment),
            }
    except DataError as exc:
        entry["error"] = f"line {job['line']}: {exc}"
    return entry


def cmd_bench(args) -> int:
    started = time.perf_counter()
    jobs = _read_manifest(args.manifest)
    threads = _thread_count()
    if threads == 1 or len(jobs) <= 1:
        entries = [_bench_one(job, args) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(lambda j: _bench_one(j, args), jobs))

    if args.format == "json":
        _emit(json.dumps(_jsonable(entries), indent=2) + "\n", args.output)
    else:
        rows = [("path", "variant", "fairness", "kappa", "error")]
        for e in entries:
            if e["error"] is not None:
                rows.append((e["path"], "", "", "", e["error"]))
                continue
            for variant, key in (("original", "original"), ("near-foreign", "near_foreign"),
                                 ("gini", "gini")):
                rows.append(
                    (e["path"], variant, _float_cell(e[key]["fairness"]),
                     _float_cell(e[key]["kappa"]), "")
                )
        _emit(_csv_text(rows), args.output)

    _print_bench_table(entries)
    failures = [e for e in entries if e["error"] is not None]
    for e in failures:
        print(f"fairkm: {e['path']}: {e['error']}", file=sys.stderr)
    print(f"elapsed {time.perf_counter() - started:.2f}s", file=sys.stderr)
    return 1 if failures else 0


def _print_bench_table(entries):
    headers = ("dataset", "F orig", "F near-f", "F gini", "k orig", "k near-f", "k gini")
    lines = []
    for e in entries:
        if e["error"] is not None:
            lines.append((e["path"], "error", "", "", "", "", ""))
            continue
        lines.append(
            (
                e["path"],
                _float_cell(e["original"]["fairness"]),
                _float_cell(e["near_foreign"]["fairness"]),
                _float_cell(e["gini"]["fairness"]),
                _float_cell(e["original"]["kappa"]),
                _float_cell(e["near_foreign"]["kappa"]),
                _float_cell(e["gini"]["kappa"]),
            )
        )
    widths = [max(len(str(h)), *(len(str(row[i])) for row in lines)) if lines else len(h)
              for i, h in enumerate(headers)]
    def fmt(row):
        return "  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)).rstrip()
    print(fmt(headers), file=sys.stderr)
    for row in lines:
        print(fmt(row), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep-knn":
            return cmd_sweep(args)
        return cmd_bench(args)
    except DataError as exc:
        print(f"fairkm: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
