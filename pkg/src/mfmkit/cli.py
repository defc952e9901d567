"""Command-line interface.

Exit codes: 0 success, 2 validation error, 3 numerical error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from itertools import combinations
from pathlib import Path

import numpy as np

from . import analysis, io
from .core import (
    FidelityMatrix,
    NumericalError,
    QubitLayout,
    SubsystemSelection,
    ValidationError,
    project_stochastic,
)
from .cumulant import reorder, tensor_product
from .estimate import build_mfm
from .metrics import metric_report
from .mitigate import IllConditionedKernelWarning, mitigate
from .simdevice import circuit_cost, cost_curves, full_mfm_experiment, subsystem_experiment

log = logging.getLogger("mfmkit")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _qubits(text: str) -> list[int]:
    try:
        return [int(q) for q in text.replace(" ", "").split(",") if q != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated qubit ids, got {text!r}") from None


def _clusters(text: str) -> list[list[int]]:
    return [_qubits(part) for part in text.split(";") if part.strip()]


def _default_seed() -> int:
    return int(os.environ.get("MFM_SEED", "0"))


def _emit_json(doc: dict, path: str | None):
    if path:
        io.save_json(path, doc)
    else:
        json.dump(doc, sys.stdout, indent=1)
        sys.stdout.write("\n")


def _reference(path: str | None, layout: QubitLayout) -> FidelityMatrix | None:
    if path is None:
        return None
    pool = analysis.MFMPool.from_files([path])
    K, _ = pool.get(layout.qubits)
    return K


# -- commands ------------------------------------------------------------------


def cmd_build_full(args) -> int:
    counts = io.load_counts(args.counts)
    if counts.spectator_positions:
        raise ValidationError(f"{args.counts}: spectator data cannot build a full MFM")
    K = build_mfm(counts.records, counts.layout)
    io.save_matrix(args.output, K)
    report = metric_report(K, _reference(args.reference, K.layout)).to_dict()
    report["shots"] = K.shots
    _emit_json(report, args.metrics)
    return EXIT_OK


def vendor_kernel(table: dict[int, tuple[float, float]], layout: QubitLayout) -> FidelityMatrix:
    factors = []
    for q in layout.qubits:
        if q not in table:
            raise ValidationError(f"calibration has no entry for qubit {q}")
        p10, p01 = table[q]
        factors.append(FidelityMatrix(QubitLayout([q]), [[1 - p10, p10], [p01, 1 - p01]]))
    return tensor_product(factors)


def cmd_vendor_kernel(args) -> int:
    table = io.load_calibration(args.calibration)
    layout = QubitLayout(args.layout) if args.layout else QubitLayout(sorted(table))
    io.save_matrix(args.output, vendor_kernel(table, layout))
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    layout = QubitLayout(args.layout)
    pool = analysis.MFMPool.from_files(args.inputs)
    K = analysis.reconstruct(
        pool, layout, args.mode, bias_correct=args.bias_correct, clusters=args.clusters
    )
    ref = _reference(args.reference, layout)
    report = {"mode": args.mode, "raw": metric_report(K, ref).to_dict()}
    if args.project:
        K = project_stochastic(K)
        report["projected"] = metric_report(K, ref).to_dict()
    report["flags"] = {"raw": K.raw, "bias_corrected": K.bias_corrected, "projected": K.projected}
    io.save_matrix(args.output, K)
    if args.emit_fidelities:
        if ref is None:
            raise ValidationError("--emit-fidelities needs --reference")
        rows = [
            (format(i, f"0{layout.width}b"), float(fr), float(fk))
            for i, (fr, fk) in enumerate(zip(ref.fidelities(), K.fidelities()))
        ]
        io.write_csv(args.emit_fidelities, ["state", "f_reference", "f_reconstructed"], rows)
    _emit_json(report, args.metrics)
    return EXIT_OK


def cmd_scf(args) -> int:
    pool = analysis.MFMPool.from_files(args.inputs)
    bias = False if args.no_bias_correct else None
    if args.clusters:
        blocks = [tuple(c) for c in args.clusters]
        results = [
            analysis.block_scf(pool, a, b, factors=args.factors, bias_correct=bias)
            for a, b in combinations(blocks, 2)
        ]
        labels = ["-".join(map(str, b)) for b in blocks]
        H = np.zeros((len(blocks), len(blocks)))
        for r in results:
            i, j = blocks.index(r.block_a), blocks.index(r.block_b)
            v, s = r.report.scf, r.report.sigma_scf
            H[i, j] = H[j, i] = abs(v - s) if args.absolute else max(v - s, 0.0)
        state_maps = {}
    else:
        layout = QubitLayout(args.layout)
        results = analysis.pairwise_scf(pool, layout, factors=args.factors, bias_correct=bias)
        labels = [str(q) for q in layout.qubits]
        H = analysis.heatmap(layout, results, absolute=args.absolute)
        state_maps = analysis.heatmap_by_state(layout, results, absolute=args.absolute) if args.per_state else {}
    doc = {
        "schema_version": io.SCHEMA_VERSION,
        "kind": "scf_report",
        "labels": labels,
        "results": [r.to_dict() for r in results],
        "significant": [
            ["-".join(map(str, r.block_a)), "-".join(map(str, r.block_b))]
            for r in results
            if r.report.significant
        ],
        "heatmap": H.tolist(),
    }
    if not args.per_state:
        for r in doc["results"]:
            r.pop("per_state")
    else:
        doc["heatmap_by_state"] = {s: m.tolist() for s, m in state_maps.items()}
    if args.heatmap:
        io.write_csv(args.heatmap, labels, H.tolist())
        stem = Path(args.heatmap)
        for s, m in state_maps.items():
            io.write_csv(stem.with_name(f"{stem.stem}_{s}{stem.suffix}"), labels, m.tolist())
    _emit_json(doc, args.output)
    return EXIT_OK


def cmd_mitigate(args) -> int:
    layout, observed = io.load_distribution(args.distribution)
    K = io.load_matrix(args.kernel)
    if set(K.layout.qubits) != set(layout.qubits):
        raise ValidationError(f"kernel layout {K.layout} does not match distribution layout {layout}")
    if K.layout != layout:
        K = reorder(K, layout)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IllConditionedKernelWarning)
        probs, cond = mitigate(K, observed, args.method, cond_warn=args.cond_warn)
    for w in caught:
        log.warning("%s", w.message)
    io.save_distribution(
        args.output, layout, probs, quasi=args.method == "solve", condition_number=cond, method=args.method
    )
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = io.load_model(args.model)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    layout = model.layout
    seed = args.seed
    n_s = args.shots

    def write(name, records, sub_layout, spectators):
        io.save_counts(out / name, io.CountsFile(sub_layout, n_s, records, spectators))

    def subsystem(qubits):
        sel = SubsystemSelection.of_qubits(layout, qubits)
        tag = "-".join(map(str, qubits))
        if args.isolated:
            sub = QubitLayout(qubits)
            return tag, full_mfm_experiment(model, sub, n_s, seed), sub, None
        return tag, subsystem_experiment(model, sel, n_s, seed), layout, sel.complement

    written = []
    if args.experiment == "full":
        write("full.json", full_mfm_experiment(model, layout, n_s, seed), layout, None)
        written.append("full.json")
    else:
        if args.experiment == "pairs-with-spectators":
            groups = [list(p) for p in combinations(layout.qubits, 2)]
            prefix = "pair"
        elif args.experiment == "singles":
            groups = [[q] for q in layout.qubits]
            prefix = "single"
        elif args.experiment == "clusters":
            groups = args.clusters or [list(c.layout.qubits) for c in model.clusters]
            prefix = "cluster"
        else:
            raise ValidationError(f"unknown experiment {args.experiment!r}")
        for g in groups:
            tag, records, sub_layout, spectators = subsystem(g)
            name = f"{prefix}_{tag}.json"
            write(name, records, sub_layout, spectators)
            written.append(name)
    _emit_json({"written": written, "shots": n_s, "seed": seed}, None)
    return EXIT_OK


def cmd_cost(args) -> int:
    if args.curves:
        rows = cost_curves(args.curves)
        header = ["n", "full", "pairs", "triples", "split"]
        if args.output:
            io.write_csv(args.output, header, [["" if r[h] is None else r[h] for h in header] for r in rows])
        else:
            print(",".join(header))
            for r in rows:
                print(",".join("" if r[h] is None else str(r[h]) for h in header))
        return EXIT_OK
    if args.n is None or args.strategy is None:
        raise ValidationError("cost needs N and STRATEGY, or --curves")
    print(circuit_cost(args.n, args.strategy, args.k))
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mfm", description="Measurement fidelity matrix toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("build-full", help="direct MFM from a full-layout counts file")
    s.add_argument("counts")
    s.add_argument("-o", "--output", required=True, help="matrix JSON to write")
    s.add_argument("--metrics", help="metric report JSON (default: stdout)")
    s.add_argument("--reference", help="reference matrix or counts file")
    s.set_defaults(func=cmd_build_full)

    s = sub.add_parser("vendor-kernel", help="product kernel from per-qubit calibration")
    s.add_argument("calibration")
    s.add_argument("--layout", type=_qubits, help="qubit order (default: sorted calibration qubits)")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_vendor_kernel)

    s = sub.add_parser("reconstruct", help="approximate MFM from subsystem data")
    s.add_argument("inputs", nargs="+", help="counts or matrix files")
    s.add_argument("--mode", choices=["singles", "cumulant2", "cumulant3", "cluster"], required=True)
    s.add_argument("--layout", type=_qubits, required=True)
    s.add_argument("--clusters", type=_clusters, help='e.g. "0,1,2;3,4"')
    s.add_argument("--bias-correct", action="store_true")
    s.add_argument("--project", action="store_true", help="clip and renormalize before writing")
    s.add_argument("--reference", help="reference matrix or counts file")
    s.add_argument("--emit-fidelities", metavar="CSV")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--metrics")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("scf", help="scalar correlation factors and significance heatmap")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--layout", type=_qubits)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--pairs", action="store_true", help="all qubit pairs of --layout (default)")
    g.add_argument("--clusters", type=_clusters)
    s.add_argument("--per-state", action="store_true")
    s.add_argument("--factors", choices=["joint", "pool"], default="joint")
    s.add_argument("--no-bias-correct", action="store_true")
    s.add_argument("--absolute", action="store_true", help="heatmap |scf - sigma| instead of clamping")
    s.add_argument("--heatmap", metavar="CSV")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_scf)

    s = sub.add_parser("mitigate", help="invert a kernel on an observed distribution")
    s.add_argument("distribution")
    s.add_argument("--kernel", required=True)
    s.add_argument("--method", choices=["solve", "project-solve"], default="solve")
    s.add_argument("--cond-warn", type=float, default=1e3)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_mitigate)

    s = sub.add_parser("simulate", help="sample counts files from a noise model")
    s.add_argument("model")
    s.add_argument(
        "--experiment", choices=["full", "pairs-with-spectators", "singles", "clusters"], required=True
    )
    s.add_argument("--shots", type=int, default=io.DEFAULT_SHOTS)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--clusters", type=_clusters)
    s.add_argument("--isolated", action="store_true", help="measure subsystems alone, other qubits idle")
    s.add_argument("-o", "--output", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("cost", help="circuit count for an MFM construction strategy")
    s.add_argument("n", type=int, nargs="?")
    s.add_argument("strategy", nargs="?", help="full, singles, pairs, triples, split(k)")
    s.add_argument("-k", type=int)
    s.add_argument("--curves", type=int, metavar="NMAX", help="emit cost curves for n = 1..NMAX")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_cost)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if getattr(args, "seed", 0) is None:
        args.seed = _default_seed()
    if args.command == "scf" and not args.clusters and not args.layout:
        parser.error("scf needs --layout (pairs mode) or --clusters")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
