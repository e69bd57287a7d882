"""Command-line interface.

Subcommands cover single-mesh analysis, manifest batches, preference-pair
construction, report comparison, the toy alignment experiment and the voxel
oracle cross-check.  Exit status: 0 success, 2 input error, 3 geometric
precondition failure, 4 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import DivergenceError, GeometryError, ParseError
from .mesh import (
    PrintSetup,
    load_mesh,
    transform_to_print_frame,
    validate,
    write_ply_colored,
)
from .preference import AlignmentConfig
from .metrics import dataset_scores, sec
from .records import (
    ReportRow,
    format_float,
    parse_manifest,
    read_report_csv,
    report_csv_bytes,
    report_rows_to_samples,
    write_pairs_csv,
    write_trajectory_csv,
)
from .preference import enumerate_pairs
from .simulate import classify_faces, simulate
from .toyalign import heldout_sec, run_toy_alignment
from .voxel import voxel_support_oracle


def _parse_direction(text: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"direction must be three comma-separated numbers, got {text!r}")
    return np.array([float(p) for p in parts], dtype=np.float64)


def _setup_from_args(args) -> PrintSetup:
    return PrintSetup(
        direction=_parse_direction(args.dir),
        alpha_max_degrees=args.alpha_max,
        bed_offset=args.bed_offset,
    )


def _add_setup_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--dir",
        default="0,0,1",
        help="build direction as x,y,z (default: 0,0,1)",
    )
    p.add_argument(
        "--alpha-max",
        type=float,
        default=45.0,
        metavar="DEG",
        help="self-support angle in degrees (default: 45)",
    )
    p.add_argument(
        "--bed-offset",
        type=float,
        default=None,
        metavar="H",
        help="place the lowest point H above the bed; default keeps the "
        "file's placement, lifting only parts below the bed",
    )


def _analyzed_report(path, setup):
    """Load, orient, simulate.  Returns the oriented mesh, the setup
    rewritten for the print frame (the requested direction is +Z after the
    transform) and the report."""
    mesh = transform_to_print_frame(load_mesh(path), setup)
    frame = PrintSetup(
        alpha_max_degrees=setup.alpha_max_degrees, bed_offset=setup.bed_offset
    )
    return mesh, frame, simulate(mesh, frame)


def cmd_analyze(args) -> int:
    setup = _setup_from_args(args)
    mesh, frame, report = _analyzed_report(args.mesh, setup)
    check = validate(mesh)
    classification = classify_faces(mesh, frame)
    print(f"mesh: {mesh.source_name}")
    print(
        f"faces: {mesh.n_faces} (risky {report.risky_count}, "
        f"degenerate {check.degenerate_face_count})"
    )
    print(f"watertight: {'true' if report.watertight else 'false'}")
    print(f"mesh volume: {format_float(report.mesh_volume)}")
    print(f"support volume: {format_float(report.support_volume)}")
    print(f"NSV: {report.nsv:.6f}")
    print(f"risky area: {format_float(report.risky_area)}")
    if args.json:
        payload = {
            "mesh": mesh.source_name,
            "file": str(args.mesh),
            "mesh_volume": report.mesh_volume,
            "support_volume": report.support_volume,
            "nsv": report.nsv,
            "risky_count": report.risky_count,
            "risky_area": report.risky_area,
            "column_count": report.column_count,
            "watertight": report.watertight,
            "alpha_max_degrees": setup.alpha_max_degrees,
            "direction": [float(c) for c in setup.direction],
        }
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    if args.ply:
        write_ply_colored(mesh, classification.risky, args.ply)
    return 0


def _batch_row(entry, setup):
    _, _, report = _analyzed_report(entry.mesh_path, setup)
    return ReportRow(
        prompt_id=entry.prompt_id,
        sample_id=entry.sample_id,
        file=entry.mesh_path,
        mesh_volume=report.mesh_volume,
        support_volume=report.support_volume,
        nsv=report.nsv,
        risky_count=report.risky_count,
        risky_area=report.risky_area,
        watertight=report.watertight,
    )


def cmd_batch(args) -> int:
    setup = _setup_from_args(args)
    entries = parse_manifest(args.manifest)

    def work(entry):
        try:
            return _batch_row(entry, setup), None
        except Exception as exc:  # noqa: BLE001 - per-row failures must not kill the batch
            return None, f"error: {entry.prompt_id}: {entry.mesh_path}: {exc}"

    if args.parallel > 1:
        with ThreadPoolExecutor(max_workers=args.parallel) as pool:
            results = list(pool.map(work, entries))
    else:
        results = [work(e) for e in entries]

    rows = [row for row, _ in results if row is not None]
    for _, err in results:
        if err is not None:
            print(err, file=sys.stderr)
    data = report_csv_bytes(rows)
    if args.out == "-":
        sys.stdout.buffer.write(data)
    else:
        with open(args.out, "wb") as fh:
            fh.write(data)
    print(
        f"wrote {len(rows)} of {len(entries)} report rows to {args.out}",
        file=sys.stderr,
    )
    return 0


def cmd_pairs(args) -> int:
    config = AlignmentConfig(
        alpha=args.alpha,
        offset_fn=args.offset,
        beta=args.beta,
        tie_threshold=args.tie,
    )
    samples = report_rows_to_samples(read_report_csv(args.report))
    enum = enumerate_pairs(samples, config)
    write_pairs_csv(enum.pairs, args.out)
    print(
        f"pairs: {len(enum.pairs)} (prompts skipped: {enum.skipped_prompts}) -> {args.out}"
    )
    return 0


def _grouped_nsv(rows):
    grouped: dict[str, list[float]] = {}
    for r in rows:
        grouped.setdefault(r.prompt_id, []).append(r.nsv)
    return grouped


def cmd_compare(args) -> int:
    ours_rows = read_report_csv(args.ours)
    base_rows = read_report_csv(args.baseline)
    ours_scores = dataset_scores(
        [r.mesh_volume for r in ours_rows], [r.support_volume for r in ours_rows]
    )
    base_scores = dataset_scores(
        [r.mesh_volume for r in base_rows], [r.support_volume for r in base_rows]
    )
    comparison = sec(
        _grouped_nsv(ours_rows), _grouped_nsv(base_rows), tie_threshold=args.tie
    )
    print(f"{'metric':<14}{'ours':>12}{'baseline':>12}")
    print(
        f"{'nsv_weighted':<14}{ours_scores.nsv_weighted:>12.6f}"
        f"{base_scores.nsv_weighted:>12.6f}"
    )
    print(
        f"{'nsv_star':<14}{ours_scores.nsv_star:>12.6f}"
        f"{base_scores.nsv_star:>12.6f}"
    )
    print(f"{'sec':<14}{comparison.sec:>12.3f}")
    payload = {
        "ours": {
            "n_entries": ours_scores.n_entries,
            "nsv_weighted": ours_scores.nsv_weighted,
            "nsv_star": ours_scores.nsv_star,
        },
        "baseline": {
            "n_entries": base_scores.n_entries,
            "nsv_weighted": base_scores.nsv_weighted,
            "nsv_star": base_scores.nsv_star,
        },
        "sec": comparison.sec,
        "wins": comparison.wins,
        "ties": comparison.ties,
        "losses": comparison.losses,
        "n_prompts": comparison.n_prompts,
        "tie_threshold": args.tie,
    }
    print(json.dumps(payload))
    return 0


def cmd_toy_align(args) -> int:
    config = AlignmentConfig(alpha=args.alpha, offset_fn=args.offset, beta=args.beta)
    result = run_toy_alignment(
        config=config,
        steps=args.steps,
        seed=args.seed,
        n_prompts=args.prompts,
        samples_per_prompt=args.samples,
        learning_rate=args.learning_rate,
    )
    if args.out:
        write_trajectory_csv(result.trajectory, args.out)
    print(f"initial mean NSV: {result.initial_mean_nsv:.6f}")
    if args.steps > 0:
        print(f"final mean NSV: {result.final_mean_nsv:.6f}")
        reduction = 1.0 - result.final_mean_nsv / result.initial_mean_nsv
        print(f"reduction: {100.0 * reduction:.1f}%")
    if args.heldout > 0:
        comparison = heldout_sec(result, n_prompts=args.heldout, seed=args.seed)
        print(f"held-out SEC vs initial policy ({args.heldout} prompts): "
              f"{comparison.sec:.3f}")
    return 0


def cmd_oracle(args) -> int:
    setup = _setup_from_args(args)
    mesh, frame, report = _analyzed_report(args.mesh, setup)
    voxel = voxel_support_oracle(mesh, frame, resolution=args.resolution)
    tetra = report.support_volume
    denom = max(abs(tetra), abs(voxel))
    gap = 0.0 if denom == 0.0 else abs(tetra - voxel) / denom
    print(f"tetrahedra support volume: {format_float(tetra)}")
    print(f"voxel support volume (resolution {args.resolution}): {format_float(voxel)}")
    print(f"relative gap: {100.0 * gap:.3f}%")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="supportsim",
        description="Support-structure simulation and preference tooling for "
        "3D-printable meshes.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="simulate supports for one mesh")
    pa.add_argument("mesh", help="STL or OBJ file")
    _add_setup_flags(pa)
    pa.add_argument("--json", metavar="PATH", help="also write a JSON report")
    pa.add_argument(
        "--ply", metavar="PATH", help="write a PLY with risky faces colored"
    )
    pa.set_defaults(func=cmd_analyze)

    pb = sub.add_parser("batch", help="simulate every mesh in a manifest")
    pb.add_argument("manifest", help="TSV manifest: prompt_id, prompt_text, mesh_path")
    pb.add_argument("--out", required=True, help="report CSV path ('-' for stdout)")
    pb.add_argument("--parallel", type=int, default=1, metavar="N")
    _add_setup_flags(pb)
    pb.set_defaults(func=cmd_batch)

    pp = sub.add_parser("pairs", help="build preference pairs from a report CSV")
    pp.add_argument("report", help="report CSV from the batch command")
    pp.add_argument("--alpha", type=float, default=1.0)
    pp.add_argument("--beta", type=float, default=1.0)
    pp.add_argument("--tie", type=float, default=1e-3)
    pp.add_argument("--offset", choices=["log1p", "none"], default="log1p")
    pp.add_argument("--out", required=True, help="pairs CSV path")
    pp.set_defaults(func=cmd_pairs)

    pc = sub.add_parser("compare", help="compare two report CSVs")
    pc.add_argument("ours")
    pc.add_argument("baseline")
    pc.add_argument("--tie", type=float, default=1e-3)
    pc.set_defaults(func=cmd_compare)

    pt = sub.add_parser("toy-align", help="run the toy preference alignment")
    pt.add_argument("--steps", type=int, default=200)
    pt.add_argument("--seed", type=int, default=0)
    pt.add_argument("--alpha", type=float, default=1.0)
    pt.add_argument("--beta", type=float, default=1.0)
    pt.add_argument("--offset", choices=["log1p", "none"], default="log1p")
    pt.add_argument("--learning-rate", type=float, default=0.05)
    pt.add_argument("--prompts", type=int, default=12)
    pt.add_argument("--samples", type=int, default=10)
    pt.add_argument(
        "--heldout",
        type=int,
        default=0,
        metavar="N",
        help="also score the aligned policy on N held-out prompts",
    )
    pt.add_argument("--out", metavar="PATH", help="trajectory CSV path")
    pt.set_defaults(func=cmd_toy_align)

    po = sub.add_parser(
        "oracle", help="cross-check support volume against the voxel oracle"
    )
    po.add_argument("mesh")
    po.add_argument("--resolution", type=int, default=128)
    _add_setup_flags(po)
    po.set_defaults(func=cmd_oracle)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GeometryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
