"""Text record formats: batch manifests, report/pairs CSVs, trajectories.

Report and pairs files carry a leading version column and readers reject
versions they do not understand.  Floats are serialized with 17 significant
digits so values survive a write/read round trip bit-for-bit.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

from .errors import ParseError
from .preference import PreferencePair, SampleRecord

REPORT_VERSION = "1"
PAIRS_VERSION = "1"

REPORT_HEADER = [
    "version",
    "prompt_id",
    "sample_id",
    "file",
    "mesh_volume",
    "support_volume",
    "nsv",
    "risky_count",
    "risky_area",
    "watertight",
]

PAIRS_HEADER = [
    "version",
    "prompt_id",
    "winner_id",
    "loser_id",
    "nsv_w",
    "nsv_l",
    "delta_r",
    "offset",
]

TRAJECTORY_HEADER = ["step", "mean_nsv", "loss"]


def format_float(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class ManifestEntry:
    prompt_id: str
    prompt_text: str
    mesh_path: str
    sample_id: str = "s0"


def parse_manifest(path) -> list[ManifestEntry]:
    """Read a tab-separated manifest: prompt_id, prompt_text, mesh_path and
    an optional sample_id column.  '#' lines and blank lines are skipped;
    relative mesh paths resolve against the manifest's directory."""
    path = Path(path)
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read manifest {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = [c.strip() for c in line.split("\t")]
        if len(cols) not in (3, 4):
            raise ParseError(
                f"{path}:{lineno}: expected 3 or 4 tab-separated columns, got {len(cols)}"
            )
        prompt_id, prompt_text, mesh_path = cols[0], cols[1], cols[2]
        sample_id = cols[3] if len(cols) == 4 else "s0"
        if not prompt_id:
            raise ParseError(f"{path}:{lineno}: empty prompt_id")
        if prompt_id in seen:
            raise ParseError(f"{path}:{lineno}: duplicate prompt_id {prompt_id!r}")
        seen.add(prompt_id)
        mesh = Path(mesh_path)
        if not mesh.is_absolute():
            mesh = base / mesh
        entries.append(ManifestEntry(prompt_id, prompt_text, str(mesh), sample_id))
    return entries


@dataclass(frozen=True)
class ReportRow:
    prompt_id: str
    sample_id: str
    file: str
    mesh_volume: float
    support_volume: float
    nsv: float
    risky_count: int
    risky_area: float
    watertight: bool


def _open_text_out(path):
    return open(path, "w", encoding="utf-8", newline="")


def report_csv_bytes(rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for r in rows:
        w.writerow(
            [
                REPORT_VERSION,
                r.prompt_id,
                r.sample_id,
                r.file,
                format_float(r.mesh_volume),
                format_float(r.support_volume),
                format_float(r.nsv),
                str(int(r.risky_count)),
                format_float(r.risky_area),
                "true" if r.watertight else "false",
            ]
        )
    return buf.getvalue().encode("utf-8")


def write_report_csv(rows, path) -> None:
    Path(path).write_bytes(report_csv_bytes(rows))


def _check_header(actual, expected, path):
    if actual != expected:
        raise ParseError(
            f"{path}: unexpected CSV header {actual!r}; expected {expected!r}"
        )


def read_report_csv(path) -> list[ReportRow]:
    path = Path(path)
    rows: list[ReportRow] = []
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise ParseError(f"cannot read report {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty report file")
        _check_header(header, REPORT_HEADER, path)
        for lineno, cols in enumerate(reader, start=2):
            if not cols:
                continue
            if len(cols) != len(REPORT_HEADER):
                raise ParseError(
                    f"{path}:{lineno}: expected {len(REPORT_HEADER)} columns, got {len(cols)}"
                )
            if cols[0] != REPORT_VERSION:
                raise ParseError(
                    f"{path}:{lineno}: unsupported report version {cols[0]!r}"
                )
            try:
                rows.append(
                    ReportRow(
                        prompt_id=cols[1],
                        sample_id=cols[2],
                        file=cols[3],
                        mesh_volume=float(cols[4]),
                        support_volume=float(cols[5]),
                        nsv=float(cols[6]),
                        risky_count=int(cols[7]),
                        risky_area=float(cols[8]),
                        watertight=cols[9] == "true",
                    )
                )
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad field value: {exc}") from exc
    return rows


def report_rows_to_samples(rows) -> list[SampleRecord]:
    return [SampleRecord(r.prompt_id, r.sample_id, r.nsv) for r in rows]


def pairs_csv_bytes(pairs) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PAIRS_HEADER)
    for p in pairs:
        w.writerow(
            [
                PAIRS_VERSION,
                p.prompt_id,
                p.winner_id,
                p.loser_id,
                format_float(p.nsv_w),
                format_float(p.nsv_l),
                format_float(p.delta_r),
                format_float(p.offset),
            ]
        )
    return buf.getvalue().encode("utf-8")


def write_pairs_csv(pairs, path) -> None:
    Path(path).write_bytes(pairs_csv_bytes(pairs))


def read_pairs_csv(path) -> list[PreferencePair]:
    path = Path(path)
    out: list[PreferencePair] = []
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise ParseError(f"cannot read pairs file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError(f"{path}: empty pairs file")
        _check_header(header, PAIRS_HEADER, path)
        for lineno, cols in enumerate(reader, start=2):
            if not cols:
                continue
            if len(cols) != len(PAIRS_HEADER):
                raise ParseError(
                    f"{path}:{lineno}: expected {len(PAIRS_HEADER)} columns, got {len(cols)}"
                )
            if cols[0] != PAIRS_VERSION:
                raise ParseError(
                    f"{path}:{lineno}: unsupported pairs version {cols[0]!r}"
                )
            try:
                out.append(
                    PreferencePair(
                        prompt_id=cols[1],
                        winner_id=cols[2],
                        loser_id=cols[3],
                        nsv_w=float(cols[4]),
                        nsv_l=float(cols[5]),
                        delta_r=float(cols[6]),
                        offset=float(cols[7]),
                    )
                )
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad field value: {exc}") from exc
    return out


def trajectory_csv_bytes(trajectory) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for p in trajectory:
        w.writerow([str(p.step), format_float(p.mean_nsv), format_float(p.loss)])
    return buf.getvalue().encode("utf-8")


def write_trajectory_csv(trajectory, path) -> None:
    Path(path).write_bytes(trajectory_csv_bytes(trajectory))
