"""Dataset-level support metrics.

Two aggregate NSV flavors: volume-weighted (total support over total mesh
volume, so large parts dominate) and the arithmetic mean of per-entry NSV.
``sec`` scores one dataset against a baseline over a shared prompt set:
the fraction of prompts where it is at least as good (win or tie).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

DEFAULT_TIE_THRESHOLD = 1e-3


@dataclass(frozen=True)
class DatasetScores:
    n_entries: int
    nsv_weighted: float
    nsv_star: float


@dataclass(frozen=True)
class ComparisonResult:
    n_prompts: int
    wins: int
    ties: int
    losses: int
    sec: float


def nsv_weighted(mesh_volumes: Iterable[float], support_volumes: Iterable[float]) -> float:
    """Total support volume over total mesh volume."""
    mv = np.asarray(list(mesh_volumes), dtype=np.float64)
    sv = np.asarray(list(support_volumes), dtype=np.float64)
    if mv.shape != sv.shape:
        raise ValueError("mesh_volumes and support_volumes must have equal length")
    if mv.size == 0:
        raise ValueError("cannot aggregate an empty dataset")
    total_mesh = float(mv.sum())
    if total_mesh <= 0.0:
        raise ValueError("total mesh volume must be positive")
    return float(sv.sum()) / total_mesh


def nsv_star(nsv_values: Iterable[float]) -> float:
    """Arithmetic mean of per-entry NSV."""
    values = np.asarray(list(nsv_values), dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot aggregate an empty dataset")
    return float(values.mean())


def dataset_scores(mesh_volumes, support_volumes) -> DatasetScores:
    mv = np.asarray(list(mesh_volumes), dtype=np.float64)
    sv = np.asarray(list(support_volumes), dtype=np.float64)
    return DatasetScores(
        n_entries=int(mv.size),
        nsv_weighted=nsv_weighted(mv, sv),
        nsv_star=nsv_star(sv / mv),
    )


def _per_prompt_nsv(dataset: Mapping[str, object]) -> dict[str, float]:
    """Normalize a {prompt_id: nsv or sequence of nsv} mapping to one
    representative (mean) NSV per prompt."""
    out: dict[str, float] = {}
    for prompt_id, value in dataset.items():
        if np.isscalar(value):
            out[prompt_id] = float(value)  # type: ignore[arg-type]
        else:
            arr = np.asarray(value, dtype=np.float64).reshape(-1)
            if arr.size == 0:
                raise ValueError(f"prompt {prompt_id!r} has no samples")
            out[prompt_id] = float(arr.mean())
    return out


def sec(
    ours: Mapping[str, object],
    baseline: Mapping[str, object],
    tie_threshold: float = DEFAULT_TIE_THRESHOLD,
) -> ComparisonResult:
    """Support-efficiency comparison over a shared prompt set.

    Both mappings are keyed by prompt id; values are one NSV per prompt or a
    sequence of per-sample NSVs (averaged).  A prompt is a tie when the NSV
    difference is within ``tie_threshold``, a win when ours is lower.
    sec = (wins + ties) / n.
    """
    if tie_threshold < 0.0:
        raise ValueError("tie_threshold must be >= 0")
    a = _per_prompt_nsv(ours)
    b = _per_prompt_nsv(baseline)
    if a.keys() != b.keys():
        only_ours = sorted(a.keys() - b.keys())
        only_base = sorted(b.keys() - a.keys())
        raise ValueError(
            "prompt sets differ: "
            f"only in ours {only_ours}, only in baseline {only_base}"
        )
    if not a:
        raise ValueError("cannot compare empty datasets")

    wins = ties = losses = 0
    for prompt_id, ours_nsv in a.items():
        delta = ours_nsv - b[prompt_id]
        if abs(delta) <= tie_threshold:
            ties += 1
        elif delta < 0.0:
            wins += 1
        else:
            losses += 1
    n = len(a)
    return ComparisonResult(
        n_prompts=n,
        wins=wins,
        ties=ties,
        losses=losses,
        sec=(wins + ties) / n,
    )
