"""Toy design-space alignment driven by the support simulator.

A two-dimensional Gaussian policy emits latents that decode into tabletop
solids (deck on a centered leg).  Per prompt, several candidates are
sampled, scored with the full support simulation, turned into preference
pairs (lower normalized support volume wins) and used for an offset
preference-loss gradient step on the policy parameters.  The reference
policy is the frozen initial one.

Everything is seeded: prompt geometry, per-step sampling and the held-out
evaluation all derive from explicit seed sequences, so runs are exactly
reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError
from .mesh import PrintSetup
from .metrics import ComparisonResult, sec
from .preference import (
    AlignmentConfig,
    SampleRecord,
    enumerate_pairs,
    loss_gradients,
    odpo_loss,
    pair_logprobs,
)
from .shapes import extrude_profile, tabletop_profile
from .simulate import simulate

_GEOMETRY_ROOT = 9021
_HELDOUT_OFFSET = 10_000
_LOG_2PI = math.log(2.0 * math.pi)

# decode clamps: overhang ratio and deck thickness scale
_RATIO_LO, _RATIO_HI = 0.1, 3.0
_THICK_LO, _THICK_HI = 0.5, 1.5
_DECODE_GAIN = 0.8


@dataclass(frozen=True)
class PromptGeometry:
    """Fixed per-prompt part dimensions; the policy only picks the deck."""

    prompt_id: str
    leg_width: float
    leg_height: float
    thickness: float
    depth: float


def prompt_geometry(index: int) -> PromptGeometry:
    rng = np.random.default_rng(np.random.SeedSequence([_GEOMETRY_ROOT, index]))
    return PromptGeometry(
        prompt_id=f"prompt-{index:05d}",
        leg_width=float(rng.uniform(0.8, 1.2)),
        leg_height=float(rng.uniform(0.8, 1.6)),
        thickness=float(rng.uniform(0.3, 0.5)),
        depth=float(rng.uniform(0.8, 1.2)),
    )


def decode_latent(latent, geom: PromptGeometry):
    """Map a 2d latent to (span, thickness); clamped so geometry stays valid."""
    a = float(latent[0])
    b = float(latent[1])
    ratio = min(max(1.0 + _DECODE_GAIN * a, _RATIO_LO), _RATIO_HI)
    span = geom.leg_width * (1.0 + ratio)
    scale = min(max(1.0 + 0.25 * b, _THICK_LO), _THICK_HI)
    return span, geom.thickness * scale


def tabletop_mesh(latent, geom: PromptGeometry):
    span, thickness = decode_latent(latent, geom)
    profile = tabletop_profile(geom.leg_width, geom.leg_height, span, thickness)
    return extrude_profile(profile, geom.depth, name=geom.prompt_id)


def sample_nsv(latent, geom: PromptGeometry, setup: PrintSetup) -> float:
    return simulate(tabletop_mesh(latent, geom), setup).nsv


class GaussianPolicy:
    """Diagonal Gaussian over 2d latents; parameters are mean and log-sigma."""

    def __init__(self, mean=(0.0, 0.0), log_sigma=(0.0, 0.0)):
        self.mean = np.asarray(mean, dtype=np.float64).copy()
        self.log_sigma = np.asarray(log_sigma, dtype=np.float64).copy()

    def copy(self) -> "GaussianPolicy":
        return GaussianPolicy(self.mean, self.log_sigma)

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return self.mean + self.sigma * rng.standard_normal((count, 2))

    def log_density(self, latents) -> np.ndarray:
        u = np.atleast_2d(np.asarray(latents, dtype=np.float64))
        z = (u - self.mean) / self.sigma
        return -0.5 * np.sum(z * z, axis=1) - np.sum(self.log_sigma) - _LOG_2PI

    def grad_log_density(self, latents):
        """Returns (d/d mean, d/d log_sigma) of log density, per latent row."""
        u = np.atleast_2d(np.asarray(latents, dtype=np.float64))
        z = (u - self.mean) / self.sigma
        return z / self.sigma, z * z - 1.0


@dataclass(frozen=True)
class TrajectoryPoint:
    step: int
    mean_nsv: float
    loss: float


@dataclass
class ToyAlignmentResult:
    config: AlignmentConfig
    steps: int
    seed: int
    trajectory: list[TrajectoryPoint]
    policy: GaussianPolicy
    reference: GaussianPolicy
    prompts: list[PromptGeometry] = field(default_factory=list)

    @property
    def initial_mean_nsv(self) -> float:
        return self.trajectory[0].mean_nsv

    @property
    def final_mean_nsv(self) -> float:
        return self.trajectory[-1].mean_nsv


def _sample_rng(seed: int, step: int, prompt_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, step, prompt_index]))


def run_toy_alignment(
    config: AlignmentConfig | None = None,
    steps: int = 200,
    seed: int = 0,
    n_prompts: int = 12,
    samples_per_prompt: int = 10,
    learning_rate: float = 0.05,
) -> ToyAlignmentResult:
    """Gradient-descend the policy on the mean pair loss.

    Trajectory rows cover steps 0..steps inclusive; row k is measured on
    samples drawn from the policy after k updates, so steps=0 just scores
    the initial policy.  Raises DivergenceError when parameters or the
    loss stop being finite.
    """
    if config is None:
        config = AlignmentConfig()
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if n_prompts < 1 or samples_per_prompt < 2:
        raise ValueError("need at least 1 prompt and 2 samples per prompt")

    setup = PrintSetup()
    prompts = [prompt_geometry(i) for i in range(n_prompts)]
    policy = GaussianPolicy()
    reference = policy.copy()

    trajectory: list[TrajectoryPoint] = []
    for step in range(steps + 1):
        records: list[SampleRecord] = []
        latent_lookup: dict[str, np.ndarray] = {}
        for p_idx, geom in enumerate(prompts):
            rng = _sample_rng(seed, step, p_idx)
            latents = policy.sample(rng, samples_per_prompt)
            for s_idx in range(samples_per_prompt):
                sample_id = f"s{s_idx:02d}"
                nsv = sample_nsv(latents[s_idx], geom, setup)
                records.append(SampleRecord(geom.prompt_id, sample_id, nsv))
                latent_lookup[f"{geom.prompt_id}/{sample_id}"] = latents[s_idx]

        mean_nsv = float(np.mean([r.nsv for r in records]))
        enum = enumerate_pairs(records, config)

        loss = 0.0
        if enum.pairs:
            keys = list(latent_lookup)
            latents_all = np.vstack([latent_lookup[k] for k in keys])
            policy_table = dict(zip(keys, policy.log_density(latents_all)))
            ref_table = dict(zip(keys, reference.log_density(latents_all)))
            lp = pair_logprobs(enum.pairs, policy_table, ref_table)
            offsets = np.array([p.offset for p in enum.pairs])
            loss = float(np.mean(odpo_loss(lp, offsets, config.beta)))
        if not math.isfinite(loss) or not math.isfinite(mean_nsv):
            raise DivergenceError(step)
        trajectory.append(TrajectoryPoint(step, mean_nsv, loss))

        if step == steps:
            break
        if enum.pairs:
            g = loss_gradients(lp, offsets, config.beta).logp_w  # (n_pairs,)
            u_w = np.vstack(
                [latent_lookup[f"{p.prompt_id}/{p.winner_id}"] for p in enum.pairs]
            )
            u_l = np.vstack(
                [latent_lookup[f"{p.prompt_id}/{p.loser_id}"] for p in enum.pairs]
            )
            dm_w, ds_w = policy.grad_log_density(u_w)
            dm_l, ds_l = policy.grad_log_density(u_l)
            n_pairs = len(enum.pairs)
            grad_mean = (g[:, None] * (dm_w - dm_l)).sum(axis=0) / n_pairs
            grad_log_sigma = (g[:, None] * (ds_w - ds_l)).sum(axis=0) / n_pairs
            policy.mean -= learning_rate * grad_mean
            policy.log_sigma -= learning_rate * grad_log_sigma
            if not (
                np.all(np.isfinite(policy.mean))
                and np.all(np.isfinite(policy.log_sigma))
            ):
                raise DivergenceError(step + 1)

    return ToyAlignmentResult(
        config=config,
        steps=steps,
        seed=seed,
        trajectory=trajectory,
        policy=policy,
        reference=reference,
        prompts=prompts,
    )


def heldout_sec(
    result: ToyAlignmentResult,
    n_prompts: int = 60,
    samples_per_prompt: int = 10,
    seed: int = 0,
) -> ComparisonResult:
    """Compare the aligned policy against its reference on fresh prompts.

    Both policies are sampled with identical per-prompt seeds; scores are
    per-prompt mean NSV, and the comparison counts wins and ties for the
    aligned side.
    """
    setup = PrintSetup()
    ours: dict[str, list[float]] = {}
    baseline: dict[str, list[float]] = {}
    for i in range(n_prompts):
        geom = prompt_geometry(_HELDOUT_OFFSET + i)
        rng_ours = _sample_rng(seed, _HELDOUT_OFFSET + i, 0)
        rng_base = _sample_rng(seed, _HELDOUT_OFFSET + i, 1)
        ours[geom.prompt_id] = [
            sample_nsv(u, geom, setup)
            for u in result.policy.sample(rng_ours, samples_per_prompt)
        ]
        baseline[geom.prompt_id] = [
            sample_nsv(u, geom, setup)
            for u in result.reference.sample(rng_base, samples_per_prompt)
        ]
    return sec(ours, baseline, tie_threshold=result.config.tie_threshold)
