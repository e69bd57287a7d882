"""Preference pairs and offset preference-optimization losses.

Samples are ranked by NSV (lower is better; the implied reward is -NSV).
For every prompt, all unordered sample pairs whose NSV difference exceeds
the tie threshold become (winner, loser) training pairs.  Each pair carries
an offset that grows with the quality gap, which the loss must clear:

    z      = beta * [(logp_w - ref_logp_w) - (logp_l - ref_logp_l)]
    L      = -log sigmoid(z - offset)
    offset = alpha * log1p(nsv_l - nsv_w)    (or 0 when disabled)

With offset 0 the loss reduces exactly to the plain preference loss.  All
loss/gradient functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

OFFSET_LOG1P = "log1p"
OFFSET_NONE = "none"

DEFAULT_TIE_THRESHOLD = 1e-3


@dataclass(frozen=True)
class SampleRecord:
    prompt_id: str
    sample_id: str
    nsv: float


@dataclass(frozen=True)
class PreferencePair:
    prompt_id: str
    winner_id: str
    loser_id: str
    nsv_w: float
    nsv_l: float
    delta_r: float  # nsv_l - nsv_w, always > 0
    offset: float  # >= 0

    def __post_init__(self):
        if not self.delta_r > 0.0:
            raise ValueError("delta_r must be positive (loser NSV above winner)")
        if self.offset < 0.0:
            raise ValueError("offset must be >= 0")


@dataclass(frozen=True)
class AlignmentConfig:
    alpha: float = 1.0
    offset_fn: str = OFFSET_LOG1P
    beta: float = 1.0
    tie_threshold: float = DEFAULT_TIE_THRESHOLD

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ValueError("alpha must be >= 0")
        if self.offset_fn not in (OFFSET_LOG1P, OFFSET_NONE):
            raise ValueError(
                f"offset_fn must be {OFFSET_LOG1P!r} or {OFFSET_NONE!r}"
            )
        if not self.beta > 0.0:
            raise ValueError("beta must be > 0")
        if self.tie_threshold < 0.0:
            raise ValueError("tie_threshold must be >= 0")


@dataclass(frozen=True)
class PolicyLogProbs:
    """Policy and frozen-reference log-likelihoods of a winner/loser pair.
    Fields may be floats or equally-shaped numpy arrays."""

    logp_w: object
    logp_l: object
    ref_logp_w: object
    ref_logp_l: object


class PairEnumeration(NamedTuple):
    pairs: list[PreferencePair]
    skipped_prompts: int  # prompts that produced no usable pair


class LossGradients(NamedTuple):
    logp_w: object
    logp_l: object
    ref_logp_w: object
    ref_logp_l: object


def compute_offset(delta_r: float, config: AlignmentConfig) -> float:
    """Loss offset for a pair with reward gap ``delta_r`` (= nsv_l - nsv_w).

    log1p keeps the offset finite and zero-anchored for small gaps.
    """
    if not delta_r > 0.0:
        raise ValueError(
            f"offset requires a positive reward gap, got delta_r={delta_r}"
        )
    if config.offset_fn == OFFSET_NONE:
        return 0.0
    return config.alpha * math.log1p(delta_r)


def enumerate_pairs(
    samples: Iterable[SampleRecord], config: AlignmentConfig
) -> PairEnumeration:
    """All per-prompt (winner, loser) pairs with NSV gap above the tie
    threshold.  The sample with lower NSV wins.  Prompts contributing no
    pair (fewer than two samples, or all gaps within ties) are counted in
    ``skipped_prompts``.

    Pair order is deterministic: prompts in first-appearance order, sample
    pairs in input order.
    """
    by_prompt: dict[str, list[SampleRecord]] = {}
    for record in samples:
        by_prompt.setdefault(record.prompt_id, []).append(record)

    pairs: list[PreferencePair] = []
    skipped = 0
    for prompt_id, records in by_prompt.items():
        emitted = 0
        for i in range(len(records)):
            for j in range(i + 1, len(records)):
                a, b = records[i], records[j]
                gap = abs(a.nsv - b.nsv)
                if gap <= config.tie_threshold:
                    continue
                winner, loser = (a, b) if a.nsv < b.nsv else (b, a)
                delta_r = loser.nsv - winner.nsv
                pairs.append(
                    PreferencePair(
                        prompt_id=prompt_id,
                        winner_id=winner.sample_id,
                        loser_id=loser.sample_id,
                        nsv_w=winner.nsv,
                        nsv_l=loser.nsv,
                        delta_r=delta_r,
                        offset=compute_offset(delta_r, config),
                    )
                )
                emitted += 1
        if emitted == 0:
            skipped += 1
    return PairEnumeration(pairs=pairs, skipped_prompts=skipped)


# ---------------------------------------------------------------------------
# losses


def logit_margin(lp: PolicyLogProbs, beta: float = 1.0):
    """z = beta * [(logp_w - ref_logp_w) - (logp_l - ref_logp_l)]."""
    if not beta > 0.0:
        raise ValueError("beta must be > 0")
    return beta * (
        (np.asarray(lp.logp_w) - np.asarray(lp.ref_logp_w))
        - (np.asarray(lp.logp_l) - np.asarray(lp.ref_logp_l))
    )


def odpo_loss(lp: PolicyLogProbs, offset=0.0, beta: float = 1.0):
    """-log sigmoid(z - offset), in log-sum-exp form so it stays finite and
    accurate for |z| up to ~1e3."""
    z = logit_margin(lp, beta)
    return np.logaddexp(0.0, -(z - np.asarray(offset)))


def dpo_loss(lp: PolicyLogProbs, beta: float = 1.0):
    """Plain preference loss: the offset loss with offset exactly 0."""
    return odpo_loss(lp, 0.0, beta)


def _sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def loss_gradients(lp: PolicyLogProbs, offset=0.0, beta: float = 1.0) -> LossGradients:
    """Analytic partials of the offset loss w.r.t. the four log-likelihoods.

    d/d logp_w = beta * (sigmoid(z - offset) - 1); the loser partial is its
    negation and the reference partials mirror the policy ones with opposite
    sign, so the four always sum to zero.
    """
    z = logit_margin(lp, beta)
    g = beta * (_sigmoid(z - np.asarray(offset)) - 1.0)
    return LossGradients(logp_w=g, logp_l=-g, ref_logp_w=-g, ref_logp_l=g)


def pair_logprobs(
    pairs: Sequence[PreferencePair],
    policy_logp: dict[str, float],
    reference_logp: dict[str, float],
) -> PolicyLogProbs:
    """Bundle per-pair log-likelihood arrays.

    Both tables are keyed by "prompt_id/sample_id".
    """
    def gather(table, ids):
        return np.array([table[i] for i in ids], dtype=np.float64)

    w_ids = [f"{p.prompt_id}/{p.winner_id}" for p in pairs]
    l_ids = [f"{p.prompt_id}/{p.loser_id}" for p in pairs]
    return PolicyLogProbs(
        logp_w=gather(policy_logp, w_ids),
        logp_l=gather(policy_logp, l_ids),
        ref_logp_w=gather(reference_logp, w_ids),
        ref_logp_l=gather(reference_logp, l_ids),
    )
