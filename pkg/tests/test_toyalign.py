import math

import numpy as np
import pytest

from supportsim import (
    DivergenceError,
    GaussianPolicy,
    PrintSetup,
    prompt_geometry,
    run_toy_alignment,
    simulate,
)
from supportsim.preference import AlignmentConfig
from supportsim.toyalign import (
    _HELDOUT_OFFSET,
    decode_latent,
    heldout_sec,
    sample_nsv,
    tabletop_mesh,
)

DEFAULT = PrintSetup()


class TestPrompts:
    def test_deterministic(self):
        a = prompt_geometry(3)
        b = prompt_geometry(3)
        assert a == b
        assert a.prompt_id == "prompt-00003"

    def test_distinct_across_indices(self):
        geoms = [prompt_geometry(i) for i in range(20)]
        assert len({g.leg_width for g in geoms}) == 20

    def test_dimension_ranges(self):
        for i in list(range(30)) + [_HELDOUT_OFFSET, _HELDOUT_OFFSET + 59]:
            g = prompt_geometry(i)
            assert 0.8 <= g.leg_width <= 1.2
            assert 0.8 <= g.leg_height <= 1.6
            assert 0.3 <= g.thickness <= 0.5
            assert 0.8 <= g.depth <= 1.2

    def test_heldout_indices_fresh(self):
        train_ids = {prompt_geometry(i).prompt_id for i in range(100)}
        held_ids = {
            prompt_geometry(_HELDOUT_OFFSET + i).prompt_id for i in range(100)
        }
        assert not (train_ids & held_ids)


class TestDecode:
    GEOM = prompt_geometry(0)

    def test_neutral_latent(self):
        span, thickness = decode_latent([0.0, 0.0], self.GEOM)
        assert span == pytest.approx(2.0 * self.GEOM.leg_width)
        assert thickness == pytest.approx(self.GEOM.thickness)

    def test_clamps(self):
        span_lo, t_lo = decode_latent([-100.0, -100.0], self.GEOM)
        span_hi, t_hi = decode_latent([100.0, 100.0], self.GEOM)
        assert span_lo == pytest.approx(1.1 * self.GEOM.leg_width)
        assert span_hi == pytest.approx(4.0 * self.GEOM.leg_width)
        assert t_lo == pytest.approx(0.5 * self.GEOM.thickness)
        assert t_hi == pytest.approx(1.5 * self.GEOM.thickness)

    def test_decoded_mesh_nsv_matches_analytic(self):
        geom = self.GEOM
        latent = [0.4, -0.2]
        span, thickness = decode_latent(latent, geom)
        w, h = geom.leg_width, geom.leg_height
        expected = (span - w) * h / (w * h + span * thickness)
        assert sample_nsv(latent, geom, DEFAULT) == pytest.approx(
            expected, rel=1e-12
        )

    def test_smaller_span_never_worse(self):
        geom = self.GEOM
        nsvs = [
            sample_nsv([a, 0.0], geom, DEFAULT) for a in (-0.8, -0.3, 0.0, 0.5, 1.0)
        ]
        assert all(x < y for x, y in zip(nsvs, nsvs[1:]))

    def test_mesh_is_watertight(self):
        report = simulate(tabletop_mesh([0.3, 0.1], self.GEOM), DEFAULT)
        assert report.watertight


class TestPolicy:
    def test_log_density_matches_formula(self):
        policy = GaussianPolicy(mean=(0.5, -1.0), log_sigma=(0.2, -0.3))
        u = np.array([[0.1, 0.4], [2.0, -2.0]])
        expected = []
        for row in u:
            total = 0.0
            for k in range(2):
                s = math.exp(policy.log_sigma[k])
                z = (row[k] - policy.mean[k]) / s
                total += -0.5 * z * z - math.log(s) - 0.5 * math.log(2 * math.pi)
            expected.append(total)
        np.testing.assert_allclose(policy.log_density(u), expected, rtol=1e-12)

    def test_density_integrates_to_one(self):
        policy = GaussianPolicy(mean=(0.3, -0.2), log_sigma=(0.1, -0.4))
        xs = np.linspace(-8, 8, 401)
        step = xs[1] - xs[0]
        gx, gy = np.meshgrid(xs, xs)
        grid = np.column_stack([gx.ravel(), gy.ravel()])
        mass = np.exp(policy.log_density(grid)).sum() * step * step
        assert mass == pytest.approx(1.0, rel=1e-6)

    def test_grad_log_density_finite_difference(self):
        policy = GaussianPolicy(mean=(0.2, -0.5), log_sigma=(0.3, -0.1))
        u = np.array([[0.7, -1.2]])
        gm, gs = policy.grad_log_density(u)
        eps = 1e-6
        for k in range(2):
            for attr, grad in (("mean", gm), ("log_sigma", gs)):
                hi = policy.copy()
                lo = policy.copy()
                getattr(hi, attr)[k] += eps
                getattr(lo, attr)[k] -= eps
                numeric = (
                    float(hi.log_density(u)[0]) - float(lo.log_density(u)[0])
                ) / (2 * eps)
                assert grad[0, k] == pytest.approx(numeric, rel=1e-6, abs=1e-9)

    def test_sampling_statistics(self):
        policy = GaussianPolicy(mean=(1.0, -2.0), log_sigma=(0.0, math.log(0.5)))
        rng = np.random.default_rng(9)
        draws = policy.sample(rng, 20000)
        np.testing.assert_allclose(draws.mean(axis=0), [1.0, -2.0], atol=0.02)
        np.testing.assert_allclose(draws.std(axis=0), [1.0, 0.5], atol=0.02)

    def test_copy_is_independent(self):
        policy = GaussianPolicy()
        clone = policy.copy()
        clone.mean += 1.0
        assert policy.mean[0] == 0.0


class TestTraining:
    def test_steps_zero_scores_initial_policy(self):
        out = run_toy_alignment(steps=0, n_prompts=2, samples_per_prompt=4)
        assert len(out.trajectory) == 1
        assert out.trajectory[0].step == 0
        np.testing.assert_array_equal(out.policy.mean, out.reference.mean)

    def test_short_run_reduces_nsv_and_loss(self):
        out = run_toy_alignment(steps=25, n_prompts=4, samples_per_prompt=6)
        assert len(out.trajectory) == 26
        assert [p.step for p in out.trajectory] == list(range(26))
        assert out.final_mean_nsv < out.initial_mean_nsv
        assert out.trajectory[-1].loss < out.trajectory[0].loss
        # reference stays frozen at the start point
        np.testing.assert_array_equal(out.reference.mean, [0.0, 0.0])
        assert np.any(out.policy.mean != out.reference.mean)

    def test_reproducible(self):
        a = run_toy_alignment(steps=5, n_prompts=3, samples_per_prompt=5)
        b = run_toy_alignment(steps=5, n_prompts=3, samples_per_prompt=5)
        assert [(p.mean_nsv, p.loss) for p in a.trajectory] == [
            (p.mean_nsv, p.loss) for p in b.trajectory
        ]
        np.testing.assert_array_equal(a.policy.mean, b.policy.mean)
        np.testing.assert_array_equal(a.policy.log_sigma, b.policy.log_sigma)

    def test_seed_changes_trajectory(self):
        a = run_toy_alignment(steps=3, n_prompts=2, samples_per_prompt=5, seed=0)
        b = run_toy_alignment(steps=3, n_prompts=2, samples_per_prompt=5, seed=1)
        assert a.trajectory[1].mean_nsv != b.trajectory[1].mean_nsv

    def test_divergence_raises_with_step(self):
        with pytest.raises(DivergenceError) as err:
            run_toy_alignment(
                steps=10,
                n_prompts=2,
                samples_per_prompt=4,
                learning_rate=float("inf"),
            )
        assert err.value.step >= 1

    def test_argument_validation(self):
        with pytest.raises(ValueError, match="steps"):
            run_toy_alignment(steps=-1)
        with pytest.raises(ValueError, match="samples"):
            run_toy_alignment(samples_per_prompt=1)

    def test_heldout_comparison(self):
        out = run_toy_alignment(steps=40, n_prompts=4, samples_per_prompt=6)
        cmp = heldout_sec(out, n_prompts=12)
        assert cmp.n_prompts == 12
        assert cmp.wins + cmp.ties + cmp.losses == 12
        assert cmp.sec >= 0.75  # aligned policy should rarely lose
