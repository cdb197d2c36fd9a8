import numpy as np
import pytest

from pathmix import (ControlConfig, DegenerateTimestepError,
                     InvalidConfigError, SegmentPredictions, control_energy,
                     eps_of_x0, guidance_delta, heuristic_omega, lambda_weight,
                     mix_predictions, reverse_kl_check, stitch_cost)
from pathmix.control import (control_energy_omega_gradient,
                             transient_coefficients)
from pathmix.segments import align_root


def random_preds(rng, K=4, S=16, C=4):
    return SegmentPredictions(rng.normal(size=(K, S, C)),
                              rng.normal(size=(K, S, C)),
                              rng.normal(size=(K, S, C)))


def pinned_omega(interior):
    return np.concatenate([[0.0], np.atleast_1d(interior), [1.0]])


class TestMixPredictions:
    def test_endpoints(self, rng):
        a, b = rng.normal(size=(2, 16, 4))
        np.testing.assert_array_equal(mix_predictions(a, b, 0.0), a)
        np.testing.assert_array_equal(mix_predictions(a, b, 1.0), b)

    def test_midpoint(self, rng):
        a, b = rng.normal(size=(2, 16, 4))
        np.testing.assert_allclose(mix_predictions(a, b, 0.5), (a + b) / 2)

    def test_out_of_range_rejected(self, rng):
        a = rng.normal(size=(4, 2))
        with pytest.raises(ValueError):
            mix_predictions(a, a, 1.5)


class TestGuidanceDelta:
    def test_zero_when_predictions_agree(self, schedule, rng):
        x_t = rng.normal(size=(16, 4))
        p = rng.normal(size=(16, 4))
        np.testing.assert_array_equal(
            guidance_delta(x_t, p, p, 500, schedule), 0.0)

    def test_scale_identity(self, schedule, rng):
        x_t = rng.normal(size=(16, 4))
        uncond = rng.normal(size=(16, 4))
        d = rng.normal(size=(16, 4))
        t = 321
        a = schedule.alpha_bar[t]
        out = guidance_delta(x_t, uncond - d, uncond, t, schedule)
        np.testing.assert_allclose(out, np.sqrt(a) / np.sqrt(1 - a) * d,
                                   atol=1e-12)

    def test_affine_in_omega(self, schedule, rng):
        x_t, uncond, p0, p1 = rng.normal(size=(4, 16, 4))
        w = 0.37
        mixed = mix_predictions(p0, p1, w)
        lhs = guidance_delta(x_t, mixed, uncond, 600, schedule)
        rhs = ((1 - w) * guidance_delta(x_t, p0, uncond, 600, schedule)
               + w * guidance_delta(x_t, p1, uncond, 600, schedule))
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_t_zero_rejected(self, schedule, rng):
        x = rng.normal(size=(4, 2))
        with pytest.raises(DegenerateTimestepError):
            guidance_delta(x, x, x, 0, schedule)


class TestLambdaWeight:
    def test_unit_mode(self, schedule):
        assert lambda_weight(123, schedule, "unit") == 1.0

    def test_positive_everywhere(self, schedule):
        for t in (1, 10, 500, 999, 1000):
            assert lambda_weight(t, schedule, "posterior") > 0.0

    def test_matches_gaussian_kl(self, schedule, rng):
        # the posterior weight turns ||delta_eps||^2 into the exact reverse KL
        for t in rng.integers(1, 1001, size=20):
            t = int(t)
            x_t = rng.normal(size=(16, 4))
            eps_a, eps_b = rng.normal(size=(2, 16, 4))
            kl = reverse_kl_check(x_t, eps_a, eps_b, t, schedule)
            lam = lambda_weight(t, schedule, "posterior")
            approx = lam * np.sum((eps_a - eps_b) ** 2)
            assert abs(approx - kl) / abs(kl) <= 1e-10

    def test_unknown_mode_rejected(self, schedule):
        with pytest.raises(InvalidConfigError):
            lambda_weight(5, schedule, "bogus")


class TestReverseKlCheck:
    def test_zero_for_equal_predictions(self, schedule, rng):
        x_t = rng.normal(size=(16, 4))
        e = rng.normal(size=(16, 4))
        assert reverse_kl_check(x_t, e, e, 100, schedule) == 0.0

    def test_quadratic_scaling(self, schedule, rng):
        x_t = rng.normal(size=(16, 4))
        e = rng.normal(size=(16, 4))
        base = reverse_kl_check(x_t, e, np.zeros_like(e), 100, schedule)
        doubled = reverse_kl_check(x_t, 2 * e, np.zeros_like(e), 100, schedule)
        assert abs(doubled - 4 * base) / base < 1e-12


class TestStitchCost:
    def test_consistent_segments_cost_zero(self, rng):
        x = rng.normal(size=(4, 16, 4))
        for k in range(3):
            x[k + 1, :8] = x[k, 8:]
        assert stitch_cost(x) == 0.0

    def test_constant_offset(self):
        x = np.zeros((2, 16, 4))
        x[1, :8] = 0.3
        assert abs(stitch_cost(x) - 8 * 4 * 0.3 ** 2) < 1e-12

    def test_only_overlaps_matter(self, rng):
        x = rng.normal(size=(3, 16, 4))
        base = stitch_cost(x)
        y = x.copy()
        y[0, :8] = rng.normal(size=(8, 4))      # first segment head
        y[2, 8:] = rng.normal(size=(8, 4))      # last segment tail
        assert stitch_cost(y) == base

    def test_single_segment_returns_zero(self, rng):
        assert stitch_cost(rng.normal(size=(1, 16, 4))) == 0.0

    def test_odd_length_rejected(self, rng):
        with pytest.raises(InvalidConfigError):
            stitch_cost(rng.normal(size=(3, 15, 4)))


class TestHeuristicOmega:
    def test_linear(self):
        np.testing.assert_allclose(heuristic_omega("linear", 5),
                                   [0, 0.25, 0.5, 0.75, 1])

    def test_sine_midpoint(self):
        np.testing.assert_allclose(heuristic_omega("sine", 3), [0, 0.5, 1],
                                   atol=1e-15)

    def test_sigmoid_endpoints_exact(self):
        omega = heuristic_omega("sigmoid", 6)
        assert omega[0] == 0.0 and omega[-1] == 1.0

    def test_all_monotone(self):
        for kind in ("linear", "sigmoid", "sine"):
            omega = heuristic_omega(kind, 7)
            assert np.all(np.diff(omega) >= 0)
            assert omega[0] == 0.0 and omega[-1] == 1.0

    def test_too_few_segments_rejected(self):
        with pytest.raises(InvalidConfigError):
            heuristic_omega("linear", 1)


class TestControlEnergy:
    def test_identical_predictions(self, schedule, rng):
        p = rng.normal(size=(4, 16, 4))
        preds = SegmentPredictions(p, p.copy(), p.copy())
        omega = pinned_omega([0.3, 0.8])
        e = control_energy(p, preds, omega, 500, ControlConfig(), schedule)
        # (1-w)p + wp only differs from p by rounding
        assert e.transient <= 1e-24
        assert abs(e.terminal - stitch_cost(align_root(p))) < 1e-12

    def test_zero_terminal_weight(self, schedule, rng):
        preds = random_preds(rng)
        x = rng.normal(size=(4, 16, 4))
        cfg = ControlConfig(terminal_weight=0.0)
        e = control_energy(x, preds, pinned_omega([0.2, 0.9]), 300, cfg,
                           schedule)
        assert e.terminal == 0.0
        assert e.total == e.transient

    def test_additivity(self, schedule, rng):
        preds = random_preds(rng)
        x = rng.normal(size=(4, 16, 4))
        e = control_energy(x, preds, pinned_omega([0.4, 0.6]), 777,
                           ControlConfig(), schedule)
        assert abs(e.transient + e.terminal - e.total) <= 1e-12
        assert abs(e.per_segment_transient.sum() - e.transient) <= 1e-12
        assert e.transient >= 0 and e.terminal >= 0

    def test_matches_straight_line_recomputation(self, schedule, rng):
        # independent composition of the definitions: mix, noise-space delta,
        # lambda weighting, aligned overlap cost
        preds = random_preds(rng, K=3)
        x = rng.normal(size=(3, 16, 4))
        omega = pinned_omega([0.41])
        t = 412
        cfg = ControlConfig(terminal_weight=1.7)
        e = control_energy(x, preds, omega, t, cfg, schedule)

        lam = lambda_weight(t, schedule, "posterior")
        transient = 0.0
        mixed = np.empty_like(preds.source)
        for k in range(3):
            mixed[k] = mix_predictions(preds.source[k], preds.target[k],
                                       omega[k])
            delta = (eps_of_x0(x[k], mixed[k], t, schedule)
                     - eps_of_x0(x[k], preds.uncond[k], t, schedule))
            transient += lam * np.sum(delta ** 2)
        aligned = align_root(mixed)
        terminal = cfg.terminal_weight * (
            np.sum((aligned[1, :8] - aligned[0, 8:]) ** 2)
            + np.sum((aligned[2, :8] - aligned[1, 8:]) ** 2))
        assert abs(e.transient - transient) / transient < 1e-12
        assert abs(e.terminal - terminal) / terminal < 1e-12

    def test_quadratic_along_any_line(self, schedule, rng):
        preds = random_preds(rng)
        x = rng.normal(size=(4, 16, 4))
        a = rng.uniform(0.1, 0.4, size=2)
        b = rng.uniform(0.05, 0.3, size=2)
        s_grid = np.linspace(0.0, 1.0, 9)
        vals = [control_energy(x, preds, pinned_omega(a + s * b), 250,
                               ControlConfig(), schedule).total
                for s in s_grid]
        coeffs = np.polyfit(s_grid, vals, 2)
        fit = np.polyval(coeffs, s_grid)
        assert np.max(np.abs(fit - vals)) < 1e-9

    def test_boundary_pins_enforced(self, schedule, rng):
        preds = random_preds(rng)
        x = rng.normal(size=(4, 16, 4))
        with pytest.raises(ValueError):
            control_energy(x, preds, np.array([0.1, 0.5, 0.5, 1.0]), 100,
                           ControlConfig(), schedule)


class TestOmegaGradients:
    def test_transient_coefficients_reproduce_energy(self, schedule, rng):
        preds = random_preds(rng)
        x = rng.normal(size=(4, 16, 4))
        cfg = ControlConfig(terminal_weight=0.0)
        q2, q1, q0 = transient_coefficients(preds, 888, cfg, schedule)
        omega = pinned_omega([0.25, 0.7])
        e = control_energy(x, preds, omega, 888, cfg, schedule)
        np.testing.assert_allclose(
            q2 * omega ** 2 + q1 * omega + q0, e.per_segment_transient,
            rtol=1e-12)

    def test_full_gradient_matches_finite_differences(self, schedule, rng):
        # includes the root-alignment offset coupling: earlier omegas move
        # later segments through the accumulated root shift
        preds = random_preds(rng, K=5)
        x = rng.normal(size=(5, 16, 4))
        cfg = ControlConfig(terminal_weight=2.0)
        omega = pinned_omega(rng.uniform(0.2, 0.8, size=3))
        grad = control_energy_omega_gradient(preds, omega, 333, cfg, schedule)
        h = 1e-6
        for k in range(1, 4):
            op, om = omega.copy(), omega.copy()
            op[k] += h
            om[k] -= h
            fd = (control_energy(x, preds, op, 333, cfg, schedule).total
                  - control_energy(x, preds, om, 333, cfg, schedule).total) \
                / (2 * h)
            assert abs(grad[k] - fd) / max(abs(fd), 1.0) < 1e-6
