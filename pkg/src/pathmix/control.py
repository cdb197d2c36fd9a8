"""Guidance mixing, control energies and their exact omega-gradients.

The per-step objective penalizes deviation of the mixed prediction from the
unconditional one (transient term, weighted by lambda_t) plus a terminal
stitching cost on the overlap regions of root-aligned mixed clean-signal
estimates.  With predictions held fixed the objective is exactly quadratic in
the segment mixing vector omega, which this module exploits for analytic
gradients and a closed-form test oracle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTimestepError, InvalidConfigError
from .schedules import NoiseSchedule, eps_of_x0
from .segments import align_root

log = logging.getLogger(__name__)

POSTERIOR_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class ControlConfig:
    terminal_weight: float = 1.0          # w_T
    lambda_mode: str = "posterior"        # "posterior" | "unit"
    sigmoid_sharpness: float = 10.0

    def __post_init__(self):
        if self.terminal_weight < 0:
            raise InvalidConfigError("terminal_weight must be >= 0")
        if self.lambda_mode not in ("posterior", "unit"):
            raise InvalidConfigError(f"unknown lambda_mode {self.lambda_mode!r}")
        if self.sigmoid_sharpness <= 0:
            raise InvalidConfigError("sigmoid_sharpness must be > 0")


@dataclass(frozen=True)
class EnergyBreakdown:
    transient: float
    terminal: float
    total: float
    per_segment_transient: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass(frozen=True)
class SegmentPredictions:
    """Per-segment clean-signal predictions under both conditions and none."""

    source: np.ndarray  # (K, S, C)
    target: np.ndarray  # (K, S, C)
    uncond: np.ndarray  # (K, S, C)

    def __post_init__(self):
        if not (self.source.shape == self.target.shape == self.uncond.shape):
            raise ValueError("prediction stacks must share a shape")
        if self.source.ndim != 3:
            raise ValueError("prediction stacks must be (K, S, C)")

    @property
    def num_segments(self) -> int:
        return self.source.shape[0]


def mix_predictions(pred_c0: np.ndarray, pred_c1: np.ndarray,
                    omega: float) -> np.ndarray:
    """(1 - omega) * pred_c0 + omega * pred_c1 with omega in [0, 1]."""
    if not 0.0 <= omega <= 1.0:
        raise ValueError(f"omega must lie in [0, 1], got {omega}")
    if pred_c0.shape != pred_c1.shape:
        raise ValueError("prediction shapes differ")
    return (1.0 - omega) * pred_c0 + omega * pred_c1


def guidance_delta(x_t: np.ndarray, mixed_x0: np.ndarray, uncond_x0: np.ndarray,
                   t: int, schedule: NoiseSchedule) -> np.ndarray:
    """Noise-space deviation of the mixed prediction from the unconditional one."""
    if t < 1:
        raise DegenerateTimestepError("guidance delta undefined at t=0")
    return (eps_of_x0(x_t, mixed_x0, t, schedule)
            - eps_of_x0(x_t, uncond_x0, t, schedule))


def _delta_coeff(t: int, schedule: NoiseSchedule) -> float:
    """sqrt(alpha_bar_t) / sqrt(1 - alpha_bar_t): scale mapping x0-space
    differences to noise-space deltas."""
    a = schedule.alpha_bar[t]
    return np.sqrt(a) / np.sqrt(1.0 - a)


def lambda_weight(t: int, schedule: NoiseSchedule, mode: str = "posterior") -> float:
    """Per-timestep weight on the squared noise-space deviation.

    "posterior" is the DDPM reverse-transition KL constant
    beta_t^2 / (2 (1 - beta_t) (1 - alpha_bar_t) posterior_var_t);
    "unit" returns 1 for ablations.
    """
    if t < 1:
        raise DegenerateTimestepError("lambda undefined at t=0")
    if mode == "unit":
        return 1.0
    if mode != "posterior":
        raise InvalidConfigError(f"unknown lambda mode {mode!r}")
    beta = schedule.beta[t]
    pv = schedule.posterior_var[t]
    if pv < POSTERIOR_VAR_FLOOR:
        log.warning("posterior_var[%d]=%g floored to %g in lambda_weight",
                    t, pv, POSTERIOR_VAR_FLOOR)
        pv = POSTERIOR_VAR_FLOOR
    return beta ** 2 / (2.0 * (1.0 - beta) * (1.0 - schedule.alpha_bar[t]) * pv)


def reverse_kl_check(x_t: np.ndarray, eps_a: np.ndarray, eps_b: np.ndarray,
                     t: int, schedule: NoiseSchedule) -> float:
    """Exact KL between the Gaussian reverse transitions induced by two noise
    predictions (shared posterior variance): ||mu_a - mu_b||^2 / (2 var)."""
    if t < 1:
        raise DegenerateTimestepError("reverse transition undefined at t=0")
    beta = schedule.beta[t]
    coeff = beta / (np.sqrt(1.0 - beta) * np.sqrt(1.0 - schedule.alpha_bar[t]))
    diff = coeff * (eps_a - eps_b)
    return float(np.sum(diff ** 2) / (2.0 * schedule.posterior_var[t]))


def stitch_cost(x0hat_segments: np.ndarray) -> float:
    """Squared L2 distance between overlapping halves of adjacent segments."""
    K, S = x0hat_segments.shape[:2]
    if S % 2 != 0:
        raise InvalidConfigError("segment length S must be even")
    if K < 2:
        log.warning("stitch_cost called with K=%d < 2; returning 0", K)
        return 0.0
    half = S // 2
    diff = x0hat_segments[1:, :half] - x0hat_segments[:-1, half:]
    return float(np.sum(diff ** 2))


def heuristic_omega(kind: str, K: int, sharpness: float = 10.0) -> np.ndarray:
    """Fixed segment-interpolation schedules: linear, sigmoid or sine.

    All are monotone over the segment index with endpoints exactly 0 and 1,
    and constant across denoising steps.
    """
    if K < 2:
        raise InvalidConfigError("need K >= 2 segments")
    u = np.arange(K, dtype=np.float64) / (K - 1)
    if kind == "linear":
        return u
    if kind == "sine":
        return 0.5 * (1.0 - np.cos(np.pi * u))
    if kind == "sigmoid":
        raw = 1.0 / (1.0 + np.exp(-sharpness * (u - 0.5)))
        return (raw - raw[0]) / (raw[-1] - raw[0])
    raise InvalidConfigError(f"unknown schedule kind {kind!r}")


def _mixed_stack(preds: SegmentPredictions, omega: np.ndarray) -> np.ndarray:
    w = omega[:, None, None]
    return (1.0 - w) * preds.source + w * preds.target


def _check_pins(omega: np.ndarray, K: int):
    if omega.shape != (K,):
        raise ValueError(f"omega must have length {K}")
    if omega[0] != 0.0 or omega[-1] != 1.0:
        raise ValueError("omega boundaries must be pinned to 0 and 1 exactly")


def control_energy(x_t_segments: np.ndarray, preds: SegmentPredictions,
                   omega: np.ndarray, t: int, config: ControlConfig,
                   schedule: NoiseSchedule,
                   root_channel: int = 0) -> EnergyBreakdown:
    """Per-step control energy of a mixing vector with pinned boundaries.

    transient = lambda_t * sum_k ||delta_eps_k||^2 with the mixed prediction
    per segment; terminal = w_T * stitch cost of the root-aligned mixed
    clean-signal stack.  ``x_t_segments`` only fixes shapes: the noise-space
    delta depends on the prediction difference alone.
    """
    K = preds.num_segments
    _check_pins(omega, K)
    if x_t_segments.shape != preds.source.shape:
        raise ValueError("x_t stack shape differs from predictions")
    lam = lambda_weight(t, schedule, config.lambda_mode)
    c2 = _delta_coeff(t, schedule) ** 2
    mixed = _mixed_stack(preds, omega)
    per_seg = lam * c2 * np.sum((preds.uncond - mixed) ** 2, axis=(1, 2))
    transient = float(per_seg.sum())
    terminal = config.terminal_weight * stitch_cost(
        align_root(mixed, root_channel))
    return EnergyBreakdown(transient, terminal, transient + terminal, per_seg)


# -- analytic omega-gradients ------------------------------------------------
#
# With predictions fixed, mixed_k = source_k + omega_k * (target_k - source_k)
# is affine in omega, root alignment adds offsets that are affine in omega,
# and both energy terms are quadratic forms.  The helpers below compute the
# exact gradient of each term with respect to the full omega vector.


def transient_coefficients(preds: SegmentPredictions, t: int,
                           config: ControlConfig, schedule: NoiseSchedule):
    """Per-segment quadratics (q2, q1, q0) with
    per_segment_transient_k(w) = q2_k w^2 + q1_k w + q0_k."""
    lam = lambda_weight(t, schedule, config.lambda_mode)
    c2 = _delta_coeff(t, schedule) ** 2
    u = preds.uncond - preds.source           # deviation at omega = 0
    w = preds.target - preds.source           # mixing direction
    q2 = lam * c2 * np.sum(w ** 2, axis=(1, 2))
    q1 = -2.0 * lam * c2 * np.sum(u * w, axis=(1, 2))
    q0 = lam * c2 * np.sum(u ** 2, axis=(1, 2))
    return q2, q1, q0


def stitch_cost_aligned_gradient(mixed: np.ndarray, directions: np.ndarray,
                                 root_channel: int = 0) -> np.ndarray:
    """Gradient of stitch_cost(align_root(mixed)) with respect to omega.

    ``directions[k]`` is d mixed_k / d omega_k (the target-source difference).
    Root-alignment offsets accumulate along segments, so earlier omegas leak
    into later segments through the root channel; the offset derivatives are
    tracked explicitly.
    """
    K, S, _ = mixed.shape
    half = S // 2
    aligned = align_root(mixed, root_channel)
    # offset_grads[k, j] = d offset_k / d omega_j
    offset_grads = np.zeros((K, K))
    for k in range(K - 1):
        offset_grads[k + 1] = offset_grads[k]
        offset_grads[k + 1, k] += directions[k, S - 1, root_channel]
        offset_grads[k + 1, k + 1] -= directions[k + 1, 0, root_channel]
    grad = np.zeros(K)
    for k in range(K - 1):
        resid = aligned[k + 1, :half] - aligned[k, half:]
        grad[k + 1] += 2.0 * np.sum(resid * directions[k + 1, :half])
        grad[k] -= 2.0 * np.sum(resid * directions[k, half:])
        grad += (2.0 * np.sum(resid[:, root_channel])
                 * (offset_grads[k + 1] - offset_grads[k]))
    return grad


def control_energy_omega_gradient(preds: SegmentPredictions, omega: np.ndarray,
                                  t: int, config: ControlConfig,
                                  schedule: NoiseSchedule,
                                  root_channel: int = 0) -> np.ndarray:
    """Exact gradient of the total control energy with respect to omega."""
    K = preds.num_segments
    if omega.shape != (K,):
        raise ValueError(f"omega must have length {K}")
    q2, q1, _ = transient_coefficients(preds, t, config, schedule)
    grad = 2.0 * q2 * omega + q1
    if config.terminal_weight > 0.0:
        mixed = _mixed_stack(preds, omega)
        grad = grad + config.terminal_weight * stitch_cost_aligned_gradient(
            mixed, preds.target - preds.source, root_channel)
    return grad
