"""Inner-loop optimization of the segment mixing vector at one denoising step.

Interior mixing values are reparameterized through a sigmoid of a latent
z in R^(K-2); the boundary values stay pinned at 0 and 1.  Because the
control energy is exactly quadratic in omega for fixed predictions, the
objective is represented once per step by its quadratic coefficients and the
Adam loop then runs on that representation; the gradient it sees is identical
to the direct chain-rule gradient in ``energy_gradient``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .control import (ControlConfig, EnergyBreakdown, SegmentPredictions,
                      control_energy_omega_gradient, stitch_cost,
                      stitch_cost_aligned_gradient, transient_coefficients)
from .errors import InvalidConfigError, NumericError
from .schedules import NoiseSchedule
from .segments import align_root


@dataclass(frozen=True)
class OptimizerConfig:
    steps: int = 20        # J
    lr: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    warm_start: bool = True

    def __post_init__(self):
        if self.steps < 0:
            raise InvalidConfigError("steps must be >= 0")
        if self.lr <= 0:
            raise InvalidConfigError("lr must be > 0")


@dataclass(frozen=True)
class MixingSchedule:
    """Optimized mixing state: latent z, induced omega, and the inner-loop trace."""

    z: np.ndarray
    omega: np.ndarray
    step_trace: list = field(default_factory=list)  # [(omega, EnergyBreakdown)]

    @property
    def num_segments(self) -> int:
        return len(self.omega)


@dataclass(frozen=True)
class AdamState:
    z: np.ndarray
    m: np.ndarray
    v: np.ndarray
    count: int = 0

    @classmethod
    def fresh(cls, z: np.ndarray) -> "AdamState":
        return cls(z.copy(), np.zeros_like(z), np.zeros_like(z), 0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Overflow-safe logistic function."""
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid_deriv(z: np.ndarray) -> np.ndarray:
    s = sigmoid(z)
    return s * (1.0 - s)


def omega_of_latent(z: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], sigmoid(z), [1.0]])


def init_mixing_latent(K: int) -> MixingSchedule:
    """Uniform initialization: all interior omegas at 0.5 (z = 0)."""
    if K < 2:
        raise InvalidConfigError("need K >= 2 segments")
    z = np.zeros(K - 2)
    return MixingSchedule(z, omega_of_latent(z))


def adam_update(state: AdamState, grad: np.ndarray,
                config: OptimizerConfig) -> AdamState:
    """One bias-corrected Adam step on the latent held in ``state``."""
    b1, b2 = config.adam_beta1, config.adam_beta2
    count = state.count + 1
    m = b1 * state.m + (1.0 - b1) * grad
    v = b2 * state.v + (1.0 - b2) * grad ** 2
    m_hat = m / (1.0 - b1 ** count)
    v_hat = v / (1.0 - b2 ** count)
    z = state.z - config.lr * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    return AdamState(z, m, v, count)


class _QuadraticEnergy:
    """Exact quadratic model of the per-step control energy over interior omega.

    Built from the analytic per-segment transient coefficients and from
    terminal-gradient evaluations at the interior basis points (exact because
    the terminal cost is quadratic in omega).
    """

    def __init__(self, preds: SegmentPredictions, t: int,
                 control_config: ControlConfig, schedule: NoiseSchedule,
                 root_channel: int = 0):
        K = preds.num_segments
        self.K = K
        self.w_T = control_config.terminal_weight
        self.q2, self.q1, self.q0 = transient_coefficients(
            preds, t, control_config, schedule)
        self._preds = preds
        self._root = root_channel
        n = K - 2
        dirs = preds.target - preds.source
        base = self._omega(np.zeros(n))

        def phi_value(omega):
            mixed = self._mixed(omega)
            return stitch_cost(align_root(mixed, root_channel))

        def phi_grad(omega):
            mixed = self._mixed(omega)
            return stitch_cost_aligned_gradient(mixed, dirs, root_channel)[1:K - 1]

        self.phi_const = phi_value(base)
        g0 = phi_grad(base)
        hess = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            hess[:, j] = phi_grad(self._omega(e)) - g0
        self.phi_grad0 = g0
        self.phi_hess = hess

    def _omega(self, u: np.ndarray) -> np.ndarray:
        return np.concatenate([[0.0], u, [1.0]])

    def _mixed(self, omega: np.ndarray) -> np.ndarray:
        w = omega[:, None, None]
        return (1.0 - w) * self._preds.source + w * self._preds.target

    def breakdown(self, u: np.ndarray) -> EnergyBreakdown:
        omega = self._omega(u)
        per_seg = self.q2 * omega ** 2 + self.q1 * omega + self.q0
        transient = float(per_seg.sum())
        phi = (self.phi_const + self.phi_grad0 @ u
               + 0.5 * u @ (self.phi_hess @ u))
        terminal = self.w_T * phi
        return EnergyBreakdown(transient, terminal, transient + terminal, per_seg)

    def grad_interior(self, u: np.ndarray) -> np.ndarray:
        g = 2.0 * self.q2[1:self.K - 1] * u + self.q1[1:self.K - 1]
        return g + self.w_T * (self.phi_grad0 + self.phi_hess @ u)


def energy_gradient(z: np.ndarray, preds: SegmentPredictions,
                    x_t_segments: np.ndarray, t: int,
                    control_config: ControlConfig, schedule: NoiseSchedule,
                    root_channel: int = 0) -> np.ndarray:
    """Exact gradient of the control energy with respect to the latent z.

    Chain rule through omega = sigmoid(z) on the interior entries; matches
    central finite differences of the energy to first order in h^2.
    """
    if x_t_segments.shape != preds.source.shape:
        raise ValueError("x_t stack shape differs from predictions")
    K = preds.num_segments
    if z.shape != (K - 2,):
        raise ValueError(f"latent must have length {K - 2}")
    if K == 2:
        return np.zeros(0)
    omega = omega_of_latent(z)
    grad_omega = control_energy_omega_gradient(
        preds, omega, t, control_config, schedule, root_channel)
    grad = grad_omega[1:K - 1] * sigmoid_deriv(z)
    if not np.all(np.isfinite(grad)):
        raise NumericError(f"non-finite gradient at t={t}")
    return grad


def optimize_mixing(preds: SegmentPredictions, x_t_segments: np.ndarray,
                    t: int, opt_config: OptimizerConfig,
                    control_config: ControlConfig, schedule: NoiseSchedule,
                    root_channel: int = 0,
                    z_init: np.ndarray | None = None) -> MixingSchedule:
    """Run J Adam steps on the latent and return the best iterate seen.

    The trace records (omega, EnergyBreakdown) for the initialization and for
    every Adam step, J+1 entries in total.  The returned omega is the lowest-
    energy iterate, so its energy never exceeds the initialization's.
    """
    if x_t_segments.shape != preds.source.shape:
        raise ValueError("x_t stack shape differs from predictions")
    K = preds.num_segments
    z = np.zeros(K - 2) if z_init is None else np.asarray(z_init, dtype=np.float64)
    if z.shape != (K - 2,):
        raise ValueError(f"latent must have length {K - 2}")
    quad = _QuadraticEnergy(preds, t, control_config, schedule, root_channel)
    state = AdamState.fresh(z)
    trace = []
    best = None
    for j in range(opt_config.steps + 1):
        u = sigmoid(state.z)
        energy = quad.breakdown(u)
        if not np.isfinite(energy.total):
            raise NumericError(f"non-finite energy at t={t}, inner step {j}")
        trace.append((omega_of_latent(state.z), energy))
        if best is None or energy.total < best[1].total:
            best = (state.z.copy(), energy)
        if j == opt_config.steps:
            break
        grad = quad.grad_interior(u) * sigmoid_deriv(state.z)
        state = adam_update(state, grad, opt_config)
    z_best, _ = best
    return MixingSchedule(z_best, omega_of_latent(z_best), trace)


def closed_form_oracle(preds: SegmentPredictions, x_t_segments: np.ndarray,
                       t: int, control_config: ControlConfig,
                       schedule: NoiseSchedule,
                       root_channel: int = 0) -> np.ndarray:
    """Unconstrained stationary point of the quadratic energy over interior omega.

    Solves grad = 0 directly; the result ignores the (0, 1) box and is only
    meaningful when it lands inside it.  Raises NumericError on a singular or
    badly conditioned system.
    """
    K = preds.num_segments
    if K < 3:
        raise InvalidConfigError("oracle needs K >= 3 (an interior segment)")
    quad = _QuadraticEnergy(preds, t, control_config, schedule, root_channel)
    n = K - 2
    hess = np.diag(2.0 * quad.q2[1:K - 1]) + quad.w_T * quad.phi_hess
    rhs = -(quad.q1[1:K - 1] + quad.w_T * quad.phi_grad0)
    if np.linalg.cond(hess) > 1e12:
        raise NumericError("singular interior system; oracle unavailable")
    u = np.linalg.solve(hess, rhs)
    return np.concatenate([[0.0], u, [1.0]])
