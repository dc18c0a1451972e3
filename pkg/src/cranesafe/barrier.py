"""Robust zero-order barrier condition and online margin adaptation.

The robustness margin ``delta_t`` must cover the gap between the nominal
end-of-period safety value and the worst safety value reached between
samples by any state the estimate might really be.  It is estimated by
propagating a seeded set of states drawn from a box around the estimate
with the nominal flow and taking the largest observed gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import NX, UncertaintyRealization, _u, _x, base_motion
from .integrator import CraneModel, FlowConfig, trajectory
from .safety import TargetSafetyParams, target_safety

DEG = np.pi / 180.0


def default_ball_radii() -> np.ndarray:
    """Per-state estimation bounds of the default scenario.

    Tether angles carry the 0.03 m payload-position bound at a 1 m lever;
    tether and payload angular rates share the 4 deg/s bound.
    """
    return np.array([2 * DEG, 2 * DEG, 0.04, 0.03, 0.03, 2 * DEG, 2 * DEG,
                     3 * DEG, 3 * DEG, 0.08, 4 * DEG, 4 * DEG, 4 * DEG, 4 * DEG])


@dataclass(frozen=True)
class BarrierConfig:
    alpha_gain: float = 0.5
    sample_count: int = 40
    ball_radii: np.ndarray = field(default_factory=default_ball_radii)
    target_radii: tuple = (0.03, 0.03, 0.03)
    tau_step: float | None = None  # None means a quarter of the sample period
    rng_seed: int = 0
    include_alpha_offset: bool = False

    def __post_init__(self):
        if not 0 < self.alpha_gain <= 1:
            raise ValueError("alpha_gain must lie in (0, 1]")
        if int(self.sample_count) != self.sample_count or self.sample_count < 1:
            raise ValueError("sample_count must be a positive integer")
        radii = np.asarray(self.ball_radii, dtype=float).copy()
        if radii.shape != (NX,) or np.any(radii < 0) or not np.all(np.isfinite(radii)):
            raise ValueError("ball_radii must be a finite nonnegative 14-vector")
        radii.setflags(write=False)
        object.__setattr__(self, "ball_radii", radii)
        tr = tuple(float(v) for v in self.target_radii)
        if len(tr) != 3 or min(tr) < 0:
            raise ValueError("target_radii must be three nonnegative values")
        object.__setattr__(self, "target_radii", tr)
        if self.tau_step is not None and not self.tau_step > 0:
            raise ValueError("tau_step must be positive")

    def stride(self, flow: FlowConfig) -> int:
        """Substeps per ``tau_step``; the step must divide the period on the RK4 grid."""
        tau = flow.sample_period / 4 if self.tau_step is None else self.tau_step
        ratio = flow.sample_period / tau
        n = int(round(ratio))
        if n < 1 or abs(ratio - n) > 1e-9 or flow.substeps % n:
            raise ValueError(f"tau_step {tau} must divide T={flow.sample_period} on a "
                             f"{flow.substeps}-substep grid")
        return flow.substeps // n

    def tau_indices(self, flow: FlowConfig) -> np.ndarray:
        """Substep indices of the tau grid (0 excluded, T included)."""
        s = self.stride(flow)
        return np.arange(s, flow.substeps + 1, s)


@dataclass(frozen=True)
class DeltaResult:
    delta: float
    worst_sample_index: int
    worst_tau: float
    max_gap: float = 0.0

    def __post_init__(self):
        if not self.delta >= 0:
            raise ValueError("delta must be nonnegative")


def class_k(r, gain: float):
    """Linear class-K function ``alpha(r) = gain * r``."""
    return gain * r


# ---------------------------------------------------------------------------


def _h(t, x, target, model, offset=None):
    off = np.zeros(3) if offset is None else offset
    return target_safety(t, x, target, base_motion(t, model.base), model.params, off)


def theta_gap(t_k, x_k, u, delta: UncertaintyRealization, cfg: BarrierConfig,
              flow: FlowConfig, model: CraneModel, target: TargetSafetyParams) -> float:
    """Nominal end value minus the grid minimum along the disturbed flow."""
    x_k = _x(x_k)
    end = trajectory(t_k, x_k, u, flow, model)[-1]
    pert = trajectory(t_k, x_k, u, flow, model, delta)
    h_end = _h(t_k + flow.sample_period, end, target, model)
    lows = [_h(t_k + i * flow.h, pert[i], target, model) for i in cfg.tau_indices(flow)]
    return h_end - min(lows)


def rzocbf_margin(t_k, x_k, u_k, delta_t: float, cfg: BarrierConfig, flow: FlowConfig,
                  model: CraneModel, target: TargetSafetyParams) -> float:
    """Residual of the barrier condition; nonnegative iff it holds."""
    x_k = _x(x_k)
    h0 = _h(t_k, x_k, target, model)
    h1 = _h(t_k + flow.sample_period, trajectory(t_k, x_k, u_k, flow, model)[-1], target,
            model)
    return h1 - h0 - delta_t + class_k(h0, cfg.alpha_gain)


def sample_ball(x, radii, n: int, seed: int) -> np.ndarray:
    """``n`` seeded states in the box ``|x_i - x| <= radii``; axis extremes first."""
    x = _x(x)
    radii = np.asarray(radii, dtype=float)
    if n < 1:
        raise ValueError("need at least one sample")
    extremes = []
    for j in range(NX):
        for sign in (1.0, -1.0):
            e = x.copy()
            e[j] += sign * radii[j]
            extremes.append(e)
    out = np.array(extremes[:n])
    if n > len(extremes):
        rng = np.random.default_rng(seed)
        rand = x + rng.uniform(-1.0, 1.0, size=(n - len(extremes), NX)) * radii
        out = np.vstack([out, rand])
    return out


def sample_target_offsets(n: int, radii, seed: int) -> np.ndarray:
    """Target-position perturbations paired with :func:`sample_ball` rows.

    Axis-extreme rows keep the nominal target; random rows get a uniform
    offset drawn from an independent stream of the same seed.
    """
    out = np.zeros((n, 3))
    n_ext = 2 * NX
    if n > n_ext:
        rng = np.random.default_rng([seed, 1])
        out[n_ext:] = rng.uniform(-1.0, 1.0, size=(n - n_ext, 3)) * np.asarray(radii)
    return out


def gap_table(t_k, x_k, samples, offsets, u, cfg: BarrierConfig, flow: FlowConfig,
              model: CraneModel, target: TargetSafetyParams) -> np.ndarray:
    """Gaps for every (sample, tau) pair, shape (len(samples), n_tau)."""
    return kernels.delta_gap_table(float(t_k), _x(x_k).copy(), np.ascontiguousarray(samples),
                                   np.ascontiguousarray(offsets, dtype=float),
                                   _u(u).astype(float), float(flow.sample_period),
                                   int(flow.substeps), cfg.stride(flow), model.prof,
                                   model.prm, target.as_array())


def delta_from_gaps(gaps: np.ndarray, offset: float, flow: FlowConfig,
                    cfg: BarrierConfig) -> DeltaResult:
    flat = int(np.argmax(gaps))  # first maximum: lowest sample, then lowest tau
    i, j = divmod(flat, gaps.shape[1])
    worst = float(gaps[i, j]) + offset
    return DeltaResult(delta=max(0.0, worst), worst_sample_index=i,
                       worst_tau=float(cfg.tau_indices(flow)[j] * flow.h), max_gap=worst)


def adapt_delta(t_k, x_k, u_prev, cfg: BarrierConfig, flow: FlowConfig, model: CraneModel,
                target: TargetSafetyParams) -> DeltaResult:
    """Sampling-based margin: the largest gap over the ball, clamped at zero."""
    x_k = _x(x_k)
    samples = sample_ball(x_k, cfg.ball_radii, cfg.sample_count, cfg.rng_seed)
    offsets = sample_target_offsets(cfg.sample_count, cfg.target_radii, cfg.rng_seed)
    gaps = gap_table(t_k, x_k, samples, offsets, u_prev, cfg, flow, model, target)
    offset = 0.0
    if cfg.include_alpha_offset:
        offset = class_k(_h(t_k, x_k, target, model), cfg.alpha_gain)
    return delta_from_gaps(gaps, offset, flow, cfg)


def adapt_delta_reference(t_k, x_k, u_prev, cfg: BarrierConfig, flow: FlowConfig,
                          model: CraneModel, target: TargetSafetyParams) -> DeltaResult:
    """Plain double loop over samples and tau values, used to check :func:`adapt_delta`."""
    from .integrator import partial_flow, step

    x_k = _x(x_k)
    samples = sample_ball(x_k, cfg.ball_radii, cfg.sample_count, cfg.rng_seed)
    offsets = sample_target_offsets(cfg.sample_count, cfg.target_radii, cfg.rng_seed)
    ref = _h(t_k + flow.sample_period, step(t_k, x_k, u_prev, flow, model), target, model)
    best, arg = -np.inf, (0, 0.0)
    for i, xs in enumerate(samples):
        for idx in cfg.tau_indices(flow):
            tau = idx * flow.h
            xt = partial_flow(t_k, xs, u_prev, tau, flow, model)
            gap = ref - _h(t_k + tau, xt, target, model, offsets[i])
            if gap > best:
                best, arg = gap, (i, tau)
    offset = class_k(_h(t_k, x_k, target, model), cfg.alpha_gain) if cfg.include_alpha_offset else 0.0
    return DeltaResult(max(0.0, best + offset), arg[0], arg[1], best + offset)
