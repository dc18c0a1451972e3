"""Sample-and-hold flows of the crane: ``F``, ``F_tau`` and ``Phi_tau``.

All flows are fixed-step RK4 with the input held constant over the period.
``tau`` must land on the substep grid so partial flows are read off the
stored trajectory instead of being re-integrated.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .dynamics import (BaseMotionProfile, CraneParameters, UncertaintyRealization,
                       _prof, _prm, _u, _x)
from .errors import IntegrationError

_NO_DISTURBANCE = np.zeros((kernels.NX, 0, 3))


@dataclass(frozen=True)
class FlowConfig:
    sample_period: float = 1.0 / 30.0
    substeps: int = 4
    scheme: str = "rk4"

    def __post_init__(self):
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError("substeps must be a positive integer")
        if self.scheme != "rk4":
            raise ValueError("only the fixed-step 'rk4' scheme is supported")

    @property
    def h(self) -> float:
        return self.sample_period / self.substeps

    def tau_index(self, tau: float) -> int:
        if tau < 0 or tau > self.sample_period * (1 + 1e-12):
            raise ValueError(f"tau={tau} outside [0, {self.sample_period}]")
        k = tau / self.h
        idx = int(round(k))
        if abs(k - idx) > 1e-9:
            raise ValueError(f"tau={tau} is not on the substep grid (h={self.h})")
        return idx


@dataclass(frozen=True)
class CraneModel:
    """Everything the flows need besides state and input."""

    params: CraneParameters = CraneParameters()
    base: BaseMotionProfile = BaseMotionProfile()

    @cached_property
    def prm(self) -> np.ndarray:
        return _prm(self.params)

    @cached_property
    def prof(self) -> np.ndarray:
        return _prof(self.base)


def _checked(traj):
    if not np.all(np.isfinite(traj)):
        raise IntegrationError("flow produced a non-finite state")
    return traj


def trajectory(t_k, x_k, u_k, cfg: FlowConfig, model: CraneModel,
               delta: UncertaintyRealization | None = None) -> np.ndarray:
    """State on the substep grid over one hold period, shape (substeps+1, 14)."""
    table = _NO_DISTURBANCE if delta is None else delta.table
    traj = kernels.rk4_traj(float(t_k), _x(x_k).copy(), _u(u_k).astype(float),
                            float(cfg.sample_period), int(cfg.substeps), model.prof,
                            model.prm, table)
    return _checked(traj)


def step(t_k, x_k, u_k, cfg: FlowConfig, model: CraneModel) -> np.ndarray:
    """Nominal discrete map ``F(t_k, x_k, u_k)``."""
    return trajectory(t_k, x_k, u_k, cfg, model)[-1]


def partial_flow(t_k, x_k, u_k, tau, cfg: FlowConfig, model: CraneModel) -> np.ndarray:
    """Nominal flow ``F_tau``; ``tau = 0`` returns ``x_k`` unchanged."""
    idx = cfg.tau_index(tau)
    if idx == 0:
        return _x(x_k).copy()
    return trajectory(t_k, x_k, u_k, cfg, model)[idx]


def perturbed_flow(t_k, x_k, u_k, delta: UncertaintyRealization, tau, cfg: FlowConfig,
                   model: CraneModel) -> np.ndarray:
    """Flow ``Phi_tau`` of the disturbed vector field."""
    idx = cfg.tau_index(tau)
    if idx == 0:
        return _x(x_k).copy()
    return trajectory(t_k, x_k, u_k, cfg, model, delta)[idx]
