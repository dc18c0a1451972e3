"""Safety functions: the six box constraints and the smooth target funnel."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .dynamics import BaseMotionProfile, CraneParameters, _base, _prm, _x, base_motion
from .errors import InfeasibleBoxError

NO_OFFSET = np.zeros(3)


@dataclass(frozen=True)
class TargetSafetyParams:
    """Parameters of the target-insertion safety function ``h_t``.

    ``target_pos`` is the target mouth in the platform frame; the inertial
    target rides the moving base.  ``plateau_gap`` defaults to 0.20 m so that
    the zero level set keeps its funnel shape for the default radii.
    """

    peak_amp: float = 0.30
    steepness: float = 5000.0
    plateau_gap: float = 0.20
    rho1: float = 0.075
    rho2: float = 0.030
    target_pos: tuple = (2.0, 0.0, 0.0)
    target_radius: float = 0.025
    payload_radius: float = 0.02

    def __post_init__(self):
        if not (self.peak_amp > 0 and self.steepness > 0 and self.plateau_gap > 0):
            raise ValueError("peak_amp, steepness and plateau_gap must be positive")
        if not self.rho1 > self.rho2 > 0:
            raise ValueError("need rho1 > rho2 > 0")
        if not self.peak_amp > self.plateau_gap:
            raise ValueError("need peak_amp > plateau_gap")
        if not self.payload_radius < self.target_radius:
            raise ValueError("payload must be narrower than the target")
        tp = np.asarray(self.target_pos, dtype=float)
        if tp.shape != (3,) or not np.all(np.isfinite(tp)):
            raise ValueError("target_pos must be a finite 3-vector")
        object.__setattr__(self, "target_pos", tuple(float(v) for v in tp))

    def as_array(self) -> np.ndarray:
        return np.array([self.peak_amp, self.steepness, self.plateau_gap, self.rho1,
                         self.rho2, *self.target_pos], dtype=float)

    def position(self, base) -> np.ndarray:
        """Inertial target position ``p_t`` for a base sample."""
        return kernels.target_position(_base(base), self.as_array(), NO_OFFSET)

    def surface(self, rho_sq) -> float:
        """Height of the zero level set above the target at squared radius ``rho_sq``."""
        p = np.array([np.sqrt(rho_sq), 0.0, 0.0])
        return float(-kernels.target_h(p, np.zeros(3), self.as_array())[0])


@dataclass(frozen=True)
class SafetyBox:
    """Axis-aligned inertial box; bounds are constant arrays or ``t -> 3-vector``."""

    lower: Callable[[float], np.ndarray] | Sequence[float]
    upper: Callable[[float], np.ndarray] | Sequence[float]

    def __post_init__(self):
        for name in ("lower", "upper"):
            val = getattr(self, name)
            if not callable(val):
                arr = np.asarray(val, dtype=float)
                if arr.shape != (3,):
                    raise ValueError(f"{name} must be a 3-vector")
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
        if not callable(self.lower) and not callable(self.upper):
            self.bounds(0.0)

    def bounds(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        lo = self.lower(t) if callable(self.lower) else self.lower
        hi = self.upper(t) if callable(self.upper) else self.upper
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if not np.all(lo < hi):
            raise InfeasibleBoxError(f"box at t={t} violates lower < upper: {lo} vs {hi}")
        return lo, hi

    @classmethod
    def unbounded(cls) -> SafetyBox:
        return cls((-1e6, -1e6, -1e6), (1e6, 1e6, 1e6))


@dataclass(frozen=True)
class ObstacleSet:
    """Axis-aligned blocks fixed in the platform frame, each ``(lower, upper)``."""

    blocks: tuple = ()

    def __post_init__(self):
        norm = []
        for lo, hi in self.blocks:
            lo = tuple(float(v) for v in lo)
            hi = tuple(float(v) for v in hi)
            if len(lo) != 3 or len(hi) != 3 or not all(a < b for a, b in zip(lo, hi)):
                raise ValueError(f"obstacle block needs positive extent: {lo}, {hi}")
            norm.append((lo, hi))
        object.__setattr__(self, "blocks", tuple(norm))

    def __len__(self):
        return len(self.blocks)


# ---------------------------------------------------------------------------


def _sample(t, base) -> np.ndarray:
    if isinstance(base, BaseMotionProfile):
        return base_motion(t, base).as_array()
    return _base(base)


def _crane(crane_prm) -> np.ndarray:
    return _prm(crane_prm if crane_prm is not None else CraneParameters())


def target_safety(t, x, prm: TargetSafetyParams, base, crane_prm=None,
                  target_offset=NO_OFFSET) -> float:
    """``h_t``: payload height above the funnel surface around the target.

    ``base`` is a :class:`BaseMotionSample` at ``t`` or a profile evaluated
    at ``t``.  ``target_offset`` shifts the inertial target (used for
    target-position uncertainty).
    """
    return float(kernels.target_h_state(_x(x), _sample(t, base), _crane(crane_prm),
                                        prm.as_array(), np.asarray(target_offset, float)))


def target_safety_gradient(t, x, prm: TargetSafetyParams, base, crane_prm=None,
                           target_offset=NO_OFFSET) -> np.ndarray:
    """Exact ``dh_t/dx`` (14-vector); the rate block is identically zero."""
    b = _sample(t, base)
    tp = prm.as_array()
    p, _, Jp, _ = kernels.payload_output(_x(x), b, _crane(crane_prm))
    pt = kernels.target_position(b, tp, np.asarray(target_offset, float))
    _, dh_dp = kernels.target_h(p, pt, tp)
    grad = np.zeros(kernels.NX)
    grad[:kernels.NQ] = dh_dp @ Jp
    return grad


def box_safety(t, x, box: SafetyBox, base, crane_prm=None) -> np.ndarray:
    """``(p - lower, upper - p)`` for the payload bottom point."""
    p = kernels.payload_output(_x(x), _sample(t, base), _crane(crane_prm))[0]
    lo, hi = box.bounds(t)
    return np.concatenate([p - lo, hi - p])


def box_safety_jacobian(t, x, box: SafetyBox, base, crane_prm=None) -> np.ndarray:
    """``d(box_safety)/dx`` (6 x 14)."""
    Jp = kernels.payload_output(_x(x), _sample(t, base), _crane(crane_prm))[2]
    J = np.zeros((6, kernels.NX))
    J[:3, :kernels.NQ] = Jp
    J[3:, :kernels.NQ] = -Jp
    return J


def composite_safety(t, x, target: TargetSafetyParams, box: SafetyBox, base,
                     crane_prm=None) -> float:
    """Min over ``h_t`` and the six box functions; ``>= 0`` iff ``x`` is in ``C(t)``."""
    return float(min(target_safety(t, x, target, base, crane_prm),
                     box_safety(t, x, box, base, crane_prm).min()))


# ---------------------------------------------------------------------------
# free-space box


@dataclass(frozen=True)
class BoxSpec:
    """Nominal free-space box in the platform frame plus the obstacle margin."""

    lower: tuple = (0.8, -1.0, -0.3)
    upper: tuple = (3.2, 1.0, 2.5)
    margin: float = 0.05

    def __post_init__(self):
        lo = np.asarray(self.lower, float)
        hi = np.asarray(self.upper, float)
        if lo.shape != (3,) or hi.shape != (3,) or not np.all(lo < hi):
            raise ValueError("nominal box needs lower < upper on every axis")
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")


def _rotation(base: np.ndarray) -> np.ndarray:
    return kernels.base_frame_terms(base)[0]


def _inscribed_world_box(lo_p, hi_p, base):
    """Largest centered axis-aligned box inside the rotated platform box."""
    R = _rotation(base)
    if np.array_equal(R, np.eye(3)):
        return base[9:12] + lo_p, base[9:12] + hi_p
    c = 0.5 * (lo_p + hi_p)
    e = 0.5 * (hi_p - lo_p)
    cw = base[9:12] + R @ c
    # |R^T d| <= |R^T| |d| elementwise, so a uniform shrink s keeps every point inside
    s = min(1.0, float(np.min(e / (np.abs(R.T) @ e))))
    return cw - s * e, cw + s * e


def _world_obstacle(lo_p, hi_p, base):
    """Axis-aligned bounding box of a transformed block (outer approximation)."""
    R = _rotation(base)
    corners = np.array([[a, b, c] for a in (lo_p[0], hi_p[0]) for b in (lo_p[1], hi_p[1])
                        for c in (lo_p[2], hi_p[2])])
    w = base[9:12] + corners @ R.T
    return w.min(axis=0), w.max(axis=0)


def free_space_bounds(base, obstacles: ObstacleSet, spec: BoxSpec = BoxSpec()):
    """Inertial ``(lower, upper)`` avoiding every obstacle grown by the margin.

    Each intruding block is removed by the single face cut that keeps the most
    volume (ties go to the lowest axis, upper face first).
    """
    b = _base(base)
    lo, hi = _inscribed_world_box(np.asarray(spec.lower, float),
                                  np.asarray(spec.upper, float), b)
    for olo_p, ohi_p in obstacles.blocks:
        olo, ohi = _world_obstacle(np.asarray(olo_p), np.asarray(ohi_p), b)
        olo = olo - spec.margin
        ohi = ohi + spec.margin
        if np.any(ohi <= lo) or np.any(olo >= hi):
            continue
        best = None
        for axis in range(3):
            for side, bound in (("upper", olo[axis]), ("lower", ohi[axis])):
                nlo, nhi = lo.copy(), hi.copy()
                if side == "upper":
                    nhi[axis] = bound
                else:
                    nlo[axis] = bound
                if not np.all(nlo < nhi):
                    continue
                vol = float(np.prod(nhi - nlo))
                if best is None or vol > best[0]:
                    best = (vol, nlo, nhi)
        if best is None:
            raise InfeasibleBoxError("obstacles leave no free space around the box")
        lo, hi = best[1], best[2]
    return lo, hi


def update_box(t, base, obstacles: ObstacleSet, margins: BoxSpec = BoxSpec()) -> SafetyBox:
    """Free-space box for the base pose at ``t`` (a sample or a profile)."""
    lo, hi = free_space_bounds(_sample(t, base), obstacles, margins)
    return SafetyBox(lo, hi)


def moving_box(profile: BaseMotionProfile, obstacles: ObstacleSet,
               spec: BoxSpec = BoxSpec()) -> SafetyBox:
    """Box whose bounds follow the base profile over time."""

    @lru_cache(maxsize=256)
    def both(t):
        return free_space_bounds(base_motion(t, profile), obstacles, spec)

    return SafetyBox(lambda t: both(float(t))[0], lambda t: both(float(t))[1])


@dataclass(frozen=True)
class SafetySet:
    """All constraint data needed to evaluate ``C(t)``."""

    target: TargetSafetyParams = field(default_factory=TargetSafetyParams)
    obstacles: ObstacleSet = field(default_factory=ObstacleSet)
    box: BoxSpec = field(default_factory=BoxSpec)
