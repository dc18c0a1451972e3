"""Crane kinematics, energies and the velocity-actuated vector field.

Frame convention: the inertial frame sits at the undisturbed base.  The
base frame is translated by ``p_s`` and rotated by yaw-pitch-roll
``(beta_s, theta_s, phi_s)``.  The pan axis is ``base_height`` above the
base origin; ``beta = theta = 0`` points the boom along +x and positive
``theta`` raises the tip.  Tether and payload angles are roll-then-pitch
deflections from the base-frame vertical, so the zero configuration hangs
straight down.

State vector layout: ``x = (q, qdot)`` with
``q = (beta, theta, L_t, phi_r, theta_r, phi_p, theta_p)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from . import kernels
from .errors import DegenerateMassMatrix, UncertaintyBoundError

NQ = kernels.NQ
NX = kernels.NX
NU = kernels.NU

STATE_NAMES = ("beta", "theta", "L_t", "phi_r", "theta_r", "phi_p", "theta_p")
ACTUATED = slice(0, 3)
PASSIVE = slice(3, 7)
_NO_DISTURBANCE = np.zeros((NX, 0, 3))


@dataclass(frozen=True)
class GeneralizedCoordinates:
    beta: float = 0.0
    theta: float = 0.0
    tether_len: float = 1.0
    rope_roll: float = 0.0
    rope_pitch: float = 0.0
    payload_roll: float = 0.0
    payload_pitch: float = 0.0

    def __post_init__(self):
        vals = self.as_array()
        if not np.all(np.isfinite(vals)):
            raise ValueError("generalized coordinates must be finite")
        if self.tether_len <= 0:
            raise ValueError("tether_len must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=float)

    @classmethod
    def from_array(cls, q) -> GeneralizedCoordinates:
        return cls(*(float(v) for v in np.asarray(q, dtype=float)[:NQ]))

    @property
    def actuated(self) -> np.ndarray:
        return self.as_array()[ACTUATED]

    @property
    def passive(self) -> np.ndarray:
        return self.as_array()[PASSIVE]


@dataclass(frozen=True)
class CraneState:
    q: GeneralizedCoordinates
    qdot: tuple = (0.0,) * NQ

    def __post_init__(self):
        qd = np.asarray(self.qdot, dtype=float)
        if qd.shape != (NQ,) or not np.all(np.isfinite(qd)):
            raise ValueError("qdot must be a finite 7-vector")
        object.__setattr__(self, "qdot", tuple(float(v) for v in qd))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.q.as_array(), np.asarray(self.qdot)])

    @classmethod
    def from_array(cls, x) -> CraneState:
        x = np.asarray(x, dtype=float)
        if x.shape != (NX,):
            raise ValueError(f"state must have shape ({NX},), got {x.shape}")
        return cls(GeneralizedCoordinates.from_array(x[:NQ]), tuple(x[NQ:]))


@dataclass(frozen=True)
class VelocityCommand:
    yaw_rate: float = 0.0
    pitch_rate: float = 0.0
    tether_rate: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.yaw_rate, self.pitch_rate, self.tether_rate])

    @classmethod
    def from_array(cls, u) -> VelocityCommand:
        return cls(*(float(v) for v in np.asarray(u, dtype=float)[:NU]))

    def within(self, bounds) -> bool:
        b = np.asarray(bounds, dtype=float)
        u = self.as_array()
        return bool(np.all(u >= b[:, 0]) and np.all(u <= b[:, 1]))


@dataclass(frozen=True)
class BaseMotionSample:
    """Measured base pose (orientation and translation) with derivatives."""

    angles: tuple = (0.0, 0.0, 0.0)
    angle_rates: tuple = (0.0, 0.0, 0.0)
    angle_accels: tuple = (0.0, 0.0, 0.0)
    translation: tuple = (0.0, 0.0, 0.0)
    translation_vel: tuple = (0.0, 0.0, 0.0)
    translation_accel: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("base motion sample must be finite")

    def as_array(self) -> np.ndarray:
        return np.concatenate([np.asarray(getattr(self, f.name), dtype=float)
                               for f in fields(self)])

    @classmethod
    def from_array(cls, b) -> BaseMotionSample:
        b = np.asarray(b, dtype=float)
        return cls(*(tuple(b[3 * i:3 * i + 3]) for i in range(6)))

    @classmethod
    def static(cls) -> BaseMotionSample:
        return cls()


@dataclass(frozen=True)
class BaseMotionProfile:
    """Sinusoidal base excitation.

    Translation amplitudes are per inertial axis; the lateral channel is y.
    Angular amplitudes are yaw, pitch, roll.  Every channel is
    ``amp * sin(2 pi f t)``.
    """

    lateral_amplitude: float = 0.05
    frequency: float = 1.0
    surge_amplitude: float = 0.0
    heave_amplitude: float = 0.0
    angular_amplitudes: tuple = (0.0, 0.0, 0.0)
    angular_frequencies: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        amps = [self.lateral_amplitude, self.surge_amplitude, self.heave_amplitude,
                *self.angular_amplitudes]
        if min(amps) < 0:
            raise ValueError("base motion amplitudes must be nonnegative")
        if self.frequency <= 0 or min(self.angular_frequencies) <= 0:
            raise ValueError("base motion frequencies must be positive")

    def as_array(self) -> np.ndarray:
        f = self.frequency
        return np.array([self.surge_amplitude, self.lateral_amplitude, self.heave_amplitude,
                         f, f, f, *self.angular_amplitudes, *self.angular_frequencies],
                        dtype=float)

    @classmethod
    def static(cls) -> BaseMotionProfile:
        return cls(lateral_amplitude=0.0)


def base_motion(t: float, profile: BaseMotionProfile) -> BaseMotionSample:
    """Base pose, velocity and acceleration of ``profile`` at time ``t``."""
    return BaseMotionSample.from_array(kernels.base_eval(float(t), profile.as_array()))


def _default_state_bounds():
    b = np.full((NX, 2), [-np.inf, np.inf])
    b[1] = (-0.3, 1.4)
    b[2] = (0.3, 2.6)
    return b


@dataclass(frozen=True)
class CraneParameters:
    boom_len: float = 2.44
    base_height: float = 1.0
    boom_mass: float = 2.0
    payload_mass: float = 0.5
    payload_len: float = 0.6
    payload_radius: float = 0.02
    actuator_time_constants: tuple = (0.1, 0.1, 0.1)
    input_bounds: tuple = ((-0.5, 0.5), (-0.5, 0.5), (-0.5, 0.5))
    state_bounds: np.ndarray = field(default_factory=_default_state_bounds)
    gravity: float = 9.81

    def __post_init__(self):
        pos = [self.boom_len, self.boom_mass, self.payload_mass, self.payload_len,
               self.payload_radius, *self.actuator_time_constants, self.gravity]
        if min(pos) <= 0:
            raise ValueError("masses, lengths, time constants and gravity must be positive")
        if self.base_height < 0:
            raise ValueError("base_height must be nonnegative")
        ub = np.asarray(self.input_bounds, dtype=float)
        sb = np.asarray(self.state_bounds, dtype=float)
        if ub.shape != (NU, 2) or np.any(ub[:, 0] > ub[:, 1]):
            raise ValueError("input_bounds must be three (lo, hi) pairs with lo <= hi")
        if sb.shape != (NX, 2) or np.any(sb[:, 0] > sb[:, 1]):
            raise ValueError("state_bounds must be fourteen (lo, hi) pairs with lo <= hi")
        object.__setattr__(self, "input_bounds", tuple(map(tuple, ub)))
        sb.setflags(write=False)
        object.__setattr__(self, "state_bounds", sb)

    def as_array(self) -> np.ndarray:
        return np.array([self.boom_len, self.base_height, self.boom_mass,
                         self.payload_mass, self.payload_len, self.payload_radius,
                         *self.actuator_time_constants, self.gravity], dtype=float)

    @property
    def u_bounds(self) -> np.ndarray:
        return np.asarray(self.input_bounds, dtype=float)


class UncertaintyRealization:
    """Additive disturbance ``delta_e(t)`` as per-state sums of sinusoids.

    ``table`` has shape (14, K, 3) holding amplitude, frequency (Hz) and
    phase.  ``bound`` is the componentwise cap (scalar or 14-vector); the
    amplitudes of each state must sum to at most its cap, which bounds
    ``|delta_e(t)|`` for every ``t``.
    """

    def __init__(self, table, bound):
        table = np.asarray(table, dtype=float).reshape(NX, -1, 3)
        bound = np.broadcast_to(np.asarray(bound, dtype=float), (NX,)).copy()
        if np.any(bound < 0):
            raise ValueError("uncertainty bound must be nonnegative")
        if np.any(np.abs(table[:, :, 0]).sum(axis=1) > bound * (1 + 1e-12) + 1e-300):
            raise UncertaintyBoundError("sinusoid amplitudes exceed the declared bound")
        self.table = table
        self.bound = bound

    def __call__(self, t: float) -> np.ndarray:
        return kernels.disturbance(float(t), self.table)

    @property
    def norm_bound(self) -> float:
        return float(self.bound.max())

    @classmethod
    def zero(cls, bound=0.0) -> UncertaintyRealization:
        return cls(np.zeros((NX, 0, 3)), bound)

    @classmethod
    def constant(cls, c, bound=None) -> UncertaintyRealization:
        c = np.broadcast_to(np.asarray(c, dtype=float), (NX,))
        table = np.zeros((NX, 1, 3))
        table[:, 0, 0] = c
        table[:, 0, 2] = np.pi / 2  # sin(pi/2) = 1 at zero frequency
        return cls(table, np.abs(c) if bound is None else bound)

    @classmethod
    def random_sinusoids(cls, bound, rng, harmonics=3, fmin=0.2, fmax=2.0):
        """Seeded smooth realization scaled to touch, never exceed, ``bound``."""
        bound = np.broadcast_to(np.asarray(bound, dtype=float), (NX,))
        w = rng.uniform(0.2, 1.0, size=(NX, harmonics))
        w /= w.sum(axis=1, keepdims=True)
        table = np.zeros((NX, harmonics, 3))
        table[:, :, 0] = w * bound[:, None] * (1 - 1e-12)
        table[:, :, 1] = rng.uniform(fmin, fmax, size=(NX, harmonics))
        table[:, :, 2] = rng.uniform(0, 2 * np.pi, size=(NX, harmonics))
        return cls(table, bound)

    def check(self, t: float) -> np.ndarray:
        d = self(t)
        if np.any(np.abs(d) > self.bound * (1 + 1e-9) + 1e-15):
            raise UncertaintyBoundError(f"disturbance exceeds its bound at t={t}")
        return d


# ---------------------------------------------------------------------------
# argument coercion


def _x(x) -> np.ndarray:
    if isinstance(x, CraneState):
        return x.as_array()
    return np.asarray(x, dtype=float)


def _q(q) -> np.ndarray:
    if isinstance(q, GeneralizedCoordinates):
        return q.as_array()
    return np.asarray(q, dtype=float)[:NQ]


def _u(u) -> np.ndarray:
    if isinstance(u, VelocityCommand):
        return u.as_array()
    return np.asarray(u, dtype=float)


def _base(base) -> np.ndarray:
    if base is None:
        return np.zeros(18)
    if isinstance(base, BaseMotionSample):
        return base.as_array()
    return np.asarray(base, dtype=float)


def _prm(params) -> np.ndarray:
    if isinstance(params, CraneParameters):
        return params.as_array()
    return np.asarray(params, dtype=float)


def _prof(profile) -> np.ndarray:
    if isinstance(profile, BaseMotionProfile):
        return profile.as_array()
    return np.asarray(profile, dtype=float)


# ---------------------------------------------------------------------------
# operations


def payload_pose(q, base, params) -> np.ndarray:
    """Inertial position of the payload bottom."""
    x = np.concatenate([_q(q), np.zeros(NQ)])
    p, _, _, _ = kernels.payload_output(x, _base(base), _prm(params))
    return p


def payload_velocity(x, base, params) -> np.ndarray:
    """Inertial velocity of the payload bottom, base motion included."""
    _, v, _, _ = kernels.payload_output(_x(x), _base(base), _prm(params))
    return v


def payload_jacobian(q, base, params) -> np.ndarray:
    """``d p_p / d q`` (3 x 7)."""
    x = np.concatenate([_q(q), np.zeros(NQ)])
    return kernels.payload_output(x, _base(base), _prm(params))[2]


def kinetic_energy(x, base, params) -> float:
    return float(kernels.energies(_x(x), _base(base), _prm(params))[0])


def potential_energy(q, base, params) -> float:
    """Gravitational potential with the inertial ``z = 0`` datum."""
    x = np.concatenate([_q(q), np.zeros(NQ)])
    return float(kernels.energies(x, _base(base), _prm(params))[1])


def mass_matrix(q, params) -> np.ndarray:
    """Inertia matrix ``D(q)``; raises if it is not positive definite."""
    x = np.concatenate([_q(q), np.zeros(NQ)])
    D, _ = kernels.dynamics_terms(x, np.zeros(18), _prm(params))
    lam = np.linalg.eigvalsh(D)[0]
    if lam < 1e-9:
        raise DegenerateMassMatrix(f"mass matrix min eigenvalue {lam:.3e} < 1e-9")
    return D


def bias_forces(x, base, params) -> np.ndarray:
    """Coriolis, gravity and base-induced inertial forces ``H``."""
    return kernels.dynamics_terms(_x(x), _base(base), _prm(params))[1]


def vector_field(t, x, u, base_signal, params) -> np.ndarray:
    """Nominal ``xdot = f(t, x) + g(x) u``."""
    return kernels.vector_field(float(t), _x(x), _u(u), _prof(base_signal),
                                _prm(params), _NO_DISTURBANCE)


def perturbed_vector_field(t, x, u, delta: UncertaintyRealization, base_signal,
                           params) -> np.ndarray:
    """``vector_field`` plus the disturbance, checked against its bound at ``t``."""
    delta.check(t)
    return kernels.vector_field(float(t), _x(x), _u(u), _prof(base_signal),
                                _prm(params), delta.table)


def input_matrix(x, params) -> np.ndarray:
    """``g(x)`` (14 x 3); the drift is recovered as ``vector_field(u=0)``."""
    prm = _prm(params)
    xa = _x(x)
    base = np.zeros(18)
    f0 = kernels.field_at(xa, np.zeros(NU), base, prm)
    cols = [kernels.field_at(xa, e, base, prm) - f0 for e in np.eye(NU)]
    return np.stack(cols, axis=1)
