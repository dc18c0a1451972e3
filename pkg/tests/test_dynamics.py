import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from cranesafe import kernels
from cranesafe.dynamics import (NQ, NX, BaseMotionProfile, BaseMotionSample, CraneParameters,
                                DegenerateMassMatrix, UncertaintyRealization, base_motion,
                                bias_forces, input_matrix, kinetic_energy, mass_matrix,
                                payload_jacobian, payload_pose, payload_velocity,
                                perturbed_vector_field, potential_energy, vector_field)
from cranesafe.errors import UncertaintyBoundError

from .conftest import random_base, random_state

PRM = CraneParameters()


def chain_oracle(q, base: BaseMotionSample, prm: CraneParameters):
    """Payload bottom through a chain of 4x4 homogeneous transforms.

    Tether and payload orientations are relative to the base frame, so the
    chain undoes each joint rotation after its link translation.
    """

    def rot(seq, angles):
        T = np.eye(4)
        T[:3, :3] = Rotation.from_euler(seq, angles).as_matrix()
        return T

    def trans(p):
        T = np.eye(4)
        T[:3, 3] = p
        return T

    def inv(T):
        return np.linalg.inv(T)

    boom = rot("ZY", [q[0], -q[1]])
    tether = rot("XY", [q[3], q[4]])
    payload = rot("XY", [q[5], q[6]])
    T = trans(base.translation) @ rot("ZYX", list(base.angles))
    T = T @ trans([0, 0, prm.base_height]) @ boom @ trans([prm.boom_len, 0, 0]) @ inv(boom)
    T = T @ tether @ trans([0, 0, -q[2]]) @ inv(tether)
    T = T @ payload @ trans([0, 0, -prm.payload_len])
    return T[:3, 3]


class TestKinematics:
    def test_zero_configuration(self):
        q = np.zeros(NQ)
        q[2] = 1.0
        np.testing.assert_allclose(payload_pose(q, BaseMotionSample(), PRM), [2.44, 0, -0.6],
                                   atol=1e-15)

    def test_pure_yaw(self):
        q = np.zeros(NQ)
        q[2] = 1.0
        q[0] = np.pi / 2
        np.testing.assert_allclose(payload_pose(q, BaseMotionSample(), PRM), [0, 2.44, -0.6],
                                   atol=1e-15)

    def test_transform_chain_oracle(self, rng):
        for _ in range(200):
            x = random_state(rng)
            base = random_base(rng)
            np.testing.assert_allclose(payload_pose(x[:NQ], base, PRM),
                                       chain_oracle(x[:NQ], base, PRM), atol=1e-12)

    def test_velocity_at_rest(self):
        x = np.zeros(NX)
        x[2] = 1.0
        assert np.all(payload_velocity(x, BaseMotionSample(), PRM) == 0)

    def test_rigid_translation(self):
        x = np.zeros(NX)
        x[2] = 1.0
        base = BaseMotionSample(translation_vel=(0.1, 0, 0))
        np.testing.assert_allclose(payload_velocity(x, base, PRM), [0.1, 0, 0], atol=1e-15)

    def test_velocity_matches_pose_difference(self, rng):
        prof = BaseMotionProfile(lateral_amplitude=0.05, heave_amplitude=0.02,
                                 angular_amplitudes=(0.05, 0.03, 0.04))
        dt = 1e-6
        for _ in range(20):
            x = random_state(rng)
            t = rng.uniform(0, 2)

            def pose(s):
                return payload_pose(x[:NQ] + (s - t) * x[NQ:], base_motion(s, prof), PRM)

            fd = (pose(t + dt) - pose(t - dt)) / (2 * dt)
            v = payload_velocity(x, base_motion(t, prof), PRM)
            np.testing.assert_allclose(v, fd, atol=1e-7)

    def test_jacobian_times_rates(self, rng):
        for _ in range(50):
            x = random_state(rng)
            J = payload_jacobian(x[:NQ], BaseMotionSample(), PRM)
            np.testing.assert_allclose(payload_velocity(x, BaseMotionSample(), PRM),
                                       J @ x[NQ:], atol=1e-13)


class TestEnergies:
    def test_rest_has_no_kinetic_energy(self, rng):
        x = random_state(rng)
        x[NQ:] = 0
        assert kinetic_energy(x, BaseMotionSample(), PRM) == 0.0

    def test_lifting_payload(self, rng):
        q = random_state(rng)[:NQ]
        dz = 0.137
        q2 = q.copy()
        q2[2] -= dz / (np.cos(q[3]) * np.cos(q[4]))
        dv = potential_energy(q2, BaseMotionSample(), PRM) - potential_energy(
            q, BaseMotionSample(), PRM)
        assert dv == pytest.approx(PRM.payload_mass * PRM.gravity * dz, rel=1e-12)

    def test_lumped_mass_oracle(self, rng):
        # independent: 1/2 sum m |v_i|^2 with v_i by finite differences of positions
        for _ in range(20):
            x = random_state(rng)
            base = random_base(rng)
            b = base.as_array()
            w, W, _, mass = kernels.crane_points(x[:NQ], x[NQ:], PRM.as_array())
            R, Om, _ = kernels.base_frame_terms(b)
            ke = 0.0
            for i in range(len(mass)):
                v = b[12:15] + R @ (Om @ w[i] + W[i] @ x[NQ:])
                ke += 0.5 * mass[i] * v @ v
            root = b[12:15] + R @ (Om @ np.array([0, 0, PRM.base_height]))
            ke += 0.5 * PRM.boom_mass / 6 * root @ root
            assert kinetic_energy(x, base, PRM) == pytest.approx(ke, rel=1e-12)


class TestMassMatrix:
    def test_symmetric_positive_definite(self, rng):
        sb = PRM.state_bounds
        for _ in range(1000):
            q = np.array([rng.uniform(-np.pi, np.pi), rng.uniform(*sb[1]), rng.uniform(*sb[2]),
                          *rng.uniform(-1.2, 1.2, 4)])
            D = mass_matrix(q, PRM)
            assert np.abs(D - D.T).max() < 1e-9
            assert np.linalg.eigvalsh(D)[0] > 0

    def test_kinetic_energy_hessian(self, rng):
        h = 1e-3
        for _ in range(10):
            x = random_state(rng)
            D = mass_matrix(x[:NQ], PRM)

            def ke(qd):
                return kinetic_energy(np.concatenate([x[:NQ], qd]), BaseMotionSample(), PRM)

            Hs = np.zeros((NQ, NQ))
            E = np.eye(NQ) * h
            for i in range(NQ):
                for j in range(NQ):
                    Hs[i, j] = (ke(x[NQ:] + E[i] + E[j]) - ke(x[NQ:] + E[i] - E[j])
                                - ke(x[NQ:] - E[i] + E[j]) + ke(x[NQ:] - E[i] - E[j])) / (4 * h * h)
            np.testing.assert_allclose(Hs, D, atol=1e-6)

    def test_pendulum_reduction(self):
        prm = CraneParameters(boom_mass=1e-9, payload_radius=1e-9, payload_len=1e-9)
        q = np.zeros(NQ)
        q[2] = 1.3
        # the reduced system is singular in the payload angles, so read D unchecked
        D, _ = kernels.dynamics_terms(np.concatenate([q, np.zeros(NQ)]), np.zeros(18),
                                      prm.as_array())
        m, L = prm.payload_mass, 1.3
        assert D[3, 3] == pytest.approx(m * L * L, rel=1e-6)
        assert D[4, 4] == pytest.approx(m * L * L, rel=1e-6)

    def test_degenerate_rejected(self):
        prm = CraneParameters(boom_mass=1e-12, payload_mass=1e-12)
        with pytest.raises(DegenerateMassMatrix):
            mass_matrix(np.zeros(NQ), prm)


def euler_lagrange_oracle(x, base: BaseMotionSample, prm, h=1e-5):
    """H = d/dt(dL/dqd) - dL/dq at qdd = 0, by dense finite differences of the energies.

    Base motion enters through time; d/dt includes the explicit time dependence
    through a base sample advanced with its own rates and accelerations.
    """
    b = base.as_array()

    def lag_grad_qd(q, qd, bb):
        g = np.zeros(NQ)
        for j in range(NQ):
            e = np.zeros(NQ)
            e[j] = h
            g[j] = (kinetic_energy(np.concatenate([q, qd + e]), bb, prm)
                    - kinetic_energy(np.concatenate([q, qd - e]), bb, prm)) / (2 * h)
        return g

    def lagrangian(q, qd, bb):
        x_ = np.concatenate([q, qd])
        return kinetic_energy(x_, bb, prm) - potential_energy(q, bb, prm)

    def advance(s):
        nb = b.copy()
        nb[0:3] += s * b[3:6] + 0.5 * s * s * b[6:9]
        nb[3:6] += s * b[6:9]
        nb[9:12] += s * b[12:15] + 0.5 * s * s * b[15:18]
        nb[12:15] += s * b[15:18]
        return BaseMotionSample.from_array(nb)

    q, qd = x[:NQ], x[NQ:]
    dt = 1e-4
    ddt = (lag_grad_qd(q + dt * qd, qd, advance(dt))
           - lag_grad_qd(q - dt * qd, qd, advance(-dt))) / (2 * dt)
    dq = np.zeros(NQ)
    for j in range(NQ):
        e = np.zeros(NQ)
        e[j] = h
        dq[j] = (lagrangian(q + e, qd, base) - lagrangian(q - e, qd, base)) / (2 * h)
    return ddt - dq


class TestBiasForces:
    def test_equilibrium_hang(self):
        x = np.zeros(NX)
        x[1] = 0.4
        x[2] = 1.2
        H = bias_forces(x, BaseMotionSample(), PRM)
        np.testing.assert_allclose(H[3:], 0, atol=1e-12)

    def test_euler_lagrange_static_base(self, rng):
        for _ in range(30):
            x = random_state(rng)
            H = bias_forces(x, BaseMotionSample(), PRM)
            np.testing.assert_allclose(H, euler_lagrange_oracle(x, BaseMotionSample(), PRM),
                                       atol=1e-5, rtol=1e-5)

    def test_euler_lagrange_moving_base(self, rng):
        for _ in range(30):
            x = random_state(rng)
            base = random_base(rng, 0.5)
            H = bias_forces(x, base, PRM)
            np.testing.assert_allclose(H, euler_lagrange_oracle(x, base, PRM), atol=1e-5,
                                       rtol=1e-5)

    def test_linear_in_base_acceleration(self, rng):
        x = random_state(rng)
        b = random_base(rng).as_array()
        b0 = b.copy()
        b0[6:9] = 0
        b1, b2 = b0.copy(), b0.copy()
        b1[6:9] = b[6:9]
        b2[6:9] = 2 * b[6:9]
        h0, h1, h2 = (bias_forces(x, bb, PRM) for bb in (b0, b1, b2))
        np.testing.assert_allclose(h2 - h0, 2 * (h1 - h0), atol=1e-12)


class TestVectorField:
    def test_actuator_fixed_point(self, rng):
        x = random_state(rng)
        xd = vector_field(0.0, x, x[NQ:NQ + 3], BaseMotionProfile(), PRM)
        np.testing.assert_allclose(xd[NQ:NQ + 3], 0, atol=1e-15)

    def test_control_affine(self, rng):
        for _ in range(20):
            x = random_state(rng)
            t = rng.uniform(0, 3)
            prof = BaseMotionProfile()
            f0 = vector_field(t, x, np.zeros(3), prof, PRM)
            u = rng.uniform(-0.5, 0.5, 3)
            f1 = vector_field(t, x, u, prof, PRM)
            G = np.stack([vector_field(t, x, e, prof, PRM) - f0 for e in np.eye(3)], axis=1)
            assert np.abs(f1 - (f0 + G @ u)).max() < 1e-12
        g = input_matrix(x, PRM)
        assert g.shape == (NX, 3)

    def test_monolithic_solve_oracle(self, rng):
        sig = np.asarray(PRM.actuator_time_constants)
        for _ in range(30):
            x = random_state(rng)
            t = rng.uniform(0, 3)
            u = rng.uniform(-0.5, 0.5, 3)
            prof = BaseMotionProfile(angular_amplitudes=(0.05, 0.05, 0.05))
            base = base_motion(t, prof)
            D = mass_matrix(x[:NQ], PRM)
            H = bias_forces(x, base, PRM)
            # actuated accelerations prescribed; passive rows of D qdd + H = 0 solved densely
            a1 = (u - x[NQ:NQ + 3]) / sig
            K = np.zeros((NQ, NQ))
            rhs = np.zeros(NQ)
            K[:3, :3] = np.eye(3)
            rhs[:3] = a1
            K[3:] = D[3:]
            rhs[3:] = -H[3:]
            qdd = np.linalg.solve(K, rhs)
            xd = vector_field(t, x, u, prof, PRM)
            np.testing.assert_allclose(xd[:NQ], x[NQ:], atol=0)
            np.testing.assert_allclose(xd[NQ:], qdd, atol=1e-10, rtol=1e-10)


class TestUncertainty:
    def test_zero_disturbance(self, rng):
        x = random_state(rng)
        u = rng.uniform(-0.5, 0.5, 3)
        prof = BaseMotionProfile()
        a = perturbed_vector_field(0.3, x, u, UncertaintyRealization.zero(), prof, PRM)
        assert np.array_equal(a, vector_field(0.3, x, u, prof, PRM))

    def test_constant_disturbance(self, rng):
        x = random_state(rng)
        u = rng.uniform(-0.5, 0.5, 3)
        c = rng.uniform(-0.1, 0.1, NX)
        prof = BaseMotionProfile()
        a = perturbed_vector_field(0.3, x, u, UncertaintyRealization.constant(c), prof, PRM)
        np.testing.assert_allclose(a - vector_field(0.3, x, u, prof, PRM), c, atol=1e-15)

    def test_sinusoids_respect_bound(self, rng):
        bound = rng.uniform(0, 0.2, NX)
        d = UncertaintyRealization.random_sinusoids(bound, rng)
        vals = np.array([d(t) for t in np.arange(0, 10, 1e-3)])
        assert np.all(np.abs(vals) <= bound)

    def test_amplitude_over_bound_rejected(self):
        table = np.zeros((NX, 1, 3))
        table[0, 0, 0] = 1.0
        with pytest.raises(UncertaintyBoundError):
            UncertaintyRealization(table, 0.5)


class TestBaseMotion:
    def test_origin(self):
        s = base_motion(0.0, BaseMotionProfile(lateral_amplitude=0.05, frequency=1.0))
        assert s.translation == (0.0, 0.0, 0.0)
        assert s.translation_vel[1] == pytest.approx(2 * np.pi * 0.05)

    def test_peak_to_peak(self):
        prof = BaseMotionProfile(lateral_amplitude=0.05, frequency=1.0)
        y = [base_motion(t, prof).translation[1] for t in np.linspace(0, 1, 4001)]
        assert max(y) - min(y) == pytest.approx(0.10, abs=1e-9)

    @given(st.floats(0, 10), st.floats(0.0, 0.2), st.floats(0.1, 3.0))
    def test_sinusoid_identity(self, t, amp, f):
        prof = BaseMotionProfile(lateral_amplitude=amp, frequency=f,
                                 angular_amplitudes=(amp, amp, amp),
                                 angular_frequencies=(f, f, f))
        s = base_motion(t, prof)
        w2 = (2 * np.pi * f) ** 2
        assert s.translation_accel[1] == pytest.approx(-w2 * s.translation[1], abs=1e-12)
        np.testing.assert_allclose(s.angle_accels, -w2 * np.asarray(s.angles), atol=1e-12)

    def test_invalid_profile(self):
        with pytest.raises(ValueError):
            BaseMotionProfile(lateral_amplitude=-1)
        with pytest.raises(ValueError):
            BaseMotionProfile(frequency=0)


def test_energy_drift_torque_free():
    x0 = np.zeros(NX)
    x0[:NQ] = [0.3, 0.5, 1.1, 0.3, -0.2, 0.25, 0.15]
    x0[NQ:] = [0.2, -0.1, 0.05, 0.3, 0.2, -0.4, 0.3]
    base = np.zeros(18)
    prm = PRM.as_array()
    traj = kernels.rk4_torque_free(x0, base, 1e-3, 10000, prm)
    e = np.array([sum(kernels.energies(x, base, prm)) for x in traj[::100]])
    drift = np.abs(e - e[0]).max() / abs(e[0])
    assert drift < 1e-4
