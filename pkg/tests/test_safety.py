import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cranesafe import kernels
from cranesafe.dynamics import NQ, NX, BaseMotionProfile, BaseMotionSample, CraneParameters
from cranesafe.errors import InfeasibleBoxError
from cranesafe.safety import (BoxSpec, ObstacleSet, SafetyBox, TargetSafetyParams, box_safety,
                              box_safety_jacobian, composite_safety, free_space_bounds,
                              moving_box, target_safety, target_safety_gradient, update_box)

from .conftest import random_base, random_state

PRM = CraneParameters()
TP = TargetSafetyParams()


def h_direct(p, pt, prm: TargetSafetyParams):
    """The funnel formula written out with math.exp."""

    def sig(z):
        return 1.0 / (1.0 + math.exp(-z))

    rho2 = (p[0] - pt[0]) ** 2 + (p[1] - pt[1]) ** 2
    surf = (prm.peak_amp * sig(prm.steepness * (rho2 - prm.rho1 ** 2))
            - (prm.peak_amp - prm.plateau_gap) * sig(prm.steepness * (rho2 - prm.rho2 ** 2)))
    return p[2] - pt[2] - surf


def state_above_target(dz, lateral=(0.0, 0.0)):
    """Hanging state placing the payload bottom ``dz`` above the default target."""
    x = np.zeros(NX)
    px = 2.0 + lateral[0]
    x[0] = math.atan2(lateral[1], px)
    x[1] = math.acos(math.hypot(px, lateral[1]) / PRM.boom_len)
    x[2] = PRM.base_height + PRM.boom_len * math.sin(x[1]) - PRM.payload_len - dz
    return x


class TestTargetFunction:
    def test_params_validation(self):
        with pytest.raises(ValueError):
            TargetSafetyParams(rho1=0.02, rho2=0.03)
        with pytest.raises(ValueError):
            TargetSafetyParams(peak_amp=0.1, plateau_gap=0.2)
        with pytest.raises(ValueError):
            TargetSafetyParams(payload_radius=0.03)
        with pytest.raises(ValueError):
            TargetSafetyParams(steepness=0)

    def test_golden_aligned_value(self):
        x = state_above_target(0.10)
        h = target_safety(0.0, x, TP, BaseMotionSample(), PRM)
        assert h == pytest.approx(0.10109869426287627, abs=1e-12)

    def test_matches_direct_formula(self, rng):
        prof = BaseMotionProfile(angular_amplitudes=(0.05, 0.05, 0.05))
        for _ in range(200):
            x = random_state(rng)
            t = rng.uniform(0, 5)
            base = kernels.base_eval(t, prof.as_array())
            p = kernels.payload_output(x, base, PRM.as_array())[0]
            pt = TP.position(base)
            assert target_safety(t, x, TP, prof, PRM) == pytest.approx(h_direct(p, pt, TP),
                                                                       abs=1e-12)

    def test_far_field_saturation(self):
        x = state_above_target(0.4, lateral=(-0.5, 0.0))
        h = target_safety(0.0, x, TP, BaseMotionSample(), PRM)
        assert h == pytest.approx(0.4 - TP.plateau_gap, abs=1e-12)

    def test_aligned_saturation(self):
        steep = TargetSafetyParams(steepness=1e6)
        x = state_above_target(0.07)
        assert target_safety(0.0, x, steep, BaseMotionSample(), PRM) == pytest.approx(0.07,
                                                                                      abs=1e-12)

    def test_funnel_shape(self):
        """The zero level set is lower over the hole than at the cone mouth."""
        assert TP.surface(0.0) < TP.surface(TP.rho1 ** 2)

    @given(st.floats(0.03, 0.5), st.floats(0.05, 0.45), st.floats(0.0, 0.15))
    def test_funnel_shape_property(self, peak, gap_frac, rho2):
        gap = peak * (0.5 + 0.5 * gap_frac)  # plateau gap above half the peak
        prm = TargetSafetyParams(peak_amp=peak, plateau_gap=gap, rho1=rho2 + 0.045,
                                 rho2=max(rho2, 1e-3))
        assert prm.surface(0.0) < prm.surface(prm.rho1 ** 2)

    @given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-1, 1), st.floats(1e-4, 0.5))
    def test_monotone_in_height(self, px, py, pz, dz):
        pt = np.zeros(3)
        tp = TP.as_array()
        lo = kernels.target_h(np.array([px, py, pz]), pt, tp)[0]
        hi = kernels.target_h(np.array([px, py, pz + dz]), pt, tp)[0]
        assert hi == pytest.approx(lo + dz, abs=1e-12)

    def test_finite_everywhere(self, rng):
        tp = TP.as_array()
        P = rng.uniform(-50, 50, (100000, 3))
        for p in P[::1000]:
            h, g = kernels.target_h(p, np.zeros(3), tp)
            assert np.isfinite(h) and np.all(np.isfinite(g))
        huge = TargetSafetyParams(steepness=1e12)
        h, g = kernels.target_h(np.array([10.0, 0, 0]), np.zeros(3), huge.as_array())
        assert np.isfinite(h) and np.all(np.isfinite(g))


class TestGradient:
    def test_central_differences(self, rng):
        prof = BaseMotionProfile()
        eps = 1e-6
        checked = 0
        while checked < 100:
            x = random_state(rng)
            t = rng.uniform(0, 3)
            g = target_safety_gradient(t, x, TP, prof, PRM)
            fd = np.zeros(NX)
            for j in range(NX):
                e = np.zeros(NX)
                e[j] = eps
                fd[j] = (target_safety(t, x + e, TP, prof, PRM)
                         - target_safety(t, x - e, TP, prof, PRM)) / (2 * eps)
            scale = max(1.0, np.abs(g).max())
            assert np.abs(g - fd).max() <= 1e-5 * scale, (g, fd)
            assert np.all(g[NQ:] == 0)
            checked += 1

    def test_near_funnel_gradient(self, rng):
        eps = 1e-7
        for _ in range(50):
            off = rng.uniform(-0.09, 0.09, 2)
            x = state_above_target(rng.uniform(-0.05, 0.3), tuple(off))
            x[3:7] += rng.uniform(-0.01, 0.01, 4)
            g = target_safety_gradient(0.0, x, TP, BaseMotionSample(), PRM)
            fd = np.array([(target_safety(0.0, x + eps * e, TP, BaseMotionSample(), PRM)
                            - target_safety(0.0, x - eps * e, TP, BaseMotionSample(), PRM))
                           / (2 * eps) for e in np.eye(NX)])
            assert np.abs(g - fd).max() <= 1e-5 * max(1.0, np.abs(g).max())

    def test_far_field_gradient_is_height_gradient(self):
        x = state_above_target(0.4, lateral=(-0.6, 0.0))
        g = target_safety_gradient(0.0, x, TP, BaseMotionSample(), PRM)
        Jp = kernels.payload_output(x, np.zeros(18), PRM.as_array())[2]
        np.testing.assert_allclose(g[:NQ], Jp[2], atol=1e-12)


class TestBox:
    BOX = SafetyBox((0.0, -1.0, -0.5), (3.0, 1.0, 1.5))

    def test_invalid_box(self):
        with pytest.raises(InfeasibleBoxError):
            SafetyBox((0, 0, 0), (1, 0, 1))
        box = SafetyBox(lambda t: np.zeros(3), lambda t: np.full(3, 1.0 - t))
        box.bounds(0.5)
        with pytest.raises(InfeasibleBoxError):
            box.bounds(1.0)

    def test_center_and_faces(self):
        x = state_above_target(0.5)
        p = kernels.payload_output(x, np.zeros(18), PRM.as_array())[0]
        half = np.array([0.3, 0.2, 0.4])
        box = SafetyBox(p - half, p + half)
        np.testing.assert_allclose(box_safety(0.0, x, box, BaseMotionSample(), PRM),
                                   np.concatenate([half, half]), atol=1e-12)
        face = SafetyBox(p - half, p + np.array([0.0, 1, 1]) * half + np.array([1e-300, 0, 0]))
        assert box_safety(0.0, x, face, BaseMotionSample(), PRM)[3] == pytest.approx(0, abs=1e-12)

    def test_sign_flip_across_face(self):
        vals = []
        for dx in np.linspace(-0.2, 0.2, 41):
            x = state_above_target(0.5, lateral=(dx, 0.0))
            vals.append(box_safety(0.0, x, SafetyBox((0, -1, -1), (2.0, 1, 2)),
                                   BaseMotionSample(), PRM)[3])
        vals = np.array(vals)
        assert np.all(np.diff(vals) < 0)
        assert vals[0] > 0 > vals[-1]

    def test_jacobian(self, rng):
        x = random_state(rng)
        J = box_safety_jacobian(0.0, x, self.BOX, BaseMotionSample(), PRM)
        eps = 1e-6
        fd = np.stack([(box_safety(0.0, x + eps * e, self.BOX, BaseMotionSample(), PRM)
                        - box_safety(0.0, x - eps * e, self.BOX, BaseMotionSample(), PRM))
                       / (2 * eps) for e in np.eye(NX)], axis=1)
        np.testing.assert_allclose(J, fd, atol=1e-8)


class TestComposite:
    def test_brute_force_min(self, rng):
        prof = BaseMotionProfile()
        box = TestBox.BOX
        for _ in range(100):
            x = random_state(rng)
            t = rng.uniform(0, 2)
            vals = [target_safety(t, x, TP, prof, PRM),
                    *box_safety(t, x, box, prof, PRM)]
            assert composite_safety(t, x, TP, box, prof, PRM) == min(vals)

    def test_sign_logic(self):
        x = state_above_target(0.5)
        big = SafetyBox((0, -1, -1), (3, 1, 3))
        assert composite_safety(0.0, x, TP, big, BaseMotionSample(), PRM) > 0
        small = SafetyBox((0, -1, 2), (3, 1, 3))
        assert composite_safety(0.0, x, TP, small, BaseMotionSample(), PRM) < 0
        low = state_above_target(-0.2, lateral=(0.3, 0))
        assert composite_safety(0.0, low, TP, big, BaseMotionSample(), PRM) < 0


class TestUpdateBox:
    SPEC = BoxSpec()

    def test_no_obstacles_identity(self):
        box = update_box(0.0, BaseMotionSample(), ObstacleSet(), self.SPEC)
        lo, hi = box.bounds(0.0)
        np.testing.assert_array_equal(lo, self.SPEC.lower)
        np.testing.assert_array_equal(hi, self.SPEC.upper)

    def test_pure_translation(self):
        base = BaseMotionSample(translation=(0.05, 0.0, 0.0))
        obs = ObstacleSet((((2.8, -0.2, 0.0), (3.0, 0.2, 3.0)),))
        lo0, hi0 = update_box(0.0, BaseMotionSample(), obs, self.SPEC).bounds(0.0)
        lo1, hi1 = update_box(0.0, base, obs, self.SPEC).bounds(0.0)
        np.testing.assert_allclose(lo1 - lo0, [0.05, 0, 0], atol=1e-15)
        np.testing.assert_allclose(hi1 - hi0, [0.05, 0, 0], atol=1e-15)

    def test_block_from_plus_x(self):
        obs = ObstacleSet((((2.8, -2.0, -1.0), (4.0, 2.0, 3.0)),))
        lo, hi = update_box(0.0, BaseMotionSample(), obs, self.SPEC).bounds(0.0)
        np.testing.assert_allclose(hi, [2.8 - self.SPEC.margin, 1.0, 2.5])
        np.testing.assert_allclose(lo, self.SPEC.lower)

    def test_interval_subtraction_oracle(self, rng):
        """Single intruding block: the kept box is the largest of the six face cuts."""
        for _ in range(100):
            c = rng.uniform([1.0, -0.8, -0.2], [3.0, 0.8, 2.3])
            e = rng.uniform(0.05, 0.4, 3)
            obs = ObstacleSet(((tuple(c - e), tuple(c + e)),))
            lo0 = np.asarray(self.SPEC.lower)
            hi0 = np.asarray(self.SPEC.upper)
            olo, ohi = c - e - self.SPEC.margin, c + e + self.SPEC.margin
            best = -1.0
            for a in range(3):
                for new_hi in (True, False):
                    lo, hi = lo0.copy(), hi0.copy()
                    if new_hi:
                        hi[a] = min(hi[a], olo[a])
                    else:
                        lo[a] = max(lo[a], ohi[a])
                    if np.all(hi > lo):
                        best = max(best, float(np.prod(hi - lo)))
            if best < 0:
                with pytest.raises(InfeasibleBoxError):
                    free_space_bounds(BaseMotionSample(), obs, self.SPEC)
                continue
            lo, hi = free_space_bounds(BaseMotionSample(), obs, self.SPEC)
            assert np.prod(hi - lo) == pytest.approx(best, rel=1e-12)
            assert np.all(lo < hi)
            # the kept box does not intersect the grown block
            assert np.any(hi <= olo + 1e-12) or np.any(lo >= ohi - 1e-12)

    @given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2), st.floats(-0.2, 0.2),
           st.floats(-0.1, 0.1), st.floats(-0.1, 0.1))
    def test_rotated_box_inside_platform_box(self, yaw, pitch, roll, tx, ty):
        base = BaseMotionSample(angles=(yaw, pitch, roll), translation=(tx, ty, 0.0))
        lo, hi = update_box(0.0, base, ObstacleSet(), self.SPEC).bounds(0.0)
        assert np.all(lo < hi)
        R = kernels.base_frame_terms(base.as_array())[0]
        corners = np.array([[a, b, c] for a in (lo[0], hi[0]) for b in (lo[1], hi[1])
                            for c in (lo[2], hi[2])])
        local = (corners - np.asarray(base.translation)) @ R
        assert np.all(local >= np.asarray(self.SPEC.lower) - 1e-9)
        assert np.all(local <= np.asarray(self.SPEC.upper) + 1e-9)

    def test_blocking_obstacle_errors(self):
        obs = ObstacleSet((((-10, -10, -10), (10, 10, 10)),))
        with pytest.raises(InfeasibleBoxError):
            update_box(0.0, BaseMotionSample(), obs, self.SPEC)

    def test_obstacle_validation(self):
        with pytest.raises(ValueError):
            ObstacleSet((((0, 0, 0), (0, 1, 1)),))

    def test_moving_box_follows_profile(self, rng):
        prof = BaseMotionProfile()
        box = moving_box(prof, ObstacleSet(), self.SPEC)
        for t in rng.uniform(0, 3, 10):
            lo, hi = box.bounds(t)
            lo2, hi2 = update_box(t, prof, ObstacleSet(), self.SPEC).bounds(t)
            assert np.array_equal(lo, lo2) and np.array_equal(hi, hi2)


def test_random_base_states_in_box(rng):
    base = random_base(rng, 0.3)
    x = random_state(rng)
    vals = box_safety(0.0, x, SafetyBox.unbounded(), base, PRM)
    assert np.all(vals > 0)
