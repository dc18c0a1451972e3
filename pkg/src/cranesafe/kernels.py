"""Numeric kernels shared by every module.

Everything here operates on flat arrays so it can be compiled by numba
(see :mod:`cranesafe._accel`).  Layouts:

``prm`` (crane parameters, length 10)
    boom_len, base_height, boom_mass, payload_mass, payload_len,
    payload_radius, sigma_beta, sigma_theta, sigma_L, gravity

``base`` (base motion sample, length 18)
    angles (yaw, pitch, roll), angle rates, angle accels,
    translation, translation velocity, translation acceleration

``prof`` (sinusoidal base profile, length 12)
    translation amplitudes (x, y, z), translation frequencies (Hz),
    angle amplitudes (yaw, pitch, roll), angle frequencies (Hz)

``dtab`` (additive disturbance, shape (14, K, 3))
    amplitude, frequency (Hz), phase per state and harmonic

``tprm`` (target safety parameters, length 8)
    gamma0, gamma1, c0, rho1, rho2, target x, y, z in the platform frame

Kernels are dtype generic: passing complex ``x``/``u`` yields complex
results, which is how the shooting sensitivities are obtained.
"""

import numpy as np

from ._accel import jit

NQ = 7
NX = 14
NU = 3
NPTS = 8  # moving lumped masses: boom mid, boom tip, payload top, bottom, 4 equatorial
BOTTOM = 3
SIGMOID_CLAMP = 500.0
TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# base frame


@jit
def base_frame_terms(base):
    """Base orientation R with Omega = R^T Rdot and Psi = R^T Rddot.

    Uses the body angular velocity of the yaw-pitch-roll sequence, so
    ``Omega = [w]x`` and ``Psi = [wdot]x + [w]x^2``.
    """
    ps, th, ph = base[0], base[1], base[2]
    dps, dth, dph = base[3], base[4], base[5]
    aps, ath, aph = base[6], base[7], base[8]
    cy, sy = np.cos(ps), np.sin(ps)
    cp, sp = np.cos(th), np.sin(th)
    cr, sr = np.cos(ph), np.sin(ph)
    R = np.empty((3, 3))
    R[0, 0] = cy * cp
    R[0, 1] = cy * sp * sr - sy * cr
    R[0, 2] = cy * sp * cr + sy * sr
    R[1, 0] = sy * cp
    R[1, 1] = sy * sp * sr + cy * cr
    R[1, 2] = sy * sp * cr - cy * sr
    R[2, 0] = -sp
    R[2, 1] = cp * sr
    R[2, 2] = cp * cr
    w0 = dph - sp * dps
    w1 = cr * dth + sr * cp * dps
    w2 = -sr * dth + cr * cp * dps
    a0 = aph - cp * dth * dps - sp * aps
    a1 = (-sr * dph * dth + cr * ath + cr * dph * cp * dps
          - sr * sp * dth * dps + sr * cp * aps)
    a2 = (-cr * dph * dth - sr * ath - sr * dph * cp * dps
          - cr * sp * dth * dps + cr * cp * aps)
    Om = np.empty((3, 3))
    Om[0, 0] = 0.0
    Om[0, 1] = -w2
    Om[0, 2] = w1
    Om[1, 0] = w2
    Om[1, 1] = 0.0
    Om[1, 2] = -w0
    Om[2, 0] = -w1
    Om[2, 1] = w0
    Om[2, 2] = 0.0
    Psi = np.empty((3, 3))
    Psi[0, 0] = -(w1 * w1 + w2 * w2)
    Psi[1, 1] = -(w0 * w0 + w2 * w2)
    Psi[2, 2] = -(w0 * w0 + w1 * w1)
    Psi[0, 1] = w0 * w1 - a2
    Psi[1, 0] = w0 * w1 + a2
    Psi[0, 2] = w0 * w2 + a1
    Psi[2, 0] = w0 * w2 - a1
    Psi[1, 2] = w1 * w2 - a0
    Psi[2, 1] = w1 * w2 + a0
    return R, Om, Psi


# ---------------------------------------------------------------------------
# kinematics in the base frame


@jit
def crane_points(q, qd, prm):
    """Lumped-mass points of the crane in the base frame.

    Returns positions ``w`` (NPTS, 3), Jacobians ``W = dw/dq`` (NPTS, 3, 7),
    the rate-contracted Hessians ``M`` (NPTS, 3, 7) with ``M[i] @ qd`` the
    quadratic velocity term, and the point masses.

    Boom: uniform slender rod as masses m/6, 2m/3, m/6 at root, middle and
    tip (exact second moments; the root rides the base and is omitted).
    Payload: uniform cylinder as m/6 at each end plus four equatorial
    masses at radius sqrt(3)/2 r, which reproduces its inertia tensor.
    """
    Lb = prm[0]
    hb = prm[1]
    mb = prm[2]
    mp = prm[3]
    lp = prm[4]
    a_eq = 0.5 * np.sqrt(3.0) * prm[5]
    dt = q.dtype

    w = np.zeros((NPTS, 3), dtype=dt)
    W = np.zeros((NPTS, 3, NQ), dtype=dt)
    M = np.zeros((NPTS, 3, NQ), dtype=dt)
    mass = np.empty(NPTS)
    mass[0] = 2.0 * mb / 3.0
    mass[1] = mb / 6.0
    for i in range(2, NPTS):
        mass[i] = mp / 6.0

    L = q[2]
    bd, thd, Ld = qd[0], qd[1], qd[2]
    cb, sb = np.cos(q[0]), np.sin(q[0])
    ct, st = np.cos(q[1]), np.sin(q[1])
    # boom direction Rz(beta) Ry(-theta) e_x and derivatives
    b0, b1, b2 = cb * ct, sb * ct, st
    bb0, bb1 = -sb * ct, cb * ct
    bt0, bt1, bt2 = -cb * st, -sb * st, ct
    bbt0, bbt1 = sb * st, -cb * st
    # b_bb = (-b0, -b1, 0), b_tt = -b

    # tether direction Rx(phi_r) Ry(theta_r) (0, 0, -1)
    cf, sf = np.cos(q[3]), np.sin(q[3])
    cg, sg = np.cos(q[4]), np.sin(q[4])
    phd, trd = qd[3], qd[4]
    d = (-sg, sf * cg, -cf * cg)
    d_p = (sg * 0.0, cf * cg, sf * cg)
    d_t = (-cg, -sf * sg, cf * sg)
    d_pp = (sg * 0.0, -sf * cg, cf * cg)
    d_pt = (sg * 0.0, -cf * sg, -sf * sg)
    d_tt = (sg, -sf * cg, cf * cg)

    cpp, spp = np.cos(q[5]), np.sin(q[5])
    ctp, stp = np.cos(q[6]), np.sin(q[6])
    ppd, ptd = qd[5], qd[6]

    for i in range(NPTS):
        sL = 0.5 * Lb if i == 0 else Lb
        w[i, 0] = sL * b0
        w[i, 1] = sL * b1
        w[i, 2] = sL * b2 + hb
        W[i, 0, 0] = sL * bb0
        W[i, 1, 0] = sL * bb1
        W[i, 0, 1] = sL * bt0
        W[i, 1, 1] = sL * bt1
        W[i, 2, 1] = sL * bt2
        M[i, 0, 0] = sL * (-b0 * bd + bbt0 * thd)
        M[i, 1, 0] = sL * (-b1 * bd + bbt1 * thd)
        M[i, 0, 1] = sL * (bbt0 * bd - b0 * thd)
        M[i, 1, 1] = sL * (bbt1 * bd - b1 * thd)
        M[i, 2, 1] = sL * (-b2 * thd)
        if i >= 2:
            for k in range(3):
                w[i, k] += L * d[k]
                W[i, k, 2] = d[k]
                W[i, k, 3] = L * d_p[k]
                W[i, k, 4] = L * d_t[k]
                M[i, k, 2] = d_p[k] * phd + d_t[k] * trd
                M[i, k, 3] = d_p[k] * Ld + L * (d_pp[k] * phd + d_pt[k] * trd)
                M[i, k, 4] = d_t[k] * Ld + L * (d_pt[k] * phd + d_tt[k] * trd)
        if i >= 3:
            if i == 3:
                c0, c1, c2 = 0.0, 0.0, -lp
            elif i == 4:
                c0, c1, c2 = a_eq, 0.0, -0.5 * lp
            elif i == 5:
                c0, c1, c2 = -a_eq, 0.0, -0.5 * lp
            elif i == 6:
                c0, c1, c2 = 0.0, a_eq, -0.5 * lp
            else:
                c0, c1, c2 = 0.0, -a_eq, -0.5 * lp
            # u = Ry c, Ry' c = (u2, 0, -u0), Ry'' c = (-u0, 0, -u2)
            u0 = ctp * c0 + stp * c2
            u1 = ctp * 0.0 + c1
            u2 = -stp * c0 + ctp * c2
            # Rx v = (v0, c v1 - s v2, s v1 + c v2)
            # Rx' v = (0, -s v1 - c v2, c v1 - s v2)
            # Rx'' v = (0, -c v1 + s v2, -s v1 - c v2)
            w[i, 0] += u0
            w[i, 1] += cpp * u1 - spp * u2
            w[i, 2] += spp * u1 + cpp * u2
            # d/dphi_p
            gp0 = u0 * 0.0
            gp1 = -spp * u1 - cpp * u2
            gp2 = cpp * u1 - spp * u2
            # d/dtheta_p: Rx (u2, 0, -u0)
            gt0 = u2
            gt1 = spp * u0
            gt2 = -cpp * u0
            # second derivatives
            gpp1 = -cpp * u1 + spp * u2
            gpp2 = -spp * u1 - cpp * u2
            gpt1 = cpp * u0
            gpt2 = spp * u0
            gtt0 = -u0
            gtt1 = spp * u2
            gtt2 = -cpp * u2
            W[i, 0, 5] = gp0
            W[i, 1, 5] = gp1
            W[i, 2, 5] = gp2
            W[i, 0, 6] = gt0
            W[i, 1, 6] = gt1
            W[i, 2, 6] = gt2
            M[i, 0, 5] = gp0 * ppd
            M[i, 1, 5] = gpp1 * ppd + gpt1 * ptd
            M[i, 2, 5] = gpp2 * ppd + gpt2 * ptd
            M[i, 0, 6] = gtt0 * ptd
            M[i, 1, 6] = gpt1 * ppd + gtt1 * ptd
            M[i, 2, 6] = gpt2 * ppd + gtt2 * ptd
    return w, W, M, mass


# ---------------------------------------------------------------------------
# base motion and disturbance signals


@jit
def base_eval(t, prof):
    """Sinusoidal base motion sample at time ``t`` (see module layout)."""
    out = np.zeros(18)
    for j in range(3):
        # angles: prof[6:9] amplitudes, prof[9:12] frequencies
        amp = prof[6 + j]
        om = TWO_PI * prof[9 + j]
        sn = np.sin(om * t)
        cs = np.cos(om * t)
        out[j] = amp * sn
        out[3 + j] = amp * om * cs
        out[6 + j] = -amp * om * om * sn
        # translation: prof[0:3] amplitudes, prof[3:6] frequencies
        amp = prof[j]
        om = TWO_PI * prof[3 + j]
        sn = np.sin(om * t)
        cs = np.cos(om * t)
        out[9 + j] = amp * sn
        out[12 + j] = amp * om * cs
        out[15 + j] = -amp * om * om * sn
    return out


@jit
def disturbance(t, dtab):
    """Additive state disturbance: per-state sums of sinusoids."""
    out = np.zeros(NX)
    for j in range(dtab.shape[0]):
        acc = 0.0
        for k in range(dtab.shape[1]):
            acc += dtab[j, k, 0] * np.sin(TWO_PI * dtab[j, k, 1] * t + dtab[j, k, 2])
        out[j] = acc
    return out


# ---------------------------------------------------------------------------
# Lagrangian terms


@jit
def dynamics_terms(x, base, prm):
    """Inertia matrix D(q) and bias vector H(q, qd, base) of the torque model.

    The crane is a set of point masses, so ``D = sum m W^T W`` and
    ``H = sum m W^T (R^T a_bias + R^T g e_z)`` where ``a_bias`` is the point
    acceleration at zero generalized acceleration.  This is the
    Euler-Lagrange equation written in Kane's form.
    """
    q = x[:NQ]
    qd = x[NQ:]
    w, W, M, mass = crane_points(q, qd, prm)
    R, Om, Psi = base_frame_terms(base)
    a0 = np.zeros(3)
    for k in range(3):
        a0[k] = (R[0, k] * base[15] + R[1, k] * base[16]
                 + R[2, k] * (base[17] + prm[9]))

    D = np.zeros((NQ, NQ), dtype=x.dtype)
    H = np.zeros(NQ, dtype=x.dtype)
    acc = np.zeros(3, dtype=x.dtype)
    Wq = np.zeros(3, dtype=x.dtype)
    for i in range(NPTS):
        m = mass[i]
        for k in range(3):
            s1 = x[0] * 0.0
            s2 = x[0] * 0.0
            for j in range(NQ):
                s1 += W[i, k, j] * qd[j]
                s2 += M[i, k, j] * qd[j]
            Wq[k] = s1
            acc[k] = s2
        for k in range(3):
            acc[k] += (a0[k] + Psi[k, 0] * w[i, 0] + Psi[k, 1] * w[i, 1]
                       + Psi[k, 2] * w[i, 2]
                       + 2.0 * (Om[k, 0] * Wq[0] + Om[k, 1] * Wq[1] + Om[k, 2] * Wq[2]))
        for j in range(NQ):
            H[j] += m * (W[i, 0, j] * acc[0] + W[i, 1, j] * acc[1] + W[i, 2, j] * acc[2])
            for l in range(j, NQ):
                D[j, l] += m * (W[i, 0, j] * W[i, 0, l] + W[i, 1, j] * W[i, 1, l]
                                + W[i, 2, j] * W[i, 2, l])
    for j in range(NQ):
        for l in range(j + 1, NQ):
            D[l, j] = D[j, l]
    return D, H


@jit
def ldl_solve(A, b):
    """Solve ``A y = b`` for symmetric positive definite ``A`` (no pivoting).

    Written without conjugation so it stays analytic under complex steps.
    """
    n = A.shape[0]
    L = np.zeros((n, n), dtype=A.dtype)
    dg = np.zeros(n, dtype=A.dtype)
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k] * dg[k]
        dg[j] = s
        L[j, j] = 1.0
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k] * dg[k]
            L[i, j] = s / dg[j]
    y = np.zeros(n, dtype=A.dtype)
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s
    for i in range(n):
        y[i] /= dg[i]
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= L[k, i] * y[k]
        y[i] = s
    return y


@jit
def field_at(x, u, base, prm):
    """Velocity-actuated, control-affine vector field at a given base sample.

    Actuated accelerations follow the first-order actuator model; passive
    accelerations solve the lower block rows of the torque model,
    ``D22 qdd2 = -H2 - D21 qdd1``.  Boom points have no passive-coordinate
    Jacobian, so only the payload points enter those rows.
    """
    q = x[:NQ]
    qd = x[NQ:]
    w, W, M, mass = crane_points(q, qd, prm)
    R, Om, Psi = base_frame_terms(base)
    a0 = np.zeros(3)
    for k in range(3):
        a0[k] = (R[0, k] * base[15] + R[1, k] * base[16]
                 + R[2, k] * (base[17] + prm[9]))

    out = np.zeros(NX, dtype=x.dtype)
    qdd1 = np.zeros(NU, dtype=x.dtype)
    for j in range(NQ):
        out[j] = qd[j]
    for j in range(NU):
        qdd1[j] = (u[j] - qd[j]) / prm[6 + j]
        out[NQ + j] = qdd1[j]

    D22 = np.zeros((4, 4), dtype=x.dtype)
    rhs = np.zeros(4, dtype=x.dtype)
    acc = np.zeros(3, dtype=x.dtype)
    Wq = np.zeros(3, dtype=x.dtype)
    for i in range(2, NPTS):
        m = mass[i]
        for k in range(3):
            s1 = x[0] * 0.0
            s2 = x[0] * 0.0
            for j in range(NQ):
                s1 += W[i, k, j] * qd[j]
                s2 += M[i, k, j] * qd[j]
            Wq[k] = s1
            acc[k] = s2
        for k in range(3):
            # bias acceleration with the actuated part of W qdd folded in
            acc[k] += (a0[k] + Psi[k, 0] * w[i, 0] + Psi[k, 1] * w[i, 1]
                       + Psi[k, 2] * w[i, 2]
                       + 2.0 * (Om[k, 0] * Wq[0] + Om[k, 1] * Wq[1] + Om[k, 2] * Wq[2])
                       + W[i, k, 0] * qdd1[0] + W[i, k, 1] * qdd1[1]
                       + W[i, k, 2] * qdd1[2])
        for a in range(4):
            ja = 3 + a
            rhs[a] -= m * (W[i, 0, ja] * acc[0] + W[i, 1, ja] * acc[1]
                           + W[i, 2, ja] * acc[2])
            for c in range(a, 4):
                jc = 3 + c
                D22[a, c] += m * (W[i, 0, ja] * W[i, 0, jc] + W[i, 1, ja] * W[i, 1, jc]
                                  + W[i, 2, ja] * W[i, 2, jc])
    for a in range(4):
        for c in range(a + 1, 4):
            D22[c, a] = D22[a, c]
    qdd2 = ldl_solve(D22, rhs)
    for a in range(4):
        out[NQ + 3 + a] = qdd2[a]
    return out


@jit
def torque_free_field_at(x, base, prm):
    """Vector field of the torque-level model with zero actuator torques."""
    D, H = dynamics_terms(x, base, prm)
    qdd = ldl_solve(D, -H)
    out = np.zeros(NX, dtype=x.dtype)
    for j in range(NQ):
        out[j] = x[NQ + j]
        out[NQ + j] = qdd[j]
    return out


@jit
def vector_field(t, x, u, prof, prm, dtab):
    """Perturbed vector field ``f(t, x) + g(x) u + delta_e(t)``."""
    out = field_at(x, u, base_eval(t, prof), prm)
    if dtab.shape[1] > 0:
        dist = disturbance(t, dtab)
        for j in range(NX):
            out[j] += dist[j]
    return out


# ---------------------------------------------------------------------------
# sample-and-hold flow


@jit
def rk4_traj(t0, x0, u, T, nsub, prof, prm, dtab):
    """Fixed-step RK4 over one hold period; returns the (nsub + 1, 14) grid."""
    h = T / nsub
    traj = np.zeros((nsub + 1, NX), dtype=x0.dtype)
    traj[0] = x0
    x = x0.copy()
    for k in range(nsub):
        t = t0 + k * h
        k1 = vector_field(t, x, u, prof, prm, dtab)
        k2 = vector_field(t + 0.5 * h, x + 0.5 * h * k1, u, prof, prm, dtab)
        k3 = vector_field(t + 0.5 * h, x + 0.5 * h * k2, u, prof, prm, dtab)
        k4 = vector_field(t + h, x + h * k3, u, prof, prm, dtab)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        traj[k + 1] = x
    return traj


@jit
def rk4_torque_free(x0, base, dt, nsteps, prm):
    """RK4 of the torque-free model under a frozen base sample."""
    traj = np.zeros((nsteps + 1, NX))
    traj[0] = x0
    x = x0.copy()
    for k in range(nsteps):
        k1 = torque_free_field_at(x, base, prm)
        k2 = torque_free_field_at(x + 0.5 * dt * k1, base, prm)
        k3 = torque_free_field_at(x + 0.5 * dt * k2, base, prm)
        k4 = torque_free_field_at(x + dt * k3, base, prm)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        traj[k + 1] = x
    return traj


@jit
def shooting_sensitivities(t0, T, xs, us, nsub, prof, prm, step):
    """End states and complex-step Jacobians of the hold map for every node.

    Node ``k`` starts at ``t0 + k T`` from ``xs[k]`` with input ``us[k]``.
    Returns ``xn`` (N, 14), ``A`` (N, 14, 14) and ``B`` (N, 14, 3).
    """
    N = us.shape[0]
    xn = np.zeros((N, NX))
    A = np.zeros((N, NX, NX))
    B = np.zeros((N, NX, NU))
    nodist = np.zeros((NX, 0, 3))
    for k in range(N):
        tk = t0 + k * T
        xr = xs[k].copy()
        ur = us[k].copy()
        xn[k] = rk4_traj(tk, xr, ur, T, nsub, prof, prm, nodist)[nsub]
        uc = ur.astype(np.complex128)
        for j in range(NX):
            xc = xr.astype(np.complex128)
            xc[j] += 1j * step
            end = rk4_traj(tk, xc, uc, T, nsub, prof, prm, nodist)[nsub]
            for i in range(NX):
                A[k, i, j] = end[i].imag / step
        xc = xr.astype(np.complex128)
        for j in range(NU):
            uc = ur.astype(np.complex128)
            uc[j] += 1j * step
            end = rk4_traj(tk, xc, uc, T, nsub, prof, prm, nodist)[nsub]
            for i in range(NX):
                B[k, i, j] = end[i].imag / step
    return xn, A, B


# ---------------------------------------------------------------------------
# outputs


@jit
def payload_output(x, base, prm):
    """Payload-bottom position and velocity with their state Jacobians.

    Returns ``p`` (3), ``v`` (3), ``Jp`` (3, 7) = dp/dq and ``Jvq`` (3, 7)
    = dv/dq; dv/dqd equals ``Jp``.
    """
    q = x[:NQ]
    qd = x[NQ:]
    w, W, M, mass = crane_points(q, qd, prm)
    R, Om, Psi = base_frame_terms(base)
    wb = w[BOTTOM]
    Wb = W[BOTTOM]
    # body-frame velocity and its q-Jacobian: Om w + W qd, Om W + M
    vb = np.zeros(3, dtype=x.dtype)
    Gb = np.zeros((3, NQ), dtype=x.dtype)
    for k in range(3):
        acc = Om[k, 0] * wb[0] + Om[k, 1] * wb[1] + Om[k, 2] * wb[2]
        for j in range(NQ):
            acc += Wb[k, j] * qd[j]
            Gb[k, j] = (Om[k, 0] * Wb[0, j] + Om[k, 1] * Wb[1, j]
                        + Om[k, 2] * Wb[2, j] + M[BOTTOM, k, j])
        vb[k] = acc
    p = np.zeros(3, dtype=x.dtype)
    v = np.zeros(3, dtype=x.dtype)
    Jp = np.zeros((3, NQ), dtype=x.dtype)
    Jvq = np.zeros((3, NQ), dtype=x.dtype)
    for k in range(3):
        p[k] = base[9 + k] + R[k, 0] * wb[0] + R[k, 1] * wb[1] + R[k, 2] * wb[2]
        v[k] = base[12 + k] + R[k, 0] * vb[0] + R[k, 1] * vb[1] + R[k, 2] * vb[2]
        for j in range(NQ):
            Jp[k, j] = R[k, 0] * Wb[0, j] + R[k, 1] * Wb[1, j] + R[k, 2] * Wb[2, j]
            Jvq[k, j] = R[k, 0] * Gb[0, j] + R[k, 1] * Gb[1, j] + R[k, 2] * Gb[2, j]
    return p, v, Jp, Jvq


@jit
def energies(x, base, prm):
    """Kinetic and potential energy, inertial datum z = 0."""
    q = x[:NQ]
    qd = x[NQ:]
    w, W, M, mass = crane_points(q, qd, prm)
    R, Om, Psi = base_frame_terms(base)
    g = prm[9]
    # the boom root rides the base and carries a sixth of the boom mass
    pts = np.zeros((NPTS + 1, 3))
    vel = np.zeros((NPTS + 1, 3))
    ms = np.zeros(NPTS + 1)
    pts[NPTS, 2] = prm[1]
    ms[NPTS] = prm[2] / 6.0
    for i in range(NPTS):
        ms[i] = mass[i]
        for k in range(3):
            pts[i, k] = w[i, k]
            acc = 0.0
            for j in range(NQ):
                acc += W[i, k, j] * qd[j]
            vel[i, k] = acc
    kin = 0.0
    pot = 0.0
    for i in range(NPTS + 1):
        vb = Om @ pts[i] + vel[i]
        v = base[12:15] + R @ vb
        z = base[11] + R[2, 0] * pts[i, 0] + R[2, 1] * pts[i, 1] + R[2, 2] * pts[i, 2]
        kin += 0.5 * ms[i] * (v @ v)
        pot += ms[i] * g * z
    return kin, pot


# ---------------------------------------------------------------------------
# target safety function


@jit
def sigmoid(z):
    if z > SIGMOID_CLAMP:
        z = SIGMOID_CLAMP
    elif z < -SIGMOID_CLAMP:
        z = -SIGMOID_CLAMP
    return 1.0 / (1.0 + np.exp(-z))


@jit
def target_position(base, tprm, offset):
    R, Om, Psi = base_frame_terms(base)
    out = np.zeros(3)
    for k in range(3):
        out[k] = (base[9 + k] + R[k, 0] * tprm[5] + R[k, 1] * tprm[6]
                  + R[k, 2] * tprm[7] + offset[k])
    return out


@jit
def target_h(p, pt, tprm):
    """Target safety value and its gradient with respect to the payload point."""
    g0, g1, c0, r1, r2 = tprm[0], tprm[1], tprm[2], tprm[3], tprm[4]
    dx = p[0] - pt[0]
    dy = p[1] - pt[1]
    rho2 = dx * dx + dy * dy
    s1 = sigmoid(g1 * (rho2 - r1 * r1))
    s2 = sigmoid(g1 * (rho2 - r2 * r2))
    surface = g0 * s1 - (g0 - c0) * s2
    dsurf = g0 * g1 * s1 * (1.0 - s1) - (g0 - c0) * g1 * s2 * (1.0 - s2)
    grad = np.array([-dsurf * 2.0 * dx, -dsurf * 2.0 * dy, 1.0])
    return p[2] - pt[2] - surface, grad


@jit
def target_h_state(x, base, prm, tprm, offset):
    p, v, Jp, Jvq = payload_output(x, base, prm)
    return target_h(p, target_position(base, tprm, offset), tprm)[0]


@jit
def delta_gap_table(t0, xc, samples, offsets, u, T, nsub, stride, prof, prm, tprm):
    """Gap table ``h(t0+T, F_T(xc)) - h(t0+tau, F_tau(sample_i))``.

    The tau grid is every ``stride``-th RK4 substep after 0, ending at T.
    Row ``i`` uses target offset ``offsets[i]``.
    """
    nodist = np.zeros((NX, 0, 3))
    ntau = nsub // stride
    zero = np.zeros(3)
    end = rk4_traj(t0, xc, u, T, nsub, prof, prm, nodist)[nsub]
    ref = target_h_state(end, base_eval(t0 + T, prof), prm, tprm, zero)
    bases = np.zeros((ntau, 18))
    for j in range(ntau):
        bases[j] = base_eval(t0 + (j + 1) * stride * (T / nsub), prof)
    out = np.zeros((samples.shape[0], ntau))
    for i in range(samples.shape[0]):
        traj = rk4_traj(t0, samples[i], u, T, nsub, prof, prm, nodist)
        for j in range(ntau):
            out[i, j] = ref - target_h_state(traj[(j + 1) * stride], bases[j], prm, tprm,
                                             offsets[i])
    return out


@jit
def node_outputs(xs, bases, prm, tprm):
    """Payload outputs and target safety terms at every shooting node.

    Returns ``p``, ``v`` (n, 3), ``Jp``, ``Jvq`` (n, 3, 7), ``h`` (n) and
    ``dh/dq`` (n, 7).
    """
    n = xs.shape[0]
    P = np.zeros((n, 3))
    V = np.zeros((n, 3))
    JP = np.zeros((n, 3, NQ))
    JV = np.zeros((n, 3, NQ))
    hv = np.zeros(n)
    hg = np.zeros((n, NQ))
    zero = np.zeros(3)
    for k in range(n):
        p, v, Jp, Jvq = payload_output(xs[k], bases[k], prm)
        hk, dh = target_h(p, target_position(bases[k], tprm, zero), tprm)
        P[k] = p
        V[k] = v
        JP[k] = Jp
        JV[k] = Jvq
        hv[k] = hk
        for j in range(NQ):
            hg[k, j] = dh[0] * Jp[0, j] + dh[1] * Jp[1, j] + dh[2] * Jp[2, j]
    return P, V, JP, JV, hv, hg


@jit
def base_eval_many(times, prof):
    out = np.zeros((times.shape[0], 18))
    for k in range(times.shape[0]):
        out[k] = base_eval(times[k], prof)
    return out
