"""Dense primal-dual interior-point solver for convex QPs with L1-soft rows.

Problem form::

    minimize    0.5 z'Hz + g'z + rho' sigma
    subject to  A z = b
                G z <= h
                Gs z - sigma <= hs,   sigma >= 0
                lb <= z <= ub

The soft-row slacks ``sigma`` are eliminated from every Newton system, so
the factorized matrix is always ``n x n`` (plus equality rows).  Bounds
are handled as diagonal terms.  Mehrotra predictor-corrector steps are
used throughout.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

SOLVED = "solved"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"


def _mat(a, ncols):
    if a is None:
        return np.zeros((0, ncols))
    a = np.asarray(a, dtype=float)
    return a.reshape(-1, ncols)


def _vec(a, n=None):
    if a is None:
        return np.zeros(0 if n is None else n)
    return np.asarray(a, dtype=float).reshape(-1)


@dataclass
class QPProblem:
    H: np.ndarray
    g: np.ndarray
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    G: np.ndarray | None = None
    h: np.ndarray | None = None
    Gs: np.ndarray | None = None
    hs: np.ndarray | None = None
    rho: np.ndarray | float = 1e4
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        n = self.H.shape[0]
        if self.H.shape != (n, n):
            raise ValueError("H must be square")
        self.g = _vec(self.g)
        if self.g.shape != (n,):
            raise ValueError("g has the wrong length")
        self.A, self.b = _mat(self.A, n), _vec(self.b)
        self.G, self.h = _mat(self.G, n), _vec(self.h)
        self.Gs, self.hs = _mat(self.Gs, n), _vec(self.hs)
        for M, v, name in ((self.A, self.b, "A/b"), (self.G, self.h, "G/h"),
                           (self.Gs, self.hs, "Gs/hs")):
            if M.shape[0] != v.shape[0]:
                raise ValueError(f"{name} row counts differ")
        self.rho = np.broadcast_to(np.asarray(self.rho, dtype=float), (self.ms,)).copy()
        if np.any(self.rho < 0):
            raise ValueError("soft-row weights must be nonnegative")
        self.lb = np.full(n, -np.inf) if self.lb is None else _vec(self.lb).copy()
        self.ub = np.full(n, np.inf) if self.ub is None else _vec(self.ub).copy()
        if self.lb.shape != (n,) or self.ub.shape != (n,) or np.any(self.lb > self.ub):
            raise ValueError("bounds need shape (n,) and lb <= ub")
        if not np.allclose(self.H, self.H.T, atol=1e-10 * (1 + np.abs(self.H).max())):
            raise ValueError("H must be symmetric")

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def ms(self) -> int:
        return self.Gs.shape[0]

    def objective(self, z, sigma=None) -> float:
        val = 0.5 * z @ self.H @ z + self.g @ z
        if sigma is not None and self.ms:
            val += self.rho @ sigma
        return float(val)


@dataclass
class QPSolution:
    z: np.ndarray
    sigma: np.ndarray
    y: np.ndarray
    lam_hard: np.ndarray
    lam_soft: np.ndarray
    lam_lower: np.ndarray
    lam_upper: np.ndarray
    status: str
    iterations: int
    kkt: dict = field(default_factory=dict)
    objective: float = 0.0

    @property
    def kkt_residual(self) -> float:
        return max(self.kkt.values()) if self.kkt else np.inf


@dataclass
class _Layout:
    """Index bookkeeping for the stacked inequality vector."""

    mh: int
    ms: int
    il: np.ndarray
    iu: np.ndarray

    def __post_init__(self):
        self.cuts = np.cumsum([0, self.mh, self.ms, self.ms, len(self.il), len(self.iu)])

    def split(self, w):
        c = self.cuts
        return w[c[0]:c[1]], w[c[1]:c[2]], w[c[2]:c[3]], w[c[3]:c[4]], w[c[4]:c[5]]

    @property
    def m(self) -> int:
        return int(self.cuts[-1])


def _apply_C(qp, lay, dz, dsig):
    return np.concatenate([qp.G @ dz, qp.Gs @ dz - dsig, -dsig, -dz[lay.il], dz[lay.iu]])


def _apply_Ct(qp, lay, w):
    wh, ws, wsig, wl, wu = lay.split(w)
    tz = qp.G.T @ wh + qp.Gs.T @ ws
    np.subtract.at(tz, lay.il, wl)
    np.add.at(tz, lay.iu, wu)
    return tz, -ws - wsig


def kkt_residuals(qp: QPProblem, z, sigma, y, lam_h, lam_s, lam_l, lam_u) -> dict:
    """Scaled infinity-norm KKT residuals of a primal-dual point.

    Each residual is divided by one plus the largest term it is built from,
    so the values are comparable across problem scalings.  Bound
    multipliers are full ``n``-vectors.
    """
    lam_sig = qp.rho - lam_s
    terms = [qp.H @ z, qp.g, qp.A.T @ y, qp.G.T @ lam_h, qp.Gs.T @ lam_s, -lam_l, lam_u]
    stat_z = sum(terms)
    slack_h = qp.h - qp.G @ z
    slack_s = qp.hs - qp.Gs @ z + sigma
    fin_l = np.isfinite(qp.lb)
    fin_u = np.isfinite(qp.ub)
    slack_l = z[fin_l] - qp.lb[fin_l]
    slack_u = qp.ub[fin_u] - z[fin_u]
    primal = [np.abs(qp.A @ z - qp.b), np.maximum(-slack_h, 0), np.maximum(-slack_s, 0),
              np.maximum(-sigma, 0), np.maximum(-slack_l, 0), np.maximum(-slack_u, 0)]
    dual = [np.maximum(-v, 0) for v in (lam_h, lam_s, lam_sig, lam_l, lam_u)]
    dual += [np.abs(lam_l[~fin_l]), np.abs(lam_u[~fin_u])]
    comp = [lam_h * slack_h, lam_s * slack_s, lam_sig * sigma, lam_l[fin_l] * slack_l,
            lam_u[fin_u] * slack_u]

    def top(parts):
        return float(max((np.abs(p).max() for p in parts if p.size), default=0.0))

    stat_scale = 1.0 + top(terms)
    primal_scale = 1.0 + top([qp.A @ z, qp.b, qp.G @ z, qp.h, qp.Gs @ z, qp.hs,
                              z[fin_l | fin_u]])
    dual_scale = 1.0 + top([lam_h, lam_s, lam_sig, lam_l, lam_u])
    return {"stationarity": top([stat_z]) / stat_scale, "primal": top(primal) / primal_scale,
            "dual": top(dual) / dual_scale, "complementarity": top(comp) / dual_scale}


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def solve_qp(qp: QPProblem, tol: float = 1e-8, max_iter: int = 100,
             warm: QPSolution | None = None, polish: bool = True) -> QPSolution:
    """Solve ``qp`` to KKT residuals below ``tol`` (see module docstring).

    With ``polish`` the converged point is refined by one exact solve on
    its identified active set, kept only when that lowers the residual.
    """
    n, mh, ms = qp.n, qp.G.shape[0], qp.ms
    il = np.flatnonzero(np.isfinite(qp.lb))
    iu = np.flatnonzero(np.isfinite(qp.ub))
    lay = _Layout(mh, ms, il, iu)
    d = np.concatenate([qp.h, qp.hs, np.zeros(ms), -qp.lb[il], qp.ub[iu]])
    me = qp.A.shape[0]

    # starting point: the warm primal (projected into the bounds) or the box midpoint
    if warm is not None and warm.z.shape == (n,):
        z = warm.z.copy()
    else:
        z = np.zeros(n)
    lo = np.where(np.isfinite(qp.lb), qp.lb, -np.inf)
    hi = np.where(np.isfinite(qp.ub), qp.ub, np.inf)
    with np.errstate(invalid="ignore"):
        mid = np.where(np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi), z)
    inside = (z > lo) & (z < hi)
    z = np.where(inside, z, mid)
    z = np.where(np.isfinite(lo) & ~np.isfinite(hi) & ~inside, lo + 1.0, z)
    z = np.where(np.isfinite(hi) & ~np.isfinite(lo) & ~inside, hi - 1.0, z)
    sigma = np.maximum(qp.Gs @ z - qp.hs, 0.0) + 1.0 if ms else np.zeros(0)
    s = np.maximum(d - _apply_C(qp, lay, z, sigma), 1.0)
    lam = np.ones(lay.m)
    # start dual feasible in sigma: lam_soft + lam_sigma = rho
    _, lam_s0, lam_sig0, _, _ = lay.split(lam)
    lam_s0[:] = np.maximum(0.5 * qp.rho, 1e-2)
    lam_sig0[:] = np.maximum(0.5 * qp.rho, 1e-2)
    if warm is not None and warm.z.shape == (n,) and lay.m:
        # warm duals, pushed off the boundary
        lw = np.concatenate([warm.lam_hard, warm.lam_soft, qp.rho - warm.lam_soft,
                             warm.lam_lower[il], warm.lam_upper[iu]])
        if lw.shape == lam.shape:
            lam = np.maximum(lw, 1e-2)
        s = np.maximum(d - _apply_C(qp, lay, z, sigma), 1e-2)
    y = np.zeros(me)
    if ms:
        sigma = np.maximum(sigma, 1e-2)
        s_sig = lay.split(s)[2]
        s_sig[:] = sigma

    if lay.m and warm is None:
        # equalize the complementarity products so the iterates start near the central path
        mu0 = float((s * lam).max())
        sh, ss, ssig, sl, su = lay.split(s)
        lh, ls, lsig, ll, lu = lay.split(lam)
        lh[:] = mu0 / sh
        ll[:] = mu0 / sl
        lu[:] = mu0 / su
        ss[:] = mu0 / ls
        ssig[:] = mu0 / lsig
        sigma = ssig.copy()

    H = qp.H
    status = MAX_ITER
    it = 0
    scale = 1.0 + max(np.abs(qp.g).max(initial=0.0), np.abs(H).max(initial=0.0))
    for it in range(1, max_iter + 1):
        tz, tsig = _apply_Ct(qp, lay, lam)
        rd_z = H @ z + qp.g + qp.A.T @ y + tz
        rd_s = qp.rho + tsig
        ri = _apply_C(qp, lay, z, sigma) + s - d
        re = qp.A @ z - qp.b
        mu = float(s @ lam) / lay.m if lay.m else 0.0

        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(lam))):
            status = INFEASIBLE
            break
        res = max(np.abs(rd_z).max(initial=0), np.abs(rd_s).max(initial=0),
                  np.abs(ri).max(initial=0), np.abs(re).max(initial=0), mu)
        near = res < tol * (1.0 + max(scale, np.abs(lam).max(initial=0.0)))
        if near and max(_current_kkt(qp, lay, z, sigma, y, lam).values()) < tol:
            status = SOLVED
            break
        if np.abs(lam).max(initial=0.0) > 1e12 * scale:
            # diverging multipliers certify (numerically) an empty feasible set
            status = INFEASIBLE
            break

        W = lam / s
        wh, ws, wsig, wl, wu = lay.split(W)
        K = H.copy()
        if mh:
            K += qp.G.T @ (wh[:, None] * qp.G)
        if ms:
            weff = ws * wsig / (ws + wsig)
            K += qp.Gs.T @ (weff[:, None] * qp.Gs)
        K[il, il] += wl
        K[iu, iu] += wu
        K[np.diag_indices(n)] += 1e-13 * scale

        if me:
            KKT = np.block([[K, qp.A.T], [qp.A, -1e-13 * np.eye(me)]])
            fac = ("lu", linalg.lu_factor(KKT, check_finite=False))
        else:
            try:
                fac = ("chol", linalg.cho_factor(K, check_finite=False))
            except linalg.LinAlgError:
                fac = ("lu", linalg.lu_factor(K, check_finite=False))

        def reduced(rz, rs, rin, rq, rc):
            v = (lam * rin - rc) / s
            cz, csig = _apply_Ct(qp, lay, v)
            rhs_z = -rz - cz
            rhs_s = -rs - csig
            if ms:
                rhs_z = rhs_z + qp.Gs.T @ (ws * rhs_s / (ws + wsig))
            rhs = np.concatenate([rhs_z, -rq]) if me else rhs_z
            if fac[0] == "chol":
                sol = linalg.cho_solve(fac[1], rhs, check_finite=False)
            else:
                sol = linalg.lu_solve(fac[1], rhs, check_finite=False)
            dz, dy = sol[:n], sol[n:]
            dsig = (rhs_s + ws * (qp.Gs @ dz)) / (ws + wsig) if ms else np.zeros(0)
            ds = -rin - _apply_C(qp, lay, dz, dsig)
            dlam = (-rc - lam * ds) / s
            return dz, dsig, dy, ds, dlam

        def newton(rc):
            # rc: complementarity residual s*lam - target
            step = reduced(rd_z, rd_s, ri, re, rc)
            # Near the solution the condensed matrix is badly conditioned, so one
            # refinement pass against the unreduced equations recovers the lost digits.
            dz, dsig, dy, ds, dlam = step
            tz_, tsig_ = _apply_Ct(qp, lay, dlam)
            ez = H @ dz + qp.A.T @ dy + tz_ + rd_z
            es = tsig_ + rd_s
            eq = qp.A @ dz + re
            zero = np.zeros(lay.m)
            corr = reduced(ez, es, zero, eq, zero)
            return tuple(a + b for a, b in zip(step, corr))

        # predictor
        dz, dsig, dy, ds, dlam = newton(s * lam)
        a_aff = min(_max_step(s, ds), _max_step(lam, dlam))
        mu_aff = float((s + a_aff * ds) @ (lam + a_aff * dlam)) / lay.m if lay.m else 0.0
        cent = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        # corrector
        dz, dsig, dy, ds, dlam = newton(s * lam + ds * dlam - cent * mu)
        alpha = min(1.0, 0.995 * min(_max_step(s, ds), _max_step(lam, dlam)))
        if not lay.m:
            alpha = 1.0
        z = z + alpha * dz
        sigma = sigma + alpha * dsig
        y = y + alpha * dy
        s = s + alpha * ds
        lam = lam + alpha * dlam

    if polish and status == SOLVED and lay.m:
        z, sigma, y, lam = _polish(qp, lay, d, z, sigma, y, lam, s)
    parts = _unpack(lay, n, sigma, lam)
    sol = QPSolution(z=z, sigma=parts[0], y=y, lam_hard=parts[1], lam_soft=parts[2],
                     lam_lower=parts[3], lam_upper=parts[4], status=status, iterations=it)
    sol.kkt = kkt_residuals(qp, z, sol.sigma, y, *parts[1:])
    sol.objective = qp.objective(z, sol.sigma)
    return sol


def _unpack(lay, n, sigma, lam):
    lh, lsft, _, ll, lu = lay.split(lam)
    lam_l = np.zeros(n)
    lam_u = np.zeros(n)
    lam_l[lay.il] = ll
    lam_u[lay.iu] = lu
    return np.maximum(sigma, 0.0), lh.copy(), lsft.copy(), lam_l, lam_u


def _current_kkt(qp, lay, z, sigma, y, lam):
    parts = _unpack(lay, qp.n, sigma, lam)
    return kkt_residuals(qp, z, parts[0], y, *parts[1:])


def _dense_C(qp, lay):
    """The stacked inequality matrix over ``(z, sigma)``."""
    n, ms = qp.n, qp.ms
    C = np.zeros((lay.m, n + ms))
    c = lay.cuts
    C[c[0]:c[1], :n] = qp.G
    C[c[1]:c[2], :n] = qp.Gs
    C[c[1]:c[2], n:] = -np.eye(ms)
    C[c[2]:c[3], n:] = -np.eye(ms)
    C[c[3] + np.arange(len(lay.il)), lay.il] = -1.0
    C[c[4] + np.arange(len(lay.iu)), lay.iu] = 1.0
    return C


def _polish(qp, lay, d, z, sigma, y, lam, s):
    """Exact KKT solve on the active set guessed from ``lam > s``."""
    n, ms, me = qp.n, qp.ms, qp.A.shape[0]
    act = np.flatnonzero(lam > s)
    C = _dense_C(qp, lay)[act]
    nw, k = n + ms, len(act)
    Hw = np.zeros((nw, nw))
    Hw[:n, :n] = qp.H
    gw = np.concatenate([qp.g, qp.rho])
    Aw = np.hstack([qp.A, np.zeros((me, ms))])
    E = np.vstack([Aw, C])
    K = np.block([[Hw, E.T], [E, np.zeros((me + k, me + k))]])
    rhs = np.concatenate([-gw, qp.b, d[act]])
    try:
        # a near-singular system is fine here; the residual check below decides
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", linalg.LinAlgWarning)
            sol = linalg.solve(K, rhs, check_finite=False)
    except (linalg.LinAlgError, ValueError):
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    if not np.all(np.isfinite(sol)):
        return z, sigma, y, lam
    zp, sigp = sol[:n], sol[n:nw]
    yp = sol[nw:nw + me]
    lamp = np.zeros(lay.m)
    lamp[act] = sol[nw + me:]
    before = max(_current_kkt(qp, lay, z, sigma, y, lam).values())
    after = max(_current_kkt(qp, lay, zp, sigp, yp, lamp).values())
    if after <= before:
        return zp, sigp, yp, lamp
    return z, sigma, y, lam
