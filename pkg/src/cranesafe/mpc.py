"""Multiple-shooting MPC with a robust barrier row, solved by SQP real-time iteration.

The stage cost is a weighted least-squares residual (input effort, input
deviation from the measured joint rates, payload position and velocity
tracking, tether and payload swing rates), so the QP Hessian is the
Gauss-Newton ``2 J'WJ``.  Shooting sensitivities come from complex-step
differentiation of the RK4 hold map and are exact to rounding.

Constraints per node ``k``:

* inputs within ``U`` (hard, every interval),
* finite state bounds and the six box functions at nodes ``1..N`` (soft, L1),
* ``h_t(x_{k+1}) - h_t(x_k) - delta >= -alpha(h_t(x_k))`` for ``k = 0..N-1``
  (soft, L1).

The shooting QP is condensed onto the input increments before solving.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import kernels
from .barrier import BarrierConfig, DeltaResult, adapt_delta
from .dynamics import NQ, NU, NX, CraneParameters, _x
from .errors import IntegrationError, SolverError
from .integrator import CraneModel, FlowConfig
from .qp import SOLVED, QPProblem, QPSolution, solve_qp
from .safety import SafetyBox, TargetSafetyParams

COMPLEX_STEP = 1e-20
STAGE_DIM = 16
TERMINAL_DIM = 10
PAYLOAD_RATES = (12, 13)
TETHER_RATES = (10, 11)


def _diag(w, n, name):
    w = np.broadcast_to(np.asarray(w, dtype=float), (n,)).copy()
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError(f"{name} must be finite and nonnegative")
    return tuple(float(v) for v in w)


@dataclass(frozen=True)
class OCPConfig:
    """Horizon, weights (diagonals) and solver settings."""

    horizon: float = 1.0
    nodes: int = 30
    w_input: tuple = (0.1, 0.1, 0.1)
    w_input_dev: tuple = (0.05, 0.05, 0.05)
    w_pos: tuple = (50.0, 50.0, 50.0)
    w_vel: tuple = (5.0, 5.0, 5.0)
    w_payload_rate: tuple = (1.0, 1.0)
    w_tether_rate: tuple = (1.0, 1.0)
    slack_weight: float = 1e4
    sqp_iters: int = 1
    substeps: int = 1
    qp_tol: float = 1e-8
    qp_max_iter: int = 100

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if int(self.nodes) != self.nodes or self.nodes < 2:
            raise ValueError("nodes must be an integer >= 2")
        for name, n in (("w_input", 3), ("w_input_dev", 3), ("w_pos", 3), ("w_vel", 3),
                        ("w_payload_rate", 2), ("w_tether_rate", 2)):
            object.__setattr__(self, name, _diag(getattr(self, name), n, name))
        if not self.slack_weight > 0:
            raise ValueError("slack_weight must be positive")
        if int(self.sqp_iters) != self.sqp_iters or self.sqp_iters < 1:
            raise ValueError("sqp_iters must be a positive integer")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValueError("substeps must be a positive integer")
        if not (self.qp_tol > 0 and self.qp_max_iter >= 1):
            raise ValueError("invalid QP tolerances")

    @property
    def sample_period(self) -> float:
        return self.horizon / self.nodes

    def flow(self) -> FlowConfig:
        return FlowConfig(self.sample_period, self.substeps)

    def stage_sqrt_weights(self) -> np.ndarray:
        return np.sqrt(np.concatenate([self.w_input, self.w_input_dev, self.w_pos,
                                       self.w_vel, self.w_payload_rate,
                                       self.w_tether_rate]))

    def terminal_sqrt_weights(self) -> np.ndarray:
        return np.sqrt(np.concatenate([self.w_pos, self.w_vel, self.w_payload_rate,
                                       self.w_tether_rate]))


@dataclass(frozen=True)
class ReferenceTrajectory:
    pos: Callable[[float], np.ndarray]
    vel: Callable[[float], np.ndarray]

    @classmethod
    def constant(cls, p) -> ReferenceTrajectory:
        p = np.asarray(p, dtype=float).copy()
        return cls(lambda t: p, lambda t: np.zeros(3))


@dataclass(frozen=True)
class MeasuredInput:
    u_m: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        u = np.asarray(self.u_m, dtype=float)
        if u.shape != (NU,) or not np.all(np.isfinite(u)):
            raise ValueError("measured input must be a finite 3-vector")
        object.__setattr__(self, "u_m", tuple(float(v) for v in u))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.u_m)


@dataclass
class OCPSolution:
    states: np.ndarray
    inputs: np.ndarray
    slacks: np.ndarray
    kkt_residual: float
    cost: float
    qp_iterations: int = 0
    status: str = SOLVED
    step_norm: float = 0.0
    qp: QPSolution | None = None

    def shifted(self, model: CraneModel, t_end: float, flow: FlowConfig) -> OCPSolution:
        """Shift-by-one warm start; the last input is repeated."""
        from .integrator import step

        xs = np.vstack([self.states[1:], step(t_end, self.states[-1], self.inputs[-1], flow,
                                              model)])
        us = np.vstack([self.inputs[1:], self.inputs[-1:]])
        return replace(self, states=xs, inputs=us, qp=None)


# ---------------------------------------------------------------------------
# costs


def _outputs(x, base, prm):
    return kernels.payload_output(np.asarray(x, dtype=float), base, prm)


def _stage_residual(x, u, u_m, rp, rv, base, prm, sw):
    p, v, Jp, Jvq = _outputs(x, base, prm)
    r = np.concatenate([u, u - u_m, p - rp, v - rv, x[list(PAYLOAD_RATES)],
                        x[list(TETHER_RATES)]])
    Jx = np.zeros((STAGE_DIM, NX))
    Ju = np.zeros((STAGE_DIM, NU))
    Ju[0:3] = np.eye(3)
    Ju[3:6] = np.eye(3)
    Jx[6:9, :NQ] = Jp
    Jx[9:12, :NQ] = Jvq
    Jx[9:12, NQ:] = Jp
    Jx[12, PAYLOAD_RATES[0]] = Jx[13, PAYLOAD_RATES[1]] = 1.0
    Jx[14, TETHER_RATES[0]] = Jx[15, TETHER_RATES[1]] = 1.0
    return sw * r, sw[:, None] * Jx, sw[:, None] * Ju


def _terminal_residual(x, rp, rv, base, prm, sw):
    p, v, Jp, Jvq = _outputs(x, base, prm)
    r = np.concatenate([p - rp, v - rv, x[list(PAYLOAD_RATES)], x[list(TETHER_RATES)]])
    Jx = np.zeros((TERMINAL_DIM, NX))
    Jx[0:3, :NQ] = Jp
    Jx[3:6, :NQ] = Jvq
    Jx[3:6, NQ:] = Jp
    Jx[6, PAYLOAD_RATES[0]] = Jx[7, PAYLOAD_RATES[1]] = 1.0
    Jx[8, TETHER_RATES[0]] = Jx[9, TETHER_RATES[1]] = 1.0
    return sw * r, sw[:, None] * Jx


def _base_at(t, model):
    return kernels.base_eval(float(t), model.prof)


def stage_cost(t, x, u, u_m, ref: ReferenceTrajectory, cfg: OCPConfig,
               model: CraneModel = CraneModel()) -> float:
    """Weighted squared norms of input, input deviation, tracking and swing rates."""
    r, _, _ = _stage_residual(_x(x), np.asarray(u, float), np.asarray(u_m, float),
                              ref.pos(t), ref.vel(t), _base_at(t, model), model.prm,
                              cfg.stage_sqrt_weights())
    return float(r @ r)


def terminal_cost(t, x, ref: ReferenceTrajectory, cfg: OCPConfig,
                  model: CraneModel = CraneModel()) -> float:
    """Tracking, velocity tracking and both swing-rate terms at the horizon end."""
    r, _ = _terminal_residual(_x(x), ref.pos(t), ref.vel(t), _base_at(t, model), model.prm,
                              cfg.terminal_sqrt_weights())
    return float(r @ r)


# ---------------------------------------------------------------------------
# structured QP


@dataclass
class StructuredQP:
    """Shooting QP in increments ``(dx_0..dx_N, du_0..du_{N-1})``.

    Dynamics ``dx_{k+1} = A_k dx_k + B_k du_k + c_k`` with ``dx_0 = dx0``.
    Cost ``sum 0.5 [dx;du]' [[Q, S'], [S, R]] [dx;du] + q'dx + r'du`` plus
    the terminal ``0.5 dx_N' Q_N dx_N + q_N' dx_N``.  Soft rows
    ``Cx dx + Cu du <= e`` (stacked over all nodes) carry L1 weight ``rho``.
    ``du`` is boxed by ``lb``/``ub``.
    """

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    dx0: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray
    q: np.ndarray
    r: np.ndarray
    Cx: np.ndarray
    Cu: np.ndarray
    e: np.ndarray
    rho: float | np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        N, nx, nu = self.B.shape
        shapes = {"A": (N, nx, nx), "c": (N, nx), "dx0": (nx,), "Q": (N + 1, nx, nx),
                  "S": (N, nu, nx), "R": (N, nu, nu), "q": (N + 1, nx), "r": (N, nu),
                  "lb": (N * nu,), "ub": (N * nu,)}
        for name, shp in shapes.items():
            if np.shape(getattr(self, name)) != shp:
                raise ValueError(f"{name} has shape {np.shape(getattr(self, name))}, "
                                 f"expected {shp}")
        m = len(self.e)
        if self.Cx.shape != (m, (N + 1) * nx) or self.Cu.shape != (m, N * nu):
            raise ValueError("constraint row blocks have inconsistent dimensions")

    @property
    def dims(self):
        return self.B.shape

    def condense(self):
        """Eliminate the states; returns ``(QPProblem, Phi, Gamma)``."""
        N, nx, nu = self.B.shape
        nz = N * nu
        Phi = np.zeros((N + 1, nx))
        Gam = np.zeros((N + 1, nx, nz))
        Phi[0] = self.dx0
        for k in range(N):
            Phi[k + 1] = self.A[k] @ Phi[k] + self.c[k]
            Gam[k + 1][:, :k * nu] = self.A[k] @ Gam[k][:, :k * nu]
            Gam[k + 1][:, k * nu:(k + 1) * nu] += self.B[k]
        H = np.zeros((nz, nz))
        g = np.zeros(nz)
        for k in range(N + 1):
            c = k * nu  # Gamma_k only depends on the inputs before node k
            Gk = Gam[k][:, :c]
            H[:c, :c] += Gk.T @ (self.Q[k] @ Gk)
            g[:c] += Gk.T @ (self.Q[k] @ Phi[k] + self.q[k])
            if k < N:
                sl = slice(c, c + nu)
                SG = self.S[k] @ Gk
                H[sl, :c] += SG
                H[:c, sl] += SG.T
                H[sl, sl] += self.R[k]
                g[sl] += self.S[k] @ Phi[k] + self.r[k]
        H = 0.5 * (H + H.T)
        # rows usually touch one or two nodes, so multiply block by block
        G = self.Cu.copy()
        e = self.e - self.Cx @ Phi.reshape(-1)
        for k in range(1, N + 1):
            blk = self.Cx[:, k * nx:(k + 1) * nx]
            rows = np.flatnonzero(np.any(blk != 0.0, axis=1))
            if rows.size:
                G[rows, :k * nu] += blk[rows] @ Gam[k][:, :k * nu]
        qp = QPProblem(H, g, Gs=G, hs=e, rho=self.rho, lb=self.lb, ub=self.ub)
        return qp, Phi, Gam

    def expanded(self) -> QPProblem:
        """The same QP over all increments with explicit dynamics equalities."""
        N, nx, nu = self.B.shape
        nX = (N + 1) * nx
        n = nX + N * nu
        H = np.zeros((n, n))
        g = np.zeros(n)
        for k in range(N + 1):
            xs = slice(k * nx, (k + 1) * nx)
            H[xs, xs] = self.Q[k]
            g[xs] = self.q[k]
            if k < N:
                us = slice(nX + k * nu, nX + (k + 1) * nu)
                H[us, xs] = self.S[k]
                H[xs, us] = self.S[k].T
                H[us, us] = self.R[k]
                g[us] = self.r[k]
        A = np.zeros(((N + 1) * nx, n))
        b = np.zeros((N + 1) * nx)
        A[:nx, :nx] = np.eye(nx)
        b[:nx] = self.dx0
        for k in range(N):
            rows = slice((k + 1) * nx, (k + 2) * nx)
            A[rows, k * nx:(k + 1) * nx] = self.A[k]
            A[rows, nX + k * nu:nX + (k + 1) * nu] = self.B[k]
            A[rows, (k + 1) * nx:(k + 2) * nx] = -np.eye(nx)
            b[rows] = -self.c[k]
        G = np.hstack([self.Cx, self.Cu])
        lb = np.concatenate([np.full(nX, -np.inf), self.lb])
        ub = np.concatenate([np.full(nX, np.inf), self.ub])
        return QPProblem(H, g, A=A, b=b, Gs=G, hs=self.e, rho=self.rho, lb=lb, ub=ub)


def solve_structured(sqp: StructuredQP, tol=1e-8, max_iter=100, warm=None):
    """Condense, solve and expand; returns ``(dx, du, QPSolution)``."""
    qp, Phi, Gam = sqp.condense()
    sol = solve_qp(qp, tol=tol, max_iter=max_iter, warm=warm)
    N, nx, nu = sqp.dims
    dx = Phi + Gam @ sol.z
    return dx, sol.z.reshape(N, nu), sol


# ---------------------------------------------------------------------------
# transcription


@dataclass
class NodeData:
    """Everything the SQP iteration needs, evaluated on the node time grid."""

    t0: float
    x0: np.ndarray
    times: np.ndarray
    bases: np.ndarray
    ref_pos: np.ndarray
    ref_vel: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray
    delta: float
    alpha_gain: float
    u_m: np.ndarray
    cfg: OCPConfig
    model: CraneModel
    target: TargetSafetyParams

    @property
    def n_soft(self) -> int:
        return self.cfg.nodes * (6 + 2 * len(_bounded_states(self.model.params))) + self.cfg.nodes


def _bounded_states(params: CraneParameters):
    sb = params.state_bounds
    return [j for j in range(NX) if np.isfinite(sb[j, 0]) or np.isfinite(sb[j, 1])]


def transcribe(t0, x0, ref: ReferenceTrajectory, delta: DeltaResult | float, box: SafetyBox,
               cfg: OCPConfig, model: CraneModel = CraneModel(),
               target: TargetSafetyParams = TargetSafetyParams(), alpha_gain: float = 0.5,
               u_m=None) -> NodeData:
    """Evaluate the time-varying problem data on the ``N + 1`` node times."""
    x0 = _x(x0)
    if x0.shape != (NX,) or not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be a finite 14-vector")
    if not 0 < alpha_gain <= 1:
        raise ValueError("alpha_gain must lie in (0, 1]")
    T = cfg.sample_period
    N = cfg.nodes
    times = t0 + T * np.arange(N + 1)
    bases = kernels.base_eval_many(times, model.prof)
    rp = np.array([np.asarray(ref.pos(t), float) for t in times])
    rv = np.array([np.asarray(ref.vel(t), float) for t in times])
    if rp.shape != (N + 1, 3) or rv.shape != (N + 1, 3):
        raise ValueError("reference must return 3-vectors")
    lo, hi = zip(*(box.bounds(t) for t in times))
    d = delta.delta if isinstance(delta, DeltaResult) else float(delta)
    um = np.zeros(NU) if u_m is None else np.asarray(u_m, float)
    return NodeData(float(t0), x0.copy(), times, bases, rp, rv, np.array(lo), np.array(hi),
                    float(d), float(alpha_gain), um, cfg, model, target)


def _node_terms(nd: NodeData, xs):
    return kernels.node_outputs(np.ascontiguousarray(xs, dtype=float), nd.bases, nd.model.prm,
                                nd.target.as_array())


def _residuals(nd: NodeData, xs, us, terms):
    """Stacked least-squares residuals and their Jacobians.

    Returns input residuals ``ru`` (N, 6) with constant Jacobian, and state
    residuals ``rx`` (N+1, 10) with Jacobians ``Jx`` (N+1, 10, 14); rows are
    already scaled by the square-root weights (terminal weights at node N).
    """
    cfg = nd.cfg
    N = cfg.nodes
    P, V, JP, JV, _, _ = terms
    sw = cfg.stage_sqrt_weights()
    wx = np.tile(sw[6:], (N + 1, 1))
    wx[N] = cfg.terminal_sqrt_weights()
    ru = np.hstack([us, us - nd.u_m]) * sw[:6]
    rx = np.hstack([P - nd.ref_pos, V - nd.ref_vel, xs[:, PAYLOAD_RATES], xs[:, TETHER_RATES]])
    Jx = np.zeros((N + 1, 10, NX))
    Jx[:, 0:3, :NQ] = JP
    Jx[:, 3:6, :NQ] = JV
    Jx[:, 3:6, NQ:] = JP
    Jx[:, 6, PAYLOAD_RATES[0]] = Jx[:, 7, PAYLOAD_RATES[1]] = 1.0
    Jx[:, 8, TETHER_RATES[0]] = Jx[:, 9, TETHER_RATES[1]] = 1.0
    return ru, rx * wx, Jx * wx[:, :, None], sw[:6]


def constraint_values(nd: NodeData, xs, us, terms=None):
    """Nonlinear soft-row values (``<= 0`` means satisfied) and their group labels."""
    N = nd.cfg.nodes
    P, _, _, _, hv, _ = _node_terms(nd, xs) if terms is None else terms
    sb = nd.model.params.state_bounds
    bounded = _bounded_states(nd.model.params)
    vals, groups = [], []
    for k in range(1, N + 1):
        vals.extend(nd.box_lo[k] - P[k])
        vals.extend(P[k] - nd.box_hi[k])
        groups.extend(["box"] * 6)
        for j in bounded:
            vals.extend([sb[j, 0] - xs[k, j], xs[k, j] - sb[j, 1]])
            groups.extend(["state"] * 2)
    a = 1.0 - nd.alpha_gain
    vals.extend(-(hv[1:] - a * hv[:-1] - nd.delta))
    groups.extend(["barrier"] * N)
    return np.array(vals, dtype=float), groups


def objective(nd: NodeData, xs, us) -> float:
    """Nonlinear tracking objective (slack penalty excluded)."""
    xs = np.asarray(xs, dtype=float)
    ru, rx, _, _ = _residuals(nd, xs, np.asarray(us, dtype=float), _node_terms(nd, xs))
    return float(np.sum(ru * ru) + np.sum(rx * rx))


def shooting_jacobians(nd: NodeData, xs, us):
    """End states and exact ``A_k = dF/dx``, ``B_k = dF/du`` for every interval."""
    cfg = nd.cfg
    try:
        xn, A, B = kernels.shooting_sensitivities(nd.t0, cfg.sample_period,
                                                  np.ascontiguousarray(xs, dtype=float),
                                                  np.ascontiguousarray(us, dtype=float),
                                                  int(cfg.substeps), nd.model.prof,
                                                  nd.model.prm, COMPLEX_STEP)
    except ZeroDivisionError as exc:
        # compiled complex arithmetic raises instead of returning inf on blow-up
        raise IntegrationError("shooting diverged") from exc
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B)) and np.all(np.isfinite(xn))):
        raise IntegrationError("non-finite shooting Jacobians")
    return xn, A, B


def linearize(nd: NodeData, xs, us) -> StructuredQP:
    """Gauss-Newton QP around the guess ``(xs, us)``."""
    xs = np.asarray(xs, dtype=float)
    us = np.asarray(us, dtype=float)
    cfg = nd.cfg
    N = cfg.nodes
    if xs.shape != (N + 1, NX) or us.shape != (N, NU):
        raise ValueError("guess has inconsistent dimensions")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(us))):
        raise ValueError("guess must be finite")
    xn, A, B = shooting_jacobians(nd, xs, us)
    terms = _node_terms(nd, xs)
    ru, rx, Jx, swu = _residuals(nd, xs, us, terms)
    # input residual u -> (u, u - u_m): Jacobian sw * [I; I]
    wu = swu[:3] ** 2 + swu[3:] ** 2
    R = np.zeros((N, NU, NU))
    R[:, np.arange(NU), np.arange(NU)] = 2.0 * wu
    r = 2.0 * (ru[:, :3] * swu[:3] + ru[:, 3:] * swu[3:])
    Q = 2.0 * np.einsum("kri,krj->kij", Jx, Jx)
    q = 2.0 * np.einsum("kri,kr->ki", Jx, rx)

    P, _, JP, _, hv, hg = terms
    bounded = _bounded_states(nd.model.params)
    sb = nd.model.params.state_bounds
    per = 6 + 2 * len(bounded)
    m = N * per + N
    Cx = np.zeros((m, (N + 1) * NX))
    e = np.zeros(m)
    for k in range(1, N + 1):
        row = (k - 1) * per
        cols = slice(k * NX, k * NX + NQ)
        Cx[row:row + 3, cols] = -JP[k]
        e[row:row + 3] = P[k] - nd.box_lo[k]
        Cx[row + 3:row + 6, cols] = JP[k]
        e[row + 3:row + 6] = nd.box_hi[k] - P[k]
        row += 6
        for j in bounded:
            Cx[row, k * NX + j] = -1.0
            e[row] = xs[k, j] - sb[j, 0]
            Cx[row + 1, k * NX + j] = 1.0
            e[row + 1] = sb[j, 1] - xs[k, j]
            row += 2
    a = 1.0 - nd.alpha_gain
    base_row = N * per
    for k in range(N):
        Cx[base_row + k, (k + 1) * NX:(k + 1) * NX + NQ] = -hg[k + 1]
        Cx[base_row + k, k * NX:k * NX + NQ] = a * hg[k]
    e[base_row:] = hv[1:] - a * hv[:-1] - nd.delta
    # one-sided state bounds produce infinite right-hand sides; keep them inactive
    e = np.minimum(e, 1e6)

    ubnd = nd.model.params.u_bounds
    lb = (ubnd[:, 0][None, :] - us).reshape(-1)
    ub = (ubnd[:, 1][None, :] - us).reshape(-1)
    return StructuredQP(A=A, B=B, c=xn - xs[1:], dx0=nd.x0 - xs[0], Q=Q,
                        S=np.zeros((N, NU, NX)), R=R, q=q, r=r, Cx=Cx,
                        Cu=np.zeros((m, N * NU)), e=e, rho=cfg.slack_weight,
                        lb=np.minimum(lb, 0.0), ub=np.maximum(ub, 0.0))


def hover_guess(nd: NodeData):
    """Cold start: every node at ``x0`` with zero input."""
    N = nd.cfg.nodes
    return np.tile(nd.x0, (N + 1, 1)), np.zeros((N, NU))


def sqp_rti_step(nd: NodeData, warm: OCPSolution | None = None) -> OCPSolution:
    """``cfg.sqp_iters`` Gauss-Newton iterations from the warm start (or hover)."""
    cfg = nd.cfg
    if warm is None or warm.states.shape != (cfg.nodes + 1, NX):
        xs, us = hover_guess(nd)
        qp_warm = None
    else:
        xs, us = warm.states.copy(), warm.inputs.copy()
        qp_warm = warm.qp
    ubnd = nd.model.params.u_bounds
    us = np.clip(us, ubnd[:, 0], ubnd[:, 1])
    total_iters = 0
    sol = None
    step_norm = 0.0
    for _ in range(cfg.sqp_iters):
        sqp = linearize(nd, xs, us)
        dx, du, sol = solve_structured(sqp, tol=cfg.qp_tol, max_iter=cfg.qp_max_iter,
                                       warm=qp_warm)
        total_iters += sol.iterations
        if sol.status == SOLVED and not (np.all(np.isfinite(dx)) and np.all(np.isfinite(du))):
            sol.status = "diverged"
        if sol.status != SOLVED:
            fallback = warm if warm is not None else OCPSolution(
                xs, us, np.zeros(0), np.inf, objective(nd, xs, us))
            out = replace(fallback, status=sol.status, qp_iterations=total_iters,
                          kkt_residual=sol.kkt_residual, qp=None)
            return out
        xs = xs + dx
        us = np.clip(us + du, ubnd[:, 0], ubnd[:, 1])
        step_norm = float(max(np.abs(dx).max(), np.abs(du).max()))
        qp_warm = sol
    return OCPSolution(states=xs, inputs=us, slacks=sol.sigma.copy(),
                       kkt_residual=sol.kkt_residual, cost=objective(nd, xs, us),
                       qp_iterations=total_iters, status=sol.status, step_norm=step_norm,
                       qp=sol)


# ---------------------------------------------------------------------------
# controller


@dataclass
class ControlReport:
    delta: DeltaResult
    solution: OCPSolution
    error: str | None = None


@dataclass
class Controller:
    """Single-owner closed-loop controller holding the warm start."""

    ocp: OCPConfig = field(default_factory=OCPConfig)
    barrier: BarrierConfig = field(default_factory=BarrierConfig)
    model: CraneModel = field(default_factory=CraneModel)
    target: TargetSafetyParams = field(default_factory=TargetSafetyParams)
    box: SafetyBox = field(default_factory=SafetyBox.unbounded)
    robust: bool = True
    barrier_flow: FlowConfig | None = None
    warm: OCPSolution | None = None
    last_u: np.ndarray = field(default_factory=lambda: np.zeros(NU))

    def step(self, t_k, x_meas, u_m, ref: ReferenceTrajectory):
        u, sol, dres = control_step(t_k, x_meas, u_m, ref, self.ocp, self.barrier, self.warm,
                                    model=self.model, target=self.target, box=self.box,
                                    robust=self.robust, u_prev=self.last_u,
                                    barrier_flow=self.barrier_flow)
        try:
            self.warm = sol.shifted(self.model, t_k + self.ocp.horizon, self.ocp.flow())
        except IntegrationError:
            # a diverged plan is useless as a guess; restart from hover next time
            self.warm = None
        self.last_u = u
        return u, sol, dres


def control_step(t_k, x_meas, u_m, ref: ReferenceTrajectory, ocp_cfg: OCPConfig,
                 barrier_cfg: BarrierConfig, warm: OCPSolution | None, *,
                 model: CraneModel = CraneModel(),
                 target: TargetSafetyParams = TargetSafetyParams(),
                 box: SafetyBox | None = None, robust: bool = True, u_prev=None,
                 barrier_flow: FlowConfig | None = None):
    """One controller evaluation; returns ``(u, OCPSolution, DeltaResult)``.

    Nominal mode (``robust=False``) forces ``delta = 0`` and unit class-K gain,
    which turns the barrier rows into plain ``h_t >= 0`` node constraints.
    """
    x_meas = _x(x_meas)
    if not np.all(np.isfinite(x_meas)):
        raise ValueError("measured state must be finite")
    um = u_m.as_array() if isinstance(u_m, MeasuredInput) else np.asarray(u_m, float)
    ubnd = model.params.u_bounds
    if u_prev is None:
        u_prev = warm.inputs[0] if warm is not None else np.zeros(NU)
    box = SafetyBox.unbounded() if box is None else box
    flow_b = barrier_flow or FlowConfig(ocp_cfg.sample_period)
    try:
        if robust:
            dres = adapt_delta(t_k, x_meas, u_prev, barrier_cfg, flow_b, model, target)
            gain = barrier_cfg.alpha_gain
        else:
            dres = DeltaResult(0.0, 0, ocp_cfg.sample_period)
            gain = 1.0
        nd = transcribe(t_k, x_meas, ref, dres, box, ocp_cfg, model, target, gain, um)
        sol = sqp_rti_step(nd, warm)
    except (IntegrationError, SolverError, np.linalg.LinAlgError, FloatingPointError,
            ZeroDivisionError) as exc:
        N = ocp_cfg.nodes
        hold = OCPSolution(np.tile(x_meas, (N + 1, 1)), np.zeros((N, NU)), np.zeros(0),
                           np.inf, np.inf, status=f"error: {exc}")
        return np.zeros(NU), hold, DeltaResult(0.0, 0, 0.0)
    u = np.clip(sol.inputs[0], ubnd[:, 0], ubnd[:, 1])
    return u, sol, dres
