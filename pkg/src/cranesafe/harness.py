"""Scenarios, closed-loop simulation, metrics and file export.

A scenario is one JSON file whose top-level keys mirror
:class:`ScenarioConfig`.  Every nested object uses the field names of the
matching dataclass; unbounded state limits are written as ``null``.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import kernels
from .barrier import BarrierConfig, DeltaResult, default_ball_radii
from .dynamics import (NU, NX, BaseMotionProfile, CraneParameters, UncertaintyRealization,
                       base_motion)
from .errors import IntegrationError, ScenarioError, SolverError
from .integrator import CraneModel, FlowConfig, trajectory
from .mpc import Controller, OCPConfig, ReferenceTrajectory
from .qp import SOLVED
from .safety import BoxSpec, ObstacleSet, TargetSafetyParams, box_safety, moving_box

MODES = ("nominal", "robust")

CSV_HEADER = (["t", "beta", "theta", "L_t", "phi_r", "theta_r", "phi_p", "theta_p",
               "beta_dot", "theta_dot", "L_t_dot", "phi_r_dot", "theta_r_dot", "phi_p_dot",
               "theta_p_dot", "u1", "u2", "u3", "um1", "um2", "um3", "ppx", "ppy", "ppz",
               "rpx", "rpy", "rpz", "h_t", "h1", "h2", "h3", "h4", "h5", "h6", "delta_t",
               "kkt", "qp_iters", "solve_ms"])


@dataclass(frozen=True)
class ReferenceSpec:
    """Insertion reference relative to the moving target mouth (heights in m)."""

    hover_height: float = 0.5
    hover_time: float = 3.0
    descent_time: float = 5.0
    final_height: float = -0.05
    lateral_offset: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.hover_time < 0 or self.descent_time < 0:
            raise ValueError("reference times must be nonnegative")

    def height(self, t):
        if t <= self.hover_time:
            return self.hover_height, 0.0
        if t >= self.hover_time + self.descent_time or self.descent_time == 0:
            return self.final_height, 0.0
        rate = (self.final_height - self.hover_height) / self.descent_time
        return self.hover_height + rate * (t - self.hover_time), rate

    def build(self, target: TargetSafetyParams, profile: BaseMotionProfile):
        tp = target.as_array()
        off = np.array([self.lateral_offset[0], self.lateral_offset[1], 0.0])
        zero = np.zeros(3)

        def pos(t):
            base = kernels.base_eval(float(t), profile.as_array())
            z, _ = self.height(t)
            return kernels.target_position(base, tp, zero) + off + np.array([0.0, 0.0, z])

        def vel(t):
            base = kernels.base_eval(float(t), profile.as_array())
            R, Om, _ = kernels.base_frame_terms(base)
            _, dz = self.height(t)
            return base[12:15] + R @ (Om @ tp[5:8]) + np.array([0.0, 0.0, dz])

        return ReferenceTrajectory(pos, vel)


@dataclass(frozen=True)
class UncertaintySpec:
    """Truth-plant disturbance and estimator noise.

    The disturbance bound is ``disturbance_scale * noise_bounds`` (per state,
    in state units per second).  Noise is uniform within ``noise_bounds``.
    """

    enabled: bool = True
    noise_bounds: tuple = tuple(default_ball_radii())
    disturbance_scale: float = 1.0
    harmonics: int = 3
    freq_range: tuple = (0.2, 2.0)

    def __post_init__(self):
        nb = np.asarray(self.noise_bounds, dtype=float)
        if nb.shape != (NX,) or np.any(nb < 0):
            raise ValueError("noise_bounds must be a nonnegative 14-vector")
        object.__setattr__(self, "noise_bounds", tuple(float(v) for v in nb))
        if self.disturbance_scale < 0 or self.harmonics < 1:
            raise ValueError("invalid disturbance settings")
        lo, hi = self.freq_range
        if not 0 < lo <= hi:
            raise ValueError("freq_range must satisfy 0 < lo <= hi")

    @property
    def disturbance_bound(self) -> np.ndarray:
        if not self.enabled:
            return np.zeros(NX)
        return self.disturbance_scale * np.asarray(self.noise_bounds)

    @property
    def noise(self) -> np.ndarray:
        return np.asarray(self.noise_bounds) if self.enabled else np.zeros(NX)


@dataclass(frozen=True)
class ScenarioConfig:
    crane: CraneParameters = field(default_factory=CraneParameters)
    base_profile: BaseMotionProfile = field(default_factory=BaseMotionProfile)
    target: TargetSafetyParams = field(default_factory=TargetSafetyParams)
    obstacles: ObstacleSet = field(default_factory=lambda: ObstacleSet(
        (((2.5, -0.3, 0.0), (2.8, 0.3, 1.2)),)))
    box: BoxSpec = field(default_factory=BoxSpec)
    reference: ReferenceSpec = field(default_factory=ReferenceSpec)
    uncertainty: UncertaintySpec = field(default_factory=UncertaintySpec)
    ocp: OCPConfig = field(default_factory=OCPConfig)
    barrier: BarrierConfig = field(default_factory=BarrierConfig)
    duration: float = 20.0
    seed: int = 0
    mode: str = "robust"
    truth_substeps: int = 10
    record_timing: bool = False
    max_solver_failures: int = 15
    initial_offset: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.duration > 0:
            raise ScenarioError("duration must be positive")
        if self.mode not in MODES:
            raise ScenarioError(f"mode must be one of {MODES}")
        if self.truth_substeps < 1:
            raise ScenarioError("truth_substeps must be positive")

    @property
    def sample_period(self) -> float:
        return self.ocp.sample_period

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.sample_period))

    def model(self) -> CraneModel:
        return CraneModel(self.crane, self.base_profile)


# ---------------------------------------------------------------------------
# JSON


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def config_to_dict(cfg: ScenarioConfig) -> dict:
    out = {}
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        out[f.name] = _plain(asdict(val)) if hasattr(val, "__dataclass_fields__") else val
    return out


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ScenarioError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ScenarioError(f"{where}: unknown field(s) {sorted(unknown)}")
    kwargs = dict(data)
    if cls is CraneParameters and "state_bounds" in kwargs:
        sb = np.array([[(-np.inf if lo is None else lo), (np.inf if hi is None else hi)]
                       for lo, hi in kwargs["state_bounds"]], dtype=float)
        kwargs["state_bounds"] = sb
    if cls is ObstacleSet and "blocks" in kwargs:
        kwargs["blocks"] = tuple((tuple(lo), tuple(hi)) for lo, hi in kwargs["blocks"])
    for k, v in list(kwargs.items()):
        if isinstance(v, list) and k not in ("state_bounds", "blocks"):
            kwargs[k] = tuple(tuple(x) if isinstance(x, list) else x for x in v)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: {exc}") from exc


_SECTIONS = {"crane": CraneParameters, "base_profile": BaseMotionProfile,
             "target": TargetSafetyParams, "obstacles": ObstacleSet, "box": BoxSpec,
             "reference": ReferenceSpec, "uncertainty": UncertaintySpec, "ocp": OCPConfig,
             "barrier": BarrierConfig}


def config_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise ScenarioError(f"unknown top-level field(s) {sorted(unknown)}")
    kwargs = {}
    for key, val in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], val, key)
        else:
            kwargs[key] = tuple(val) if isinstance(val, list) else val
    try:
        cfg = ScenarioConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc)) from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: ScenarioConfig) -> None:
    """Cross-section consistency checks; raises :class:`ScenarioError`."""
    T = cfg.sample_period
    try:
        cfg.barrier.stride(FlowConfig(T))
    except ValueError as exc:
        raise ScenarioError(f"barrier: {exc}") from exc
    if abs(cfg.duration / T - cfg.steps) > 1e-9 * cfg.steps:
        raise ScenarioError("duration must be a whole number of sample periods")
    try:
        moving_box(cfg.base_profile, cfg.obstacles, cfg.box).bounds(0.0)
    except ValueError as exc:
        raise ScenarioError(f"box: {exc}") from exc


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")


# ---------------------------------------------------------------------------
# simulation


def hover_state(cfg: ScenarioConfig) -> np.ndarray:
    """Rest state with the payload bottom at the initial reference plus ``initial_offset``."""
    p0 = cfg.reference.build(cfg.target, cfg.base_profile).pos(0.0)
    p0 = p0 + np.asarray(cfg.initial_offset, dtype=float)
    base = kernels.base_eval(0.0, cfg.base_profile.as_array())
    prm = cfg.crane.as_array()
    rel = p0 - base[9:12]
    Lb, hb, lp = prm[0], prm[1], prm[4]
    horiz = math.hypot(rel[0], rel[1])
    if horiz > Lb:
        raise ScenarioError("initial reference is out of the boom's reach")
    theta = math.acos(horiz / Lb)
    beta = math.atan2(rel[1], rel[0])
    tether = hb + Lb * math.sin(theta) - lp - rel[2]
    if tether <= 0:
        raise ScenarioError("initial reference is above the boom tip")
    x = np.zeros(NX)
    x[:3] = beta, theta, tether
    return x


@dataclass
class SimulationLog:
    t: np.ndarray
    x: np.ndarray
    x_meas: np.ndarray
    u: np.ndarray
    u_m: np.ndarray
    p_p: np.ndarray
    r_p: np.ndarray
    h_t: np.ndarray
    h_box: np.ndarray
    delta: np.ndarray
    kkt: np.ndarray
    qp_iters: np.ndarray
    solve_ms: np.ndarray
    mode: str = "robust"
    failures: int = 0

    def __len__(self):
        return len(self.t)

    def rows(self) -> np.ndarray:
        return np.column_stack([self.t, self.x, self.u, self.u_m, self.p_p, self.r_p,
                                self.h_t, self.h_box, self.delta, self.kkt, self.qp_iters,
                                self.solve_ms])

    @classmethod
    def from_rows(cls, rows: np.ndarray, mode="robust") -> SimulationLog:
        c = np.cumsum([0, 1, NX, NU, NU, 3, 3, 1, 6, 1, 1, 1, 1])
        col = [rows[:, c[i]:c[i + 1]] for i in range(len(c) - 1)]
        flat = [a[:, 0] if a.shape[1] == 1 else a for a in col]
        return cls(t=flat[0], x=flat[1], x_meas=np.full_like(flat[1], np.nan), u=flat[2],
                   u_m=flat[3], p_p=flat[4], r_p=flat[5], h_t=flat[6], h_box=flat[7],
                   delta=flat[8], kkt=flat[9], qp_iters=flat[10], solve_ms=flat[11],
                   mode=mode)


def run_scenario(cfg: ScenarioConfig, observer=None) -> SimulationLog:
    """Closed loop at the sample period; deterministic given ``cfg.seed``.

    ``observer(k, t, x, x_meas, u, solution, delta_result, realization)`` is called
    after each control decision, before the plant advances.
    """
    validate_config(cfg)
    T = cfg.sample_period
    model = cfg.model()
    truth = FlowConfig(T, cfg.truth_substeps)
    dist_seq, noise_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    unc = cfg.uncertainty
    bound = unc.disturbance_bound
    if np.any(bound > 0):
        realization = UncertaintyRealization.random_sinusoids(
            bound, np.random.default_rng(dist_seq), unc.harmonics, *unc.freq_range)
    else:
        realization = UncertaintyRealization.zero()
    noise_rng = np.random.default_rng(noise_seq)
    noise = unc.noise
    ref = cfg.reference.build(cfg.target, cfg.base_profile)
    box = moving_box(cfg.base_profile, cfg.obstacles, cfg.box)
    ctl = Controller(ocp=cfg.ocp, barrier=cfg.barrier, model=model, target=cfg.target,
                     box=box, robust=(cfg.mode == "robust"))
    tp = cfg.target.as_array()
    prm = model.prm
    zero = np.zeros(3)

    K = cfg.steps
    rec = {k: [] for k in ("t", "x", "x_meas", "u", "u_m", "p_p", "r_p", "h_t", "h_box",
                           "delta", "kkt", "qp_iters", "solve_ms")}
    x = hover_state(cfg)
    failures = consecutive = 0
    for k in range(K):
        t = k * T
        x_meas = x + noise_rng.uniform(-1.0, 1.0, NX) * noise
        u_m = x[7:10].copy()
        tic = time.perf_counter()
        u, sol, dres = ctl.step(t, x_meas, u_m, ref)
        ms = (time.perf_counter() - tic) * 1e3 if cfg.record_timing else 0.0
        if sol.status != SOLVED:
            failures += 1
            consecutive += 1
            if consecutive > cfg.max_solver_failures:
                raise SolverError(f"{consecutive} consecutive solver failures at t={t:.3f}: "
                                  f"{sol.status}")
        else:
            consecutive = 0
        if observer is not None:
            observer(k, t, x.copy(), x_meas, u.copy(), sol, dres, realization)
        base = kernels.base_eval(t, model.prof)
        p = kernels.payload_output(x, base, prm)[0]
        rec["t"].append(t)
        rec["x"].append(x.copy())
        rec["x_meas"].append(x_meas)
        rec["u"].append(u.copy())
        rec["u_m"].append(u_m)
        rec["p_p"].append(p)
        rec["r_p"].append(np.asarray(ref.pos(t), float))
        rec["h_t"].append(kernels.target_h_state(x, base, prm, tp, zero))
        rec["h_box"].append(box_safety(t, x, box, base, model.params))
        rec["delta"].append(dres.delta)
        rec["kkt"].append(sol.kkt_residual if np.isfinite(sol.kkt_residual) else -1.0)
        rec["qp_iters"].append(float(sol.qp_iterations))
        rec["solve_ms"].append(ms)
        x = trajectory(t, x, u, truth, model, realization)[-1]
        if not np.all(np.isfinite(x)):
            raise IntegrationError(f"non-finite truth state at t={t + T:.3f}")
    arr = {k: np.array(v, dtype=float) for k, v in rec.items()}
    return SimulationLog(**arr, mode=cfg.mode, failures=failures)


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class Thresholds:
    pos: float = 0.02
    vel: float = 0.05
    tether_rate: float = 0.05
    payload_rate: float = 0.05


@dataclass(frozen=True)
class Metrics:
    min_h_t: float
    min_box: float
    violation_duration: float
    tracking_rms: float
    final_pos_error: float
    final_vel_error: float
    max_tether_rate_sq: float
    max_payload_rate_sq: float
    settle_time: float
    insertion_success: bool
    mean_delta: float
    solver_failures: int

    def as_dict(self) -> dict:
        return asdict(self)


def compute_metrics(log: SimulationLog, thr: Thresholds = Thresholds(),
                    window: float = 1.0) -> Metrics:
    """Metrics from the log alone.  Final errors and rates use the last ``window`` s."""
    if len(log) == 0:
        raise ValueError("empty log")
    T = float(log.t[1] - log.t[0]) if len(log) > 1 else 0.0
    err = np.linalg.norm(log.p_p - log.r_p, axis=1)
    tether_sq = log.x[:, 10] ** 2 + log.x[:, 11] ** 2
    payload_sq = log.x[:, 12] ** 2 + log.x[:, 13] ** 2
    # payload velocity from the position log (central differences)
    vel = np.gradient(log.p_p, log.t, axis=0) if len(log) > 2 else np.zeros_like(log.p_p)
    rvel = np.gradient(log.r_p, log.t, axis=0) if len(log) > 2 else np.zeros_like(log.r_p)
    verr = np.linalg.norm(vel - rvel, axis=1)
    tail = log.t >= log.t[-1] - window
    ok = (err <= thr.pos) & (tether_sq <= thr.tether_rate) & (payload_sq <= thr.payload_rate)
    settle = math.inf
    bad = np.flatnonzero(~ok)
    if ok[-1]:
        settle = float(log.t[bad[-1] + 1]) if bad.size else float(log.t[0])
    min_h = float(log.h_t.min())
    return Metrics(min_h_t=min_h, min_box=float(log.h_box.min()),
                   violation_duration=float(np.count_nonzero(log.h_t < 0) * T),
                   tracking_rms=float(np.sqrt(np.mean(err ** 2))),
                   final_pos_error=float(err[tail].max()),
                   final_vel_error=float(verr[tail].max()),
                   max_tether_rate_sq=float(tether_sq[tail].max()),
                   max_payload_rate_sq=float(payload_sq[tail].max()),
                   settle_time=settle,
                   insertion_success=bool(err[-1] <= thr.pos and min_h >= 0),
                   mean_delta=float(log.delta.mean()), solver_failures=int(log.failures))


@dataclass
class ComparisonReport:
    nominal: Metrics
    robust: Metrics
    logs: dict

    @property
    def separated(self) -> bool:
        return self.nominal.min_h_t < 0 <= self.robust.min_h_t

    def text(self) -> str:
        lines = [f"{'metric':<22}{'nominal':>16}{'robust':>16}"]
        for name in self.nominal.as_dict():
            a, b = getattr(self.nominal, name), getattr(self.robust, name)
            lines.append(f"{name:<22}{_fmt(a):>16}{_fmt(b):>16}")
        verdict = "PASS" if self.separated else "FAIL"
        lines.append("")
        lines.append(f"verdict: {verdict} (nominal min h_t < 0 and robust min h_t >= 0)")
        return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, int):
        return str(v)
    return f"{v:.6g}"


def compare_nominal_robust(cfg: ScenarioConfig) -> ComparisonReport:
    """Both modes with the same seed; robust-minus-nominal side by side."""
    logs = {mode: run_scenario(replace(cfg, mode=mode)) for mode in MODES}
    return ComparisonReport(compute_metrics(logs["nominal"]), compute_metrics(logs["robust"]),
                            logs)


# ---------------------------------------------------------------------------
# export


def export_csv(log: SimulationLog, path) -> None:
    """Fixed-header CSV with 17 significant digits (exact float round trip)."""
    if len(log) == 0:
        raise ValueError("refusing to export an empty log")
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for row in log.rows():
                w.writerow([f"{v:.17g}" for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_csv(path, mode="robust") -> SimulationLog:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header")
        rows = np.array([[float(v) for v in r] for r in reader], dtype=float)
    return SimulationLog.from_rows(rows, mode)


def _polyline(ts, ys, x0, y0, w, h, tr, yr, color, dash=None):
    sx = w / (tr[1] - tr[0]) if tr[1] > tr[0] else 1.0
    sy = h / (yr[1] - yr[0]) if yr[1] > yr[0] else 1.0
    pts = " ".join(f"{x0 + (t - tr[0]) * sx:.2f},{y0 + h - (y - yr[0]) * sy:.2f}"
                   for t, y in zip(ts, ys))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{extra} '
            f'points="{pts}"/>')


def _svg(title, ts, series, ylabel, zero_line=False):
    W, H, L, B, Tm, R = 640, 360, 70, 40, 40, 20
    pw, ph = W - L - R, H - Tm - B
    ys = np.concatenate([s[1] for s in series] + ([np.zeros(1)] if zero_line else []))
    lo, hi = float(ys.min()), float(ys.max())
    pad = 0.05 * (hi - lo) if hi > lo else 0.5
    yr = (lo - pad, hi + pad)
    tr = (float(ts[0]), float(ts[-1]) if ts[-1] > ts[0] else float(ts[0]) + 1.0)
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" '
           f'height="{H}" viewBox="0 0 {W} {H}">',
           f'<title>{escape(title)}</title>',
           f'<rect x="{L}" y="{Tm}" width="{pw}" height="{ph}" fill="white" stroke="black"/>',
           f'<text x="{W / 2}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<text x="{W / 2}" y="{H - 8}" text-anchor="middle" font-size="12">t [s]</text>',
           f'<text x="16" y="{Tm + ph / 2}" font-size="12" transform="rotate(-90 16 '
           f'{Tm + ph / 2})" text-anchor="middle">{escape(ylabel)}</text>']
    for frac in (0.0, 0.5, 1.0):
        yv = yr[0] + frac * (yr[1] - yr[0])
        yy = Tm + ph - frac * ph
        out.append(f'<text x="{L - 6}" y="{yy + 4:.1f}" text-anchor="end" '
                   f'font-size="10">{yv:.3g}</text>')
        tv = tr[0] + frac * (tr[1] - tr[0])
        out.append(f'<text x="{L + frac * pw:.1f}" y="{Tm + ph + 14}" text-anchor="middle" '
                   f'font-size="10">{tv:.3g}</text>')
    if zero_line and yr[0] < 0 < yr[1]:
        out.append(_polyline([tr[0], tr[1]], [0.0, 0.0], L, Tm, pw, ph, tr, yr, "gray", "4 3"))
    colors = ["#1f77b4", "#d62728", "#2ca02c"]
    for i, (name, vals, dash) in enumerate(series):
        out.append(_polyline(ts, vals, L, Tm, pw, ph, tr, yr, colors[i % 3], dash))
        out.append(f'<text x="{L + 8}" y="{Tm + 16 + 14 * i}" font-size="11" '
                   f'fill="{colors[i % 3]}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_plot(log: SimulationLog, path, panel: str = "tracking") -> None:
    """SVG of reference and payload height (``tracking``) or ``h_t`` (``safety``)."""
    if len(log) == 0:
        raise ValueError("refusing to plot an empty log")
    if panel == "tracking":
        doc = _svg(f"payload height ({log.mode})", log.t,
                   [("r_p,z", log.r_p[:, 2], "6 3"), ("p_p,z", log.p_p[:, 2], None)], "z [m]")
    elif panel == "safety":
        doc = _svg(f"target safety ({log.mode})", log.t, [("h_t", log.h_t, None)], "h_t [m]",
                   zero_line=True)
    else:
        raise ValueError("panel must be 'tracking' or 'safety'")
    path = Path(path)
    try:
        path.write_text(doc)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def export_run(log: SimulationLog, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    export_csv(log, out / f"log_{log.mode}.csv")
    export_plot(log, out / f"tracking_{log.mode}.svg", "tracking")
    export_plot(log, out / f"safety_{log.mode}.svg", "safety")


def regulation_config(duration=15.0, offset=(0.0, 0.15, 0.1)) -> ScenarioConfig:
    """Static base, no uncertainty, no obstacles; start ``offset`` away from a fixed hover point."""
    return ScenarioConfig(base_profile=BaseMotionProfile.static(), obstacles=ObstacleSet(),
                          uncertainty=UncertaintySpec(enabled=False), duration=duration,
                          mode="nominal", initial_offset=tuple(offset),
                          reference=ReferenceSpec(hover_time=1e9))


__all__ = ["ScenarioConfig", "ReferenceSpec", "UncertaintySpec", "SimulationLog", "Metrics",
           "Thresholds", "ComparisonReport", "run_scenario", "compute_metrics",
           "compare_nominal_robust", "export_csv", "read_csv", "export_plot", "export_run",
           "load_config", "save_config", "config_from_dict", "config_to_dict",
           "validate_config", "hover_state", "regulation_config", "base_motion", "DeltaResult"]
