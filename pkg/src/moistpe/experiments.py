"""Numerical experiments turning the decay, absorbing-set, smoothing and
time-regularity estimates into pass/fail checks."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import stats

from .energy import check_buoyancy_identity, h2_surrogate, l2_sq, norm_H, norm_V, report
from .forcing import forcing_fields, random_state
from .grid import Grid, PhysParams, State, make_grid
from .io import canonical_hash
from .mms import spatial_ladder, temporal_ladder
from .timestepper import StepConfig, run

log = logging.getLogger(__name__)

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
EXIT_CODES = {PASS: 0, FAIL: 2, INCONCLUSIVE: 3}


@dataclass
class ExperimentResult:
    name: str
    status: str
    constants: dict[str, float]
    series: dict[str, np.ndarray] = field(default_factory=dict)
    fingerprint: str = ""
    notes: list[str] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]

    def manifest(self) -> dict[str, Any]:
        items: dict[str, Any] = {"name": self.name, "status": self.status, "fingerprint": self.fingerprint}
        items.update({k: float(v) for k, v in self.constants.items()})
        for i, n in enumerate(self.notes):
            items[f"note{i}"] = n
        return items


def experiment_fingerprint(name: str, g: Grid, p: PhysParams, cfg: StepConfig, seed: int | None = None,
                           **extra) -> str:
    """Hash of everything that determines an experiment's output."""
    raw = {
        "experiment": {"name": name, **extra},
        "grid": {"nx": g.nx, "ny": g.ny, "nz": g.nz, "lx": g.lx, "ly": g.ly},
        "params": {k: (v if not isinstance(v, dict) else tuple(sorted(v.items()))) for k, v in asdict(p).items()},
        "stepping": asdict(cfg),
        "initial": {"seed": -1 if seed is None else seed},
    }
    return canonical_hash(raw)


def linear_fit(t: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares slope, intercept and R^2."""
    if len(t) < 3 or np.ptp(t) == 0:
        return float("nan"), float("nan"), 0.0
    r = stats.linregress(t, y)
    return float(r.slope), float(r.intercept), float(r.rvalue ** 2)


def absorbing_time(times: np.ndarray, series: Sequence[np.ndarray], tail: float, band: float = 0.05,
                   hold: float = 1.0) -> float | None:
    """First time after which every series stays within ``band`` of its tail
    median for ``hold`` time units. ``None`` if no such time exists."""
    times = np.asarray(times)
    tail_mask = times >= times[-1] - tail
    ok = np.ones(len(times), dtype=bool)
    for s in series:
        s = np.asarray(s)
        med = np.median(s[tail_mask])
        scale = abs(med) if med != 0 else max(np.max(np.abs(s)), 1e-300)
        ok &= np.abs(s - med) <= band * scale
    for i, t0 in enumerate(times):
        if t0 + hold > times[-1] + 1e-12:
            break
        window = (times >= t0) & (times <= t0 + hold + 1e-12)
        if ok[window].all():
            return float(t0)
    return None


def scale_to_V(s: State, target: float, p: PhysParams, g: Grid) -> State:
    nv = norm_V(s, p, g)
    return s.scaled(target / nv)


# -------------------------------------------------------------- q decay

def exp_q_decay(p: PhysParams, s0: State, g: Grid, cfg: StepConfig, tail_fraction: float = 0.5,
                slack: float = 0.1, seed: int | None = None) -> ExperimentResult:
    """Fit the decay rate of ||q||_2^2 with zero moisture forcing.

    Passes when the fitted rate is at least (1 - slack) times 1/(2 Rt4 + 2/beta).
    """
    if p.Q2.name != "zero" and p.Q2.amplitude != 0.0:
        raise ValueError("exp_q_decay requires Q2 = 0")
    fp = experiment_fingerprint("q_decay", g, p, cfg, seed, tail_fraction=tail_fraction)
    rate = 1.0 / (2 * p.Rt4 + 2 / p.beta)
    times, qsq = [], []

    def sink(s, n):
        times.append(s.time)
        qsq.append(l2_sq(s.q, g))

    run(s0, p, g, cfg, sinks=[sink], forcing=forcing_fields(p, g))
    t, e = np.array(times), np.array(qsq)
    consts = {"predicted_rate": rate, "threshold": -(1 - slack) * rate}
    series = {"time": t, "q_l2_sq": e}
    if e[0] == 0.0:
        consts.update(lambda_fit=0.0, r2=1.0, fit_t0=t[0], fit_t1=t[-1])
        return ExperimentResult("q_decay", PASS, consts, series, fp, ["initial moisture identically zero"])
    mask = (t >= t[0] + (1 - tail_fraction) * (t[-1] - t[0])) & (e > 0)
    slope, _, r2 = linear_fit(t[mask], np.log(e[mask]))
    consts.update(lambda_fit=slope, r2=r2, fit_t0=t[mask][0], fit_t1=t[mask][-1])
    if not math.isfinite(slope) or r2 < 0.95:
        status = INCONCLUSIVE
    else:
        status = PASS if slope <= -(1 - slack) * rate else FAIL
    return ExperimentResult("q_decay", status, consts, series, fp)


# ---------------------------------------------------------- absorbing ball

def _member(args):
    s0, p, g, cfg, every = args
    forcing = forcing_fields(p, g)
    t, nv, nh2 = [], [], []

    def sink(s, n):
        t.append(s.time)
        nv.append(norm_V(s, p, g))
        nh2.append(h2_surrogate(s, p, g))

    cfg = StepConfig(**{**asdict(cfg), "snapshot_every": every})
    res = run(s0, p, g, cfg, sinks=[sink], forcing=forcing)
    return np.array(t), np.array(nv), np.array(nh2), res.final


def run_ensemble(members, threads: int = 1):
    """Run members serially or in a process pool; results keep input order."""
    if threads <= 1 or len(members) == 1:
        return [_member(m) for m in members]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_member, members))


def exp_absorbing_ball(
    states: Sequence[State],
    p: PhysParams,
    g: Grid,
    cfg: StepConfig,
    tail: float = 2.0,
    tolerance: float = 0.2,
    snapshot_every: int = 5,
    threads: int = 1,
    seed: int | None = None,
) -> ExperimentResult:
    """Run an ensemble under fixed forcing and compare tail suprema.

    Passes if the tail suprema of the V-norm and of the H2 surrogate agree
    within ``tolerance`` (max/min - 1) across members. A member whose norms
    never settle (no absorbing time before the tail) makes the result
    inconclusive.
    """
    fp = experiment_fingerprint("absorbing_ball", g, p, cfg, seed, tail=tail, members=len(states),
                                radii=tuple(round(norm_V(s, p, g), 12) for s in states))
    if cfg.t_end < tail:
        raise ValueError("t_end must cover the tail window")
    results = run_ensemble([(s, p, g, cfg, snapshot_every) for s in states], threads)
    consts: dict[str, float] = {}
    series: dict[str, np.ndarray] = {}
    supV, supH2, entry = [], [], []
    for i, (t, nv, nh2, _) in enumerate(results):
        mask = t >= t[-1] - tail
        supV.append(float(nv[mask].max()))
        supH2.append(float(nh2[mask].max()))
        tau = absorbing_time(t, [nv, nh2], tail)
        entry.append(tau)
        series[f"time_{i}"], series[f"V_{i}"], series[f"H2_{i}"] = t, nv, nh2
        consts[f"initial_V_{i}"] = float(nv[0])
        consts[f"tail_sup_V_{i}"] = supV[-1]
        consts[f"tail_sup_H2_{i}"] = supH2[-1]
        consts[f"absorbing_time_{i}"] = tau if tau is not None else float("nan")
    spreadV = max(supV) / min(supV) - 1 if min(supV) > 0 else 0.0
    spreadH2 = max(supH2) / min(supH2) - 1 if min(supH2) > 0 else 0.0
    consts.update(spread_V=spreadV, spread_H2=spreadH2, radius_V=max(supV), radius_H2=max(supH2))
    notes = []
    t_last = results[0][0][-1]
    if any(tau is None or tau > t_last - tail for tau in entry):
        status = INCONCLUSIVE
        notes.append("at least one member had not settled before the tail window")
    elif max(supV) < 1e-12:
        status = PASS
        notes.append("all members decayed to zero")
    else:
        status = PASS if spreadV <= tolerance and spreadH2 <= tolerance else FAIL
    return ExperimentResult("absorbing_ball", status, consts, series, fp, notes)


def ensemble_initial_states(g: Grid, p: PhysParams, radius: float, seed: int = 0,
                            factors=(1.0, 2.0, 4.0)) -> list[State]:
    """Admissible random states with V-norms ``radius * factors``."""
    return [scale_to_V(random_state(g, p, seed + i, 1.0), radius * f, p, g) for i, f in enumerate(factors)]


def pre_evolve(s0: State, p: PhysParams, g: Grid, cfg: StepConfig, duration: float) -> State:
    if duration <= 0:
        return s0
    pre = StepConfig(**{**asdict(cfg), "t_end": duration, "snapshot_every": max(cfg.n_steps, 1)})
    return run(s0, p, g, pre, forcing=forcing_fields(p, g)).final


# -------------------------------------------------------------- smoothing

def _twin(sa: State, sb: State, p: PhysParams, g: Grid, cfg: StepConfig):
    forcing = forcing_fields(p, g)
    ta, tb = [], []
    run(sa, p, g, cfg, sinks=[lambda s, n: ta.append(s)], forcing=forcing)
    run(sb, p, g, cfg, sinks=[lambda s, n: tb.append(s)], forcing=forcing)
    t = np.array([s.time for s in ta])
    dH = np.array([norm_H(a - b, g) for a, b in zip(ta, tb)])
    dV = np.array([norm_V(a - b, p, g) for a, b in zip(ta, tb)])
    return t, dH, dV


def exp_smoothing(
    s0: State,
    p: PhysParams,
    g: Grid,
    cfg: StepConfig,
    deltas: Sequence[float] = (1e-3, 1e-4, 1e-5),
    t_bar: float = 1.0,
    pre_time: float = 0.0,
    tolerance: float = 0.25,
    seed: int = 0,
    direction: State | None = None,
) -> ExperimentResult:
    """Twin trajectories separated by relative H-perturbations ``deltas``.

    After an optional pre-run of ``pre_time`` (into the absorbing regime) the
    base state is perturbed along a fixed admissible direction. The smoothing
    quotient ||diff(t_bar)||_V / ||diff(0)||_H must be finite and vary by at
    most ``tolerance`` (max/min - 1) across deltas.
    """
    fp = experiment_fingerprint("smoothing", g, p, cfg, seed, deltas=tuple(deltas), t_bar=t_bar, pre_time=pre_time)
    base = pre_evolve(s0, p, g, cfg, pre_time).replace(time=0.0)
    if direction is None:
        direction = random_state(g, p, seed + 1000, 1.0)
    direction = direction.scaled(1.0 / norm_H(direction, g))
    twin_cfg = StepConfig(**{**asdict(cfg), "t_end": t_bar, "snapshot_every": 1})
    scale = norm_H(base, g)
    consts: dict[str, float] = {}
    series: dict[str, np.ndarray] = {}
    quotients, rates = [], []
    for i, d in enumerate(deltas):
        pert = base + direction.scaled(d * scale)
        t, dH, dV = _twin(base, pert, p, g, twin_cfg)
        q = dV[-1] / dH[0]
        growth, _, r2 = linear_fit(t[1:], np.log(np.maximum(dH[1:], 1e-300)))
        window = t > 0
        bound = np.max(dV[window] ** 2 / (((t[window] + 1) / t[window]) * np.exp(growth * t[window]) * dH[0] ** 2))
        quotients.append(q)
        rates.append(growth)
        consts[f"quotient_{i}"] = q
        consts[f"rho2_{i}"] = growth
        consts[f"rho1_{i}"] = float(bound)
        consts[f"rho2_r2_{i}"] = r2
        series[f"time_{i}"], series[f"dH_{i}"], series[f"dV_{i}"] = t, dH, dV
    quotients = np.array(quotients)
    variation = float(quotients.max() / quotients.min() - 1) if quotients.min() > 0 else float("inf")
    consts.update(variation=variation, t_bar=t_bar, quotient_max=float(quotients.max()))
    finite = bool(np.all(np.isfinite(quotients)))
    status = PASS if finite and variation <= tolerance else FAIL
    return ExperimentResult("smoothing", status, consts, series, fp)


# ------------------------------------------------------- time regularity

def lipschitz_quotient(states: Sequence[State], p: PhysParams, g: Grid, lag: int = 1, max_lag: int | None = None) -> float:
    """max ||s_i - s_j||_V / |t_i - t_j| over snapshot pairs with index gap in [lag, max_lag]."""
    max_lag = max_lag or lag
    best = 0.0
    for k in range(lag, max_lag + 1):
        for i in range(len(states) - k):
            a, b = states[i], states[i + k]
            best = max(best, norm_V(a - b, p, g) / abs(b.time - a.time))
    return best


def exp_time_regularity(
    s0: State,
    p: PhysParams,
    g: Grid,
    cfg: StepConfig,
    window: float = 1.0,
    pre_time: float = 0.0,
    max_lag: int = 2,
    tolerance_dt: float = 0.15,
    tolerance_lag: float = 0.10,
    seed: int | None = None,
) -> ExperimentResult:
    """Lipschitz-in-time quotient in V over a window after the absorbing time.

    The same pre-evolved state is integrated at dt and dt/2; the quotient
    (pairs up to ``max_lag`` snapshot gaps at the coarse spacing) must agree
    within ``tolerance_dt``, and quotients at gaps of 1 and 2 coarse steps
    within ``tolerance_lag``.
    """
    fp = experiment_fingerprint("time_regularity", g, p, cfg, seed, window=window, pre_time=pre_time,
                                max_lag=max_lag)
    base = pre_evolve(s0, p, g, cfg, pre_time).replace(time=0.0)
    out = {}
    for label, dt, every in (("dt", cfg.dt, 1), ("half", cfg.dt / 2, 2)):
        c = StepConfig(**{**asdict(cfg), "dt": dt, "t_end": window, "snapshot_every": every})
        snaps = run(base, p, g, c, keep_snapshots=True, forcing=forcing_fields(p, g)).snapshots
        out[label] = snaps
    q_dt = lipschitz_quotient(out["dt"], p, g, 1, max_lag)
    q_half = lipschitz_quotient(out["half"], p, g, 1, max_lag)
    q_lag1 = lipschitz_quotient(out["dt"], p, g, 1, 1)
    q_lag2 = lipschitz_quotient(out["dt"], p, g, 2, 2)
    rel_dt = abs(q_dt - q_half) / max(q_dt, q_half) if max(q_dt, q_half) > 0 else 0.0
    rel_lag = abs(q_lag1 - q_lag2) / max(q_lag1, q_lag2) if max(q_lag1, q_lag2) > 0 else 0.0
    consts = {"rho3_dt": q_dt, "rho3_half_dt": q_half, "rho3_lag1": q_lag1, "rho3_lag2": q_lag2,
              "variation_dt": rel_dt, "variation_lag": rel_lag, "window": window, "pre_time": pre_time}
    t = np.array([s.time for s in out["dt"]])
    speed = np.array([norm_V(b - a, p, g) / (b.time - a.time) for a, b in zip(out["dt"][:-1], out["dt"][1:])])
    status = PASS if rel_dt <= tolerance_dt and rel_lag <= tolerance_lag else FAIL
    return ExperimentResult("time_regularity", status, consts, {"time": t[1:], "V_speed": speed}, fp)


# ---------------------------------------------------------- energy balance

def balance_residuals(p: PhysParams, n: int, dt: float, t_end: float = 1.0, every: float = 0.1,
                      seed: int = 0, amplitude: float = 0.2) -> tuple[float, float, float]:
    """Largest moisture and (v, T) balance residuals over a run, plus the
    largest buoyancy-identity mismatch, sampled every ``every`` time units.

    Each residual uses the backward difference over the single step ending at
    the sample time, so it measures the one-step defect of the scheme.
    """
    g = make_grid(n, n, n)
    forcing = forcing_fields(p, g)
    stride = max(1, int(round(every / dt)))
    rq, rvt, buoy = [], [], []
    last: list[State | None] = [None]

    def sink(s, k):
        if last[0] is not None and k % stride == 0:
            r = report(s, last[0], p, g, forcing)
            rq.append(r.r_q)
            rvt.append(r.r_vT)
            buoy.append(check_buoyancy_identity(s, p, g))
        last[0] = s

    s0 = random_state(g, p, seed, amplitude)
    run(s0, p, g, StepConfig(dt=dt, t_end=t_end, snapshot_every=1), sinks=[sink], forcing=forcing)
    return max(rq), max(rvt), max(buoy)


def exp_energy_balance(p: PhysParams, n: int = 8, dt: float = 0.02, t_end: float = 1.0, factor: float = 3.0,
                       buoyancy_tol: float = 1e-6, seed: int = 0) -> ExperimentResult:
    """Two-level study: halve h and quarter dt; both balance residuals must
    drop by at least ``factor``. The buoyancy identity is checked on the fine run."""
    coarse = balance_residuals(p, n, dt, t_end, seed=seed)
    fine = balance_residuals(p, 2 * n, dt / 4, t_end, seed=seed)
    consts = {"r_q_coarse": coarse[0], "r_q_fine": fine[0], "r_vT_coarse": coarse[1], "r_vT_fine": fine[1],
              "ratio_q": coarse[0] / fine[0], "ratio_vT": coarse[1] / fine[1], "buoyancy_fine": fine[2]}
    ok = consts["ratio_q"] >= factor and consts["ratio_vT"] >= factor and fine[2] <= buoyancy_tol
    fp = canonical_hash({"experiment": {"name": "energy_balance", "n": n, "dt": dt, "t_end": t_end, "seed": seed},
                         "params": {k: repr(v) for k, v in asdict(p).items()}})
    return ExperimentResult("energy_balance", PASS if ok else FAIL, consts, {}, fp)


# --------------------------------------------------------- manufactured

def exp_manufactured(p: PhysParams | None = None, sizes=(8, 16, 32), dts=(0.01, 0.005, 0.0025),
                     spatial_min: float = 1.8, temporal_min: float = 0.9) -> ExperimentResult:
    p = p or PhysParams()
    sp_tab = spatial_ladder(p, sizes)
    tm_tab = temporal_ladder(p, dts=dts)
    consts = {f"spatial_error_{n}": e for n, e in zip(sp_tab.resolutions, sp_tab.errors)}
    consts.update({f"spatial_order_{i}": o for i, o in enumerate(sp_tab.orders)})
    consts.update({f"temporal_diff_{i}": e for i, e in enumerate(tm_tab.errors)})
    consts.update({f"temporal_order_{i}": o for i, o in enumerate(tm_tab.orders)})
    consts.update(spatial_order=sp_tab.min_order, temporal_order=tm_tab.min_order)
    ok = sp_tab.min_order >= spatial_min and tm_tab.min_order >= temporal_min
    fp = canonical_hash({"experiment": {"name": "manufactured", "sizes": tuple(sizes), "dts": tuple(dts)},
                         "params": {k: repr(v) for k, v in asdict(p).items()}})
    series = {"resolution": np.array(sp_tab.resolutions, float), "spatial_error": np.array(sp_tab.errors),
              "dt": np.array(dts), "steps": np.array(tm_tab.resolutions, float)}
    return ExperimentResult("manufactured", PASS if ok else FAIL, consts, series, fp)
