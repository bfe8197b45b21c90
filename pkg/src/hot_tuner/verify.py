"""Trajectory runners and the stochastic stability checks.

Conditional expectations are estimated by frozen-state resampling: freeze
(theta_k, vartheta_k, phi_k), draw many independent noise samples conditioned
on that history, advance one step per sample, and average.  Ensembles are run
in lockstep across trials with the per-trial noise streams pre-drawn, which
keeps a 200-trial, 50k-step run in the seconds range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lyapunov import (
    InvalidAlphaError,
    clipped_V,
    lyapunov_value_arrays,
    theorem4_radius,
)
from .tuner import NonFiniteError, TunerState, _hot_update, gd_step

DEFAULT_Z = 4.0


def _trial_rng(cfg, trial):
    return np.random.default_rng(cfg.trial_seed(trial))


def _draw_innovations(cfg, trial, horizon):
    """The canonical per-trial noise innovation stream."""
    rng = _trial_rng(cfg, trial)
    return np.asarray(cfg.noise.innovation(rng.uniform(size=horizon)), dtype=float)


# ---------------------------------------------------------------------------
# single-trial trace
# ---------------------------------------------------------------------------

@dataclass
class TrajectoryTrace:
    """Full per-step record of one trial.

    Row k holds the state before consuming observation k; the observation
    fields (e_y, eta, phi_norm) of the final row are NaN since no observation
    is consumed there.
    """

    k: np.ndarray
    theta: np.ndarray
    vartheta: np.ndarray
    V: np.ndarray
    Vhat: np.ndarray
    e_y: np.ndarray
    eta: np.ndarray
    phi_norm: np.ndarray
    seed: int
    config: object


def run_trajectory(cfg, seed, horizon=None, initial=None):
    """Run one trial for `horizon` steps; deterministic given (cfg, seed)."""
    horizon = cfg.horizon if horizon is None else horizon
    state = cfg.initial_state() if initial is None else initial
    consts = cfg.constants()
    ts = cfg.true_model.theta_star
    gains = cfg.gains
    n = cfg.dimension

    trial = seed ^ cfg.base_seed  # invert trial_seed so streams line up
    innov = _draw_innovations(cfg, trial, horizon)
    phi_all = cfg.regressor.generate_batch(0, horizon, seed)

    theta = np.empty((horizon + 1, n))
    vartheta = np.empty((horizon + 1, n))
    e_y = np.full(horizon + 1, np.nan)
    eta = np.full(horizon + 1, np.nan)
    phi_norm = np.full(horizon + 1, np.nan)
    theta[0] = state.theta
    vartheta[0] = state.vartheta

    th, vt = state.theta, state.vartheta
    for k in range(horizon):
        phi = phi_all[k]
        bias = cfg.noise.conditional_mean(th, vt)
        e = bias + innov[k]
        y = float(phi @ ts) + e
        e_y[k] = float(th @ phi) - y
        eta[k] = e
        phi_norm[k] = float(np.linalg.norm(phi))
        th, vt = _hot_update(th, vt, phi, y, gains)
        if not (np.all(np.isfinite(th)) and np.all(np.isfinite(vt))):
            raise NonFiniteError(k)
        theta[k + 1] = th
        vartheta[k + 1] = vt

    V = lyapunov_value_arrays(theta, vartheta, ts, gains.gamma)
    Vhat = clipped_V(V, consts.K) if not consts.degenerate else np.full_like(V, np.nan)
    return TrajectoryTrace(k=np.arange(horizon + 1), theta=theta, vartheta=vartheta,
                           V=V, Vhat=Vhat, e_y=e_y, eta=eta, phi_norm=phi_norm,
                           seed=seed, config=cfg)


# ---------------------------------------------------------------------------
# lockstep ensemble
# ---------------------------------------------------------------------------

@dataclass
class EnsembleResult:
    """Per-trial Lyapunov paths from a lockstep ensemble run."""

    V: np.ndarray          # (trials, horizon+1)
    final_theta: np.ndarray
    final_vartheta: np.ndarray
    seeds: list
    horizon: int


def run_ensemble(cfg, n_trials=None, horizon=None, initial=None, chunk=4096):
    """Evolve n_trials independent trajectories in lockstep, recording V only.

    Per-trial regressor and noise streams match run_trajectory(cfg,
    cfg.trial_seed(t)) exactly.
    """
    n_trials = cfg.ensemble if n_trials is None else n_trials
    if n_trials < 1:
        raise ValueError("ensemble must contain at least one trial")
    horizon = cfg.horizon if horizon is None else horizon
    ts = cfg.true_model.theta_star
    gains = cfg.gains
    init = cfg.initial_state() if initial is None else initial

    seeds = [cfg.trial_seed(t) for t in range(n_trials)]
    innov = np.stack([_draw_innovations(cfg, t, horizon) for t in range(n_trials)])

    theta = np.tile(np.asarray(init.theta, dtype=float), (n_trials, 1))
    vartheta = np.tile(np.asarray(init.vartheta, dtype=float), (n_trials, 1))
    V = np.empty((n_trials, horizon + 1))
    V[:, 0] = lyapunov_value_arrays(theta, vartheta, ts, gains.gamma)

    per_trial_phi = cfg.regressor.random
    for k0 in range(0, horizon, chunk):
        k1 = min(k0 + chunk, horizon)
        if per_trial_phi:
            phi_chunk = np.stack(
                [cfg.regressor.generate_batch(k0, k1, s) for s in seeds], axis=1)
        else:
            phi_chunk = cfg.regressor.generate_batch(k0, k1, 0)[:, None, :]
        for j, k in enumerate(range(k0, k1)):
            phi = phi_chunk[j] if per_trial_phi else phi_chunk[j, 0]
            bias = cfg.noise.conditional_mean(theta, vartheta)
            e = bias + innov[:, k]
            y = phi @ ts + e
            theta, vartheta = _hot_update(theta, vartheta, phi, y, gains)
            if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(vartheta))):
                raise NonFiniteError(k)
            V[:, k + 1] = lyapunov_value_arrays(theta, vartheta, ts, gains.gamma)
    return EnsembleResult(V=V, final_theta=theta, final_vartheta=vartheta,
                          seeds=seeds, horizon=horizon)


def _v_matrix(traces):
    """Accept an EnsembleResult, a list of traces, or a raw (trials, steps) array."""
    if isinstance(traces, EnsembleResult):
        return traces.V
    if isinstance(traces, np.ndarray):
        return np.atleast_2d(traces)
    paths = [t.V if hasattr(t, "V") else np.asarray(t, dtype=float) for t in traces]
    if not paths:
        raise ValueError("empty ensemble")
    return np.stack(paths)


# ---------------------------------------------------------------------------
# probe states
# ---------------------------------------------------------------------------

def state_on_sphere(v, theta_star, gamma, rng):
    """A tuner state with Lyapunov value exactly v, in a random direction."""
    ts = np.asarray(theta_star, dtype=float)
    n = ts.size
    u1 = rng.standard_normal(n)
    u1 /= np.linalg.norm(u1)
    u2 = rng.standard_normal(n)
    u2 /= np.linalg.norm(u2)
    r = math.sqrt(gamma * v / 2.0)
    vartheta = ts + r * u1
    theta = vartheta + r * u2
    return TunerState(theta=theta, vartheta=vartheta, step=0)


def probe_states(cfg, consts, n_harvest=50, seed=0):
    """Labelled probe states: V-spheres {0.1K, K, T, 10T} plus harvested ones."""
    rng = np.random.default_rng([cfg.base_seed, seed, 0x9E37])
    ts = cfg.true_model.theta_star
    gamma = cfg.gains.gamma
    probes = []
    if not consts.degenerate:
        for label, v in (("0.1K", 0.1 * consts.K), ("K", consts.K),
                         ("T", consts.T), ("10T", 10.0 * consts.T)):
            if v > 0:
                probes.append((label, state_on_sphere(v, ts, gamma, rng)))
    if n_harvest > 0:
        horizon = max(n_harvest, min(cfg.horizon, 2000))
        trace = run_trajectory(cfg, cfg.trial_seed(0), horizon=horizon)
        idx = np.linspace(0, horizon, n_harvest, dtype=int)
        for i in idx:
            probes.append((f"traj[{i}]",
                           TunerState(theta=trace.theta[i].copy(),
                                      vartheta=trace.vartheta[i].copy(), step=int(i))))
    return probes


# ---------------------------------------------------------------------------
# decrement check (conditional expectation by resampling)
# ---------------------------------------------------------------------------

@dataclass
class DecrementProbe:
    label: str
    noise_kind: str
    V_k: float
    mean_V_next: float
    stderr: float
    bound: float
    passed: bool
    strictly_decreasing: bool  # empirical mean delta < z * stderr


@dataclass
class DecrementReport:
    probes: list
    z: float
    resamples: int

    @property
    def all_pass(self):
        return all(p.passed for p in self.probes)


def conditional_decrement_probe(state, phi, cfg, consts, M, rng, noise=None,
                                z=DEFAULT_Z, label=""):
    """Empirical E[V_{k+1} | F_k] against V_k - c1 V_k + c2 sqrt(V_k) + c_hat."""
    if M < 100:
        raise ValueError("need at least 100 resamples")
    noise = cfg.noise if noise is None else noise
    ts = cfg.true_model.theta_star
    gains = cfg.gains
    mean_eta = noise.conditional_mean(state.theta, state.vartheta)
    eta = mean_eta + noise.innovation(rng.uniform(size=M))
    y = float(phi @ ts) + eta
    th, vt = _hot_update(state.theta, state.vartheta, phi, y, gains)
    v_next = lyapunov_value_arrays(th, vt, ts, gains.gamma)
    v_k = float(lyapunov_value_arrays(np.asarray(state.theta, dtype=float),
                                      np.asarray(state.vartheta, dtype=float),
                                      ts, gains.gamma))
    mean = float(np.mean(v_next))
    if M > 1 and np.ptp(v_next) > 0.0:
        stderr = float(np.std(v_next, ddof=1) / math.sqrt(M))
    else:
        stderr = 0.0  # degenerate resampling (e.g. zero noise)
    bound = v_k - consts.c1 * v_k + consts.c2 * math.sqrt(v_k) + consts.c_hat
    return DecrementProbe(
        label=label, noise_kind=type(noise).__name__, V_k=v_k,
        mean_V_next=mean, stderr=stderr, bound=bound,
        passed=mean <= bound + z * stderr,
        strictly_decreasing=(mean - v_k) < z * stderr)


def decrement_report(cfg, consts=None, M=None, z=DEFAULT_Z, noises=None,
                     n_harvest=50, seed=0):
    """Run the decrement probe over sphere and harvested states.

    `noises` defaults to the configured noise kind; pass several kinds to
    sweep them all against the same (d_max, sigma_max) constants.
    """
    consts = cfg.constants() if consts is None else consts
    M = cfg.resamples if M is None else M
    noises = [cfg.noise] if noises is None else noises
    states = probe_states(cfg, consts, n_harvest=n_harvest, seed=seed)
    rng = np.random.default_rng([cfg.base_seed, seed, 0xDEC])
    phi = cfg.regressor.generate(0, cfg.trial_seed(0))
    probes = []
    for noise in noises:
        for label, state in states:
            probes.append(conditional_decrement_probe(
                state, phi, cfg, consts, M, rng, noise=noise, z=z, label=label))
    return DecrementReport(probes=probes, z=z, resamples=M)


# ---------------------------------------------------------------------------
# boundedness check
# ---------------------------------------------------------------------------

@dataclass
class BoundednessSummary:
    sup_per_trial: np.ndarray
    max_sup: float
    threshold: float
    frac_steps_above_T: float
    last_entry_time: np.ndarray  # last k with V_k <= T, -1 if never
    all_finite: bool
    all_within_threshold: bool
    all_reenter: bool
    margin: float

    @property
    def passed(self):
        return self.all_finite and self.all_within_threshold and self.all_reenter


def boundedness_check(traces, consts, margin=5.0):
    """Theorem-3 proxy: finite sup V, sup below max(V0, T)*margin, re-entry."""
    V = _v_matrix(traces)
    if V.size == 0:
        raise ValueError("empty ensemble")
    if consts.degenerate:
        raise ValueError("boundedness check needs non-degenerate constants")
    sup = np.max(V, axis=1)
    v0 = float(np.max(V[:, 0]))
    threshold = max(v0, consts.T) * margin
    above = V > consts.T
    frac_above = float(np.mean(above))
    last_entry = np.full(V.shape[0], -1, dtype=int)
    all_reenter = True
    for i in range(V.shape[0]):
        below = np.flatnonzero(~above[i])
        last_entry[i] = int(below[-1]) if below.size else -1
        if above[i].any():
            # last excursion must be followed by a return to {V <= T}
            last_exc = int(np.flatnonzero(above[i])[-1])
            if last_entry[i] < last_exc:
                all_reenter = False
    return BoundednessSummary(
        sup_per_trial=sup, max_sup=float(np.max(sup)), threshold=threshold,
        frac_steps_above_T=frac_above, last_entry_time=last_entry,
        all_finite=bool(np.all(np.isfinite(sup))),
        all_within_threshold=bool(np.all(sup <= threshold)),
        all_reenter=all_reenter, margin=margin)


# ---------------------------------------------------------------------------
# exponential rate check
# ---------------------------------------------------------------------------

@dataclass
class RateReport:
    alpha: float
    clip_radius: float
    mean_Vhat: np.ndarray
    stderr_Vhat: np.ndarray
    envelope: np.ndarray
    pass_per_step: np.ndarray
    z: float

    @property
    def passed(self):
        return bool(np.all(self.pass_per_step))


def rate_check(traces, alpha, consts, z=DEFAULT_Z):
    """Ensemble mean of V-hat (clipped at the Theorem-4 radius) against the
    supermartingale envelope (1-alpha)^k * Vhat_0."""
    K4 = theorem4_radius(alpha, consts)  # raises InvalidAlphaError
    V = _v_matrix(traces)
    vhat = clipped_V(V, K4)
    n, steps = vhat.shape
    mean = np.mean(vhat, axis=0)
    stderr = (np.std(vhat, axis=0, ddof=1) / math.sqrt(n)) if n > 1 else np.zeros(steps)
    envelope = (1.0 - alpha) ** np.arange(steps) * float(np.max(vhat[:, 0]))
    ok = mean <= envelope + z * stderr
    return RateReport(alpha=alpha, clip_radius=K4, mean_Vhat=mean,
                      stderr_Vhat=stderr, envelope=envelope,
                      pass_per_step=ok, z=z)


# ---------------------------------------------------------------------------
# baseline comparison
# ---------------------------------------------------------------------------

@dataclass
class BaselineRun:
    terminal_error: float
    error_trace: np.ndarray
    loss_trace: np.ndarray
    diverged_at: int  # -1 if finite throughout


@dataclass
class BaselineComparison:
    seeds: list
    hot: list
    gd: list
    normalized_gd: bool


def compare_baseline(cfg, seeds, normalized_gd=False, horizon=None):
    """HOT vs the plain gradient recursion on identical (phi, eta) streams."""
    horizon = cfg.horizon if horizon is None else horizon
    ts = cfg.true_model.theta_star
    gains = cfg.gains
    hot_runs, gd_runs = [], []
    for seed in seeds:
        trial = seed ^ cfg.base_seed
        innov = _draw_innovations(cfg, trial, horizon)
        phi_all = cfg.regressor.generate_batch(0, horizon, seed)

        th, vt = cfg.initial_state().theta, cfg.initial_state().vartheta
        gd_th = cfg.gains.theta0.copy()
        hot_err = np.full(horizon + 1, np.nan)
        gd_err = np.full(horizon + 1, np.nan)
        hot_loss = np.full(horizon, np.nan)
        gd_loss = np.full(horizon, np.nan)
        hot_err[0] = gd_err[0] = float(np.linalg.norm(gains.theta0 - ts))
        hot_div = gd_div = -1
        for k in range(horizon):
            phi = phi_all[k]
            eta = cfg.noise.conditional_mean(th, vt) + innov[k]
            y = float(phi @ ts) + eta
            if hot_div < 0:
                hot_loss[k] = 0.5 * (float(th @ phi) - y) ** 2
                try:
                    th, vt = _hot_update(th, vt, phi, y, gains)
                    if not (np.all(np.isfinite(th)) and np.all(np.isfinite(vt))):
                        raise NonFiniteError(k)
                    hot_err[k + 1] = float(np.linalg.norm(th - ts))
                except NonFiniteError:
                    hot_div = k
            if gd_div < 0:
                gd_loss[k] = 0.5 * (float(gd_th @ phi) - y) ** 2
                try:
                    gd_th = gd_step(gd_th, phi, y, gains.gamma, normalized=normalized_gd)
                    gd_err[k + 1] = float(np.linalg.norm(gd_th - ts))
                except NonFiniteError:
                    gd_div = k
        hot_runs.append(BaselineRun(
            terminal_error=float(hot_err[np.isfinite(hot_err)][-1]),
            error_trace=hot_err, loss_trace=hot_loss, diverged_at=hot_div))
        gd_runs.append(BaselineRun(
            terminal_error=float(gd_err[np.isfinite(gd_err)][-1]),
            error_trace=gd_err, loss_trace=gd_loss, diverged_at=gd_div))
    return BaselineComparison(seeds=list(seeds), hot=hot_runs, gd=gd_runs,
                              normalized_gd=normalized_gd)
