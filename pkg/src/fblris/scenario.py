"""Episode orchestration: steady state, blockage, decision, recovery, scoring."""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics
from .fbl import ibl_rate
from .metrics import RateSnapshot, Timeline
from .model import (
    ChannelSet,
    NetworkState,
    Regime,
    SystemConfig,
    apply_blockage,
    effective_channels,
    generate_channels,
    generate_topology,
    sinr_all,
)
from .sca import AlternationTrace, alternate, initialize_iterate, iterate_at, psi_of

T0_S = 0.0


class Decision(str, enum.Enum):
    RECOVER = "recover"
    IGNORE = "ignore"


class IgnoreBranch(str, enum.Enum):
    STALE = "stale"
    REOPTIMIZE = "reoptimize"


@dataclass
class EpisodeResult:
    steady_state_rates_bps: np.ndarray
    post_blockage_rates_bps: np.ndarray
    recovered_rates_bps: np.ndarray
    desired_rates_bps: np.ndarray
    decision: Decision
    r_abs: float
    r_ada: float
    r_rec: float
    r: float
    timeline: Timeline
    traces: list = field(default_factory=list)  # disruption-response runs only
    steady_trace: AlternationTrace | None = None
    weights: tuple = (0.1, 0.5, 0.4)
    capped: bool = True
    psi_steady: float = math.nan
    psi_final: float = math.nan
    steps: int = 0
    status: str = "ok"
    blocked_link: tuple | None = None

    @property
    def failed(self) -> bool:
        return self.status.startswith("failed")

    def to_record(self) -> dict:
        """JSON-friendly summary (no traces)."""
        return {
            "status": self.status,
            "decision": self.decision.value,
            "blocked_link": list(self.blocked_link) if self.blocked_link else None,
            "r_abs": self.r_abs,
            "r_ada": self.r_ada,
            "r_rec": self.r_rec,
            "r": self.r,
            "weights": list(self.weights),
            "capped": self.capped,
            "t0_s": self.timeline.t0_s,
            "tq_s": self.timeline.tq_s,
            "t0_max_s": self.timeline.t0_max_s,
            "psi_steady": self.psi_steady,
            "psi_final": self.psi_final,
            "steps": self.steps,
            "desired_rates_bps": self.desired_rates_bps.tolist(),
            "steady_state_rates_bps": self.steady_state_rates_bps.tolist(),
            "post_blockage_rates_bps": self.post_blockage_rates_bps.tolist(),
            "recovered_rates_bps": self.recovered_rates_bps.tolist(),
        }


def _snapshot(rates, config: SystemConfig) -> RateSnapshot:
    return RateSnapshot(np.maximum(np.asarray(rates, dtype=float), 0.0), config.rate_targets)


def run_steady_state(
    channels: ChannelSet, config: SystemConfig, rng: np.random.Generator | None = None
) -> tuple[NetworkState, np.ndarray, AlternationTrace]:
    """IBL optimization from a matched-filter start until convergence or the step cap."""
    start = initialize_iterate(channels, config, rng, Regime.IBL)
    budget = replace(config, coherence_time_s=max(config.steady_state_max_steps, 1) * config.per_subproblem_time_s)
    trace = alternate(
        channels,
        budget,
        Regime.IBL,
        start,
        max_steps=config.steady_state_max_steps,
        stop_on_convergence=True,
    )
    # the SINR floor of the expansion point can leave a few bit/s on a dead link
    gamma = sinr_all(effective_channels(channels, trace.final_v), trace.final_w, channels.noise_power_w)
    rates = np.clip(trace.final.r_tilde, 0.0, ibl_rate(gamma, config.bandwidth_hz))
    state = NetworkState(trace.final_w.copy(), trace.final_v.copy(), rates.copy(), Regime.IBL)
    return state, rates, trace


def measure_absorption(state: NetworkState, blocked: ChannelSet, config: SystemConfig) -> RateSnapshot:
    """Rates the unchanged configuration still delivers on the blocked channels."""
    gamma = sinr_all(effective_channels(blocked, state.phase_vector), state.beamformers, blocked.noise_power_w)
    return _snapshot(np.minimum(state.rates_bps, ibl_rate(gamma, config.bandwidth_hz)), config)


@dataclass
class RecoveryDecision:
    choice: Decision
    probe: AlternationTrace
    predicted_recover: float
    predicted_ignore: float
    ignore_rates_bps: np.ndarray


def _score(r_abs, rates, t_q, config: SystemConfig, capped: bool) -> float:
    r_ada = metrics.adaptation(_snapshot(rates, config), capped)
    r_rec = metrics.time_to_recovery(Timeline(T0_S, t_q, config.t0_max_recovery_s))
    return metrics.resilience(r_abs, r_ada, r_rec, config.resilience_weights)


def _ignore_rates(blocked, state, config, absorbed: RateSnapshot, ignore_branch: IgnoreBranch) -> np.ndarray:
    if ignore_branch is IgnoreBranch.STALE:
        return absorbed.achieved_bps.copy()
    start = iterate_at(blocked, config, state.beamformers, state.phase_vector, Regime.IBL)
    trace = alternate(blocked, config, Regime.IBL, start)
    return np.maximum(trace.final.r_tilde, 0.0)


def decide_recovery(
    blocked: ChannelSet,
    state: NetworkState,
    config: SystemConfig,
    absorbed: RateSnapshot | None = None,
    *,
    ignore_branch: IgnoreBranch = IgnoreBranch.STALE,
    capped: bool = True,
    omega: float | None = None,
) -> RecoveryDecision:
    """Short FBL probe, then pick the branch with the higher predicted resilience.

    Ties go to recovery.
    """
    if absorbed is None:
        absorbed = measure_absorption(state, blocked, config)
    r_abs = metrics.absorption(absorbed, capped)
    start = iterate_at(blocked, config, state.beamformers, state.phase_vector, Regime.FBL, omega)
    probe = alternate(blocked, config, Regime.FBL, start, omega=omega, max_steps=config.probe_steps)
    t_probe = T0_S + probe.n_steps * config.per_subproblem_time_s
    recover = _score(r_abs, probe.rates_at(probe.n_steps), t_probe, config, capped)
    ignore_rates = _ignore_rates(blocked, state, config, absorbed, ignore_branch)
    ignore = _score(r_abs, ignore_rates, T0_S, config, capped)
    choice = Decision.RECOVER if recover >= ignore else Decision.IGNORE
    return RecoveryDecision(choice, probe, recover, ignore, ignore_rates)


@dataclass
class PreparedEpisode:
    """Everything before the disruption response; independent of the blocklength."""

    channels: ChannelSet
    blocked: ChannelSet | None
    state: NetworkState
    steady_rates: np.ndarray
    steady_trace: AlternationTrace
    absorbed: RateSnapshot


def prepare_episode(config: SystemConfig, rng: np.random.Generator | None = None, blockage: bool = True) -> PreparedEpisode:
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    topology = generate_topology(config, rng)
    channels = generate_channels(topology, config, rng)
    (init_rng,) = rng.spawn(1)
    state, rates, trace = run_steady_state(channels, config, init_rng)
    if blockage:
        blocked = apply_blockage(channels)
        absorbed = measure_absorption(state, blocked, config)
    else:
        blocked = None
        absorbed = _snapshot(rates, config)
    return PreparedEpisode(channels, blocked, state, rates, trace, absorbed)


def finish_episode(
    prep: PreparedEpisode,
    config: SystemConfig,
    *,
    ignore_branch: IgnoreBranch = IgnoreBranch.STALE,
    capped: bool = True,
    omega: float | None = None,
) -> EpisodeResult:
    weights = config.resilience_weights
    absorbed = prep.absorbed
    r_abs = metrics.absorption(absorbed, capped)
    common = dict(
        steady_state_rates_bps=prep.steady_rates.copy(),
        post_blockage_rates_bps=absorbed.achieved_bps.copy(),
        desired_rates_bps=config.rate_targets.copy(),
        weights=weights,
        capped=capped,
        psi_steady=prep.steady_trace.psi[-1],
        steady_trace=prep.steady_trace,
    )

    if prep.blocked is None:
        timeline = Timeline(T0_S, T0_S, config.t0_max_recovery_s)
        r_ada = metrics.adaptation(absorbed, capped)
        r_rec = metrics.time_to_recovery(timeline)
        return EpisodeResult(
            recovered_rates_bps=absorbed.achieved_bps.copy(),
            decision=Decision.IGNORE,
            r_abs=r_abs,
            r_ada=r_ada,
            r_rec=r_rec,
            r=metrics.resilience(r_abs, r_ada, r_rec, weights),
            timeline=timeline,
            traces=[],
            psi_final=metrics.adaptation_gap(absorbed),
            **common,
        )

    decision = decide_recovery(
        prep.blocked, prep.state, config, absorbed, ignore_branch=ignore_branch, capped=capped, omega=omega
    )
    probe = decision.probe
    status = "ok"
    if decision.choice is Decision.IGNORE:
        timeline = Timeline(T0_S, T0_S, config.t0_max_recovery_s)
        recovered = decision.ignore_rates_bps
        traces = [probe]
        steps = probe.n_steps
        if probe.failure:
            status = f"probe_failure: {probe.failure}"
    else:
        full = probe
        if probe.failure is None:
            rest = alternate(
                prep.blocked,
                config,
                Regime.FBL,
                probe.final,
                omega=omega,
                elapsed_s=probe.n_steps * config.per_subproblem_time_s,
                first_step=probe.n_steps + 1,
            )
            full = probe.extend(rest)
        if full.failure:
            status = f"solver_failure: {full.failure}"
        z_star = metrics.recovery_step(full.psi)
        timeline = Timeline(T0_S, T0_S + z_star * config.per_subproblem_time_s, config.t0_max_recovery_s)
        recovered = full.rates_at(z_star)
        traces = [full]
        steps = full.n_steps

    snapshot = _snapshot(recovered, config)
    r_ada = metrics.adaptation(snapshot, capped)
    r_rec = 1.0 if decision.choice is Decision.IGNORE else metrics.time_to_recovery(timeline)
    return EpisodeResult(
        recovered_rates_bps=snapshot.achieved_bps.copy(),
        decision=decision.choice,
        r_abs=r_abs,
        r_ada=r_ada,
        r_rec=r_rec,
        r=metrics.resilience(r_abs, r_ada, r_rec, weights),
        timeline=timeline,
        traces=traces,
        psi_final=metrics.adaptation_gap(snapshot),
        steps=steps,
        status=status,
        blocked_link=tuple(sorted(prep.blocked.blocked_links))[0],
        **common,
    )


def _failed(config: SystemConfig, exc: Exception) -> EpisodeResult:
    nan = np.full(config.n_users, np.nan)
    return EpisodeResult(
        steady_state_rates_bps=nan,
        post_blockage_rates_bps=nan,
        recovered_rates_bps=nan,
        desired_rates_bps=config.rate_targets.copy(),
        decision=Decision.IGNORE,
        r_abs=math.nan,
        r_ada=math.nan,
        r_rec=math.nan,
        r=math.nan,
        timeline=Timeline(T0_S, T0_S, config.t0_max_recovery_s),
        weights=config.resilience_weights,
        status=f"failed: {type(exc).__name__}: {exc}",
    )


def run_episode(
    config: SystemConfig,
    rng: np.random.Generator | None = None,
    *,
    blockage: bool = True,
    ignore_branch: IgnoreBranch = IgnoreBranch.STALE,
    capped: bool = True,
    omega: float | None = None,
) -> EpisodeResult:
    """Topology and channels -> IBL steady state -> blockage -> decision -> score.

    Stage errors do not propagate: the result comes back with a
    ``failed: ...`` status and NaN metrics.
    """
    try:
        prep = prepare_episode(config, rng, blockage)
        return finish_episode(prep, config, ignore_branch=ignore_branch, capped=capped, omega=omega)
    except Exception as exc:  # noqa: BLE001 - recorded, never dropped
        return _failed(config, exc)


# ---------------------------------------------------------------- sweeps

SWEEP_COLUMNS = ("eta", "m", "seed", "decision", "r_abs", "r_ada", "r_rec", "r", "psi_final", "steps", "status")
SUMMARY_COLUMNS = (
    "eta",
    "m",
    "n_ok",
    "n_failed",
    "r_median",
    "r_q25",
    "r_q75",
    "r_ada_median",
    "r_ada_q25",
    "r_ada_q75",
    "r_abs_median",
    "recover_fraction",
)


@dataclass
class SweepTable:
    rows: list  # dicts keyed by SWEEP_COLUMNS, in (eta, m, seed) grid order
    eta_grid: tuple
    m_grid: tuple
    seeds: tuple

    def cells(self, eta, m) -> list:
        return [row for row in self.rows if row["eta"] == eta and row["m"] == m]

    def summary(self) -> list:
        out = []
        for eta in self.eta_grid:
            for m in self.m_grid:
                cells = self.cells(eta, m)
                ok = [c for c in cells if not str(c["status"]).startswith("failed")]
                entry = {"eta": eta, "m": m, "n_ok": len(ok), "n_failed": len(cells) - len(ok)}
                for key in ("r", "r_ada"):
                    values = np.array([c[key] for c in ok], dtype=float)
                    q25, med, q75 = np.percentile(values, [25, 50, 75]) if values.size else (math.nan,) * 3
                    entry.update({f"{key}_median": med, f"{key}_q25": q25, f"{key}_q75": q75})
                abs_values = np.array([c["r_abs"] for c in ok], dtype=float)
                entry["r_abs_median"] = float(np.median(abs_values)) if abs_values.size else math.nan
                entry["recover_fraction"] = (
                    sum(c["decision"] == Decision.RECOVER.value for c in ok) / len(ok) if ok else math.nan
                )
                out.append(entry)
        return out

    def median(self, key: str, m) -> np.ndarray:
        """Median of ``key`` over seeds along the eta grid for one RIS size."""
        col = {"r": "r_median", "r_ada": "r_ada_median"}[key]
        return np.array([e[col] for e in self.summary() if e["m"] == m])


def threshold_eta(etas, medians, level: float = 0.99):
    """First grid blocklength whose median exceeds ``level``; None if never."""
    for eta, value in zip(etas, medians):
        if value > level:
            return eta
    return None


def _row(eta, m, seed, result: EpisodeResult) -> dict:
    return {
        "eta": eta,
        "m": m,
        "seed": seed,
        "decision": result.decision.value,
        "r_abs": result.r_abs,
        "r_ada": result.r_ada,
        "r_rec": result.r_rec,
        "r": result.r,
        "psi_final": result.psi_final,
        "steps": result.steps,
        "status": result.status,
    }


def _sweep_group(args) -> list:
    """All blocklengths for one (M, seed): the steady state is shared."""
    config, eta_grid, m, seed, options = args
    cell_config = replace(config, n_ris_elements=m, rng_seed=seed)
    out = []
    try:
        prep = prepare_episode(cell_config, np.random.default_rng(seed), options.get("blockage", True))
    except Exception as exc:  # noqa: BLE001
        return [(eta, _failed(cell_config, exc)) for eta in eta_grid]
    for eta in eta_grid:
        try:
            eta_config = replace(cell_config, blocklength=eta)
            result = finish_episode(
                prep,
                eta_config,
                ignore_branch=options.get("ignore_branch", IgnoreBranch.STALE),
                capped=options.get("capped", True),
            )
        except Exception as exc:  # noqa: BLE001
            result = _failed(cell_config, exc)
        out.append((eta, result))
    return out


def sweep(
    config: SystemConfig,
    eta_grid,
    m_grid,
    seeds,
    *,
    jobs: int = 1,
    blockage: bool = True,
    ignore_branch: IgnoreBranch = IgnoreBranch.STALE,
    capped: bool = True,
) -> SweepTable:
    """Episodes over the (eta, M, seed) grid; rows come back in grid order.

    Each episode with seed s matches ``run_episode(replace(config,
    n_ris_elements=M, rng_seed=s, blocklength=eta), default_rng(s))``.
    """
    eta_grid, m_grid, seeds = tuple(eta_grid), tuple(m_grid), tuple(seeds)
    if not (eta_grid and m_grid and seeds):
        raise ValueError("sweep grids must be non-empty")
    options = {"blockage": blockage, "ignore_branch": ignore_branch, "capped": capped}
    tasks = [(config, eta_grid, m, seed, options) for m in m_grid for seed in seeds]
    jobs = max(1, min(jobs or os.cpu_count() or 1, len(tasks)))
    if jobs == 1:
        groups = [_sweep_group(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            groups = list(pool.map(_sweep_group, tasks))
    results = {}
    for (_, _, m, seed, _), group in zip(tasks, groups):
        for eta, result in group:
            results[(eta, m, seed)] = result
    rows = [_row(eta, m, seed, results[(eta, m, seed)]) for eta in eta_grid for m in m_grid for seed in seeds]
    return SweepTable(rows, eta_grid, m_grid, seeds)
