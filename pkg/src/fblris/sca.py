"""Convexified beamforming / phase-shift subproblems and their alternation.

Both subproblems minimize the adaptation gap over the slack-variable form of
the rate constraint. Internally every program works in normalized units:
channels are scaled by sqrt(P_ref)/sigma so the noise power is one and
beamformers are measured in units of sqrt(P_ref); rates are measured in
units of each user's target.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import conic
from .conic import ConicProgram, LinearIneq, ProgramBuilder, SecondOrderCone, complex_rows
from .fbl import FblParams, dispersion
from .metrics import convergence_step, gap_from_ratios
from .model import ChannelSet, Regime, SystemConfig, effective_channels, per_ap_power, sinr_all

Q_FLOOR = 1e-6
REJECTED = "rejected"


class Kind(str, enum.Enum):
    BEAMFORMING = "beamforming"
    PHASE = "phase"


@dataclass
class Iterate:
    """Expansion point of the convex approximations (physical units)."""

    w_tilde: np.ndarray  # (N*L, K)
    v_tilde: np.ndarray  # (M,)
    r_tilde: np.ndarray  # (K,) bit/s, may be negative in the FBL regime
    q_tilde: np.ndarray  # (K,)
    u_tilde: np.ndarray  # (K,)

    def copy(self) -> "Iterate":
        return Iterate(*(np.array(a, copy=True) for a in (self.w_tilde, self.v_tilde, self.r_tilde, self.q_tilde, self.u_tilde)))


def rate_penalty(config: SystemConfig, regime: Regime, omega: float | None = None) -> float:
    """Omega / sqrt(eta) for the FBL regime, 0 for IBL."""
    if regime is Regime.IBL:
        return 0.0
    if omega is None:
        omega = FblParams(config.blocklength, config.bler, config.bandwidth_hz).omega
    return omega / math.sqrt(config.blocklength)


def rate_bound(q, u, bandwidth_hz: float, penalty: float):
    """B * (log2(1 + q) - penalty * u); unclamped."""
    q = np.asarray(q, dtype=float)
    return bandwidth_hz * (np.log1p(q) / math.log(2.0) - penalty * np.asarray(u, dtype=float))


def psi_of(rates_bps, config: SystemConfig) -> float:
    return gap_from_ratios(np.asarray(rates_bps) / config.rate_targets)


def matched_filter(heff: np.ndarray, n_aps: int, ap_power_w: np.ndarray) -> np.ndarray:
    """Per-AP matched filters with every AP's power split evenly across users."""
    nl, k = heff.shape
    l = nl // n_aps
    w = np.zeros((nl, k), dtype=complex)
    for n in range(n_aps):
        rows = slice(n * l, (n + 1) * l)
        for user in range(k):
            block = heff[rows, user]
            norm = np.linalg.norm(block)
            direction = block / norm if norm > 0 else np.eye(l)[0]
            w[rows, user] = math.sqrt(ap_power_w[n] / k) * direction
    return w


def iterate_at(
    channels: ChannelSet,
    config: SystemConfig,
    w: np.ndarray,
    v: np.ndarray,
    regime: Regime = Regime.IBL,
    omega: float | None = None,
) -> Iterate:
    """Feasible expansion point at fixed (w, v): q = SINR, u = sqrt(V(q)), r = bound."""
    gamma = sinr_all(effective_channels(channels, v), w, channels.noise_power_w)
    q = np.maximum(gamma, Q_FLOOR)
    u = np.sqrt(dispersion(q))
    r = rate_bound(q, u, config.bandwidth_hz, rate_penalty(config, regime, omega))
    return Iterate(w.copy(), v.copy(), r, q, u)


def initialize_iterate(
    channels: ChannelSet,
    config: SystemConfig,
    rng: np.random.Generator | None = None,
    regime: Regime = Regime.IBL,
    omega: float | None = None,
) -> Iterate:
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    v = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, channels.n_ris_elements))
    heff = effective_channels(channels, v)
    w = matched_filter(heff, channels.n_aps, config.ap_power_w)
    return iterate_at(channels, config, w, v, regime, omega)


@dataclass(frozen=True)
class AffineFunction:
    """value + slope * (x - point)."""

    point: float
    value: float
    slope: float

    def __call__(self, x):
        return self.value + self.slope * (np.asarray(x, dtype=float) - self.point)


def linearize_dispersion(q_tilde: float) -> AffineFunction:
    """Tangent of sqrt(V(q)) at q_tilde; an upper bound since sqrt(V) is concave."""
    if not q_tilde > 0:
        raise ValueError("tangent of sqrt(V) is singular at q = 0")
    root = math.sqrt(-math.expm1(-2.0 * math.log1p(q_tilde)))
    slope = (1.0 + q_tilde) ** -3 / root
    return AffineFunction(q_tilde, root, slope)


# ---------------------------------------------------------------- scaling


@dataclass(frozen=True)
class _Scale:
    w: float  # beamformer unit, sqrt(W)
    h: float  # channel multiplier, w / sigma

    @classmethod
    def of(cls, channels: ChannelSet, config: SystemConfig) -> "_Scale":
        w = math.sqrt(float(np.max(config.ap_power_w)))
        return cls(w, w / math.sqrt(channels.noise_power_w))


# ---------------------------------------------------------------- SINR blocks


@dataclass
class SinrBlock:
    """Linearized SINR constraint of one user, in normalized units.

    ``residual(x, q) = interference(x) + 1 + curv * q - offset - lin(x)``
    and the block holds when the residual is <= 0.
    """

    user: int
    offset: float
    curv: float
    lin: callable
    interference: callable

    def residual(self, x, q: float) -> float:
        return float(self.interference(x) + 1.0 + self.curv * q - self.offset - self.lin(x))


def linearize_sinr_beamforming(iterate: Iterate, channels: ChannelSet, k: int, scale: _Scale | None = None) -> SinrBlock:
    """Block over (w, q_k) in normalized units (w / scale.w, noise 1).

    sum_{i!=k} |a^H w_i|^2 + 1 + |a^H w~_k|^2 q / q~^2 - 2 Re{w~_k^H a a^H w_k} / q~ <= 0
    with a the (scaled) effective channel of user k at the fixed phases.
    """
    if scale is None:
        scale = _Scale(1.0, 1.0 / math.sqrt(channels.noise_power_w))
    heff = effective_channels(channels, iterate.v_tilde) * scale.h
    a = heff[:, k]
    w_tilde = iterate.w_tilde / scale.w
    q_tilde = float(iterate.q_tilde[k])
    zeta = np.vdot(a, w_tilde[:, k])
    others = [i for i in range(w_tilde.shape[1]) if i != k]

    def interference(w):
        return float(sum(abs(np.vdot(a, w[:, i])) ** 2 for i in others))

    def lin(w):
        return 2.0 * float(np.real(np.conj(zeta) * np.vdot(a, w[:, k]))) / q_tilde

    return SinrBlock(k, 0.0, abs(zeta) ** 2 / q_tilde**2, lin, interference)


def _phase_terms(w: np.ndarray, channels: ChannelSet, v_tilde: np.ndarray, k: int, scale: _Scale):
    """zeta~_{k,i} = w_i^H a_k(v~) and d_{k,i} = (w_i^H G_k)^T for all i."""
    h_k = channels.stacked_direct(k) * scale.h
    g_k = channels.reflected(k) * scale.h
    wn = w / scale.w
    d = (wn.conj().T @ g_k)  # (K, M): row i is w_i^H G_k
    zeta = wn.conj().T @ h_k + d @ v_tilde
    return zeta, d


def linearize_sinr_phase(iterate: Iterate, channels: ChannelSet, w: np.ndarray, k: int, scale: _Scale | None = None) -> SinrBlock:
    """Block over (v, q_k) with beamformers fixed, normalized units.

    With zeta_{k,i}(v) = w_i^H (h_k + G_k v) (affine in v):
    sum_{i!=k} |zeta_{k,i}(v)|^2 + 1 - |zeta~|^2/q~ - 2 Re{zeta~^* d_kk^T (v - v~)}/q~
        + |zeta~|^2 (q - q~)/q~^2 <= 0
    """
    if scale is None:
        scale = _Scale(1.0, 1.0 / math.sqrt(channels.noise_power_w))
    v_tilde = iterate.v_tilde
    q_tilde = float(iterate.q_tilde[k])
    zeta, d = _phase_terms(w, channels, v_tilde, k, scale)
    others = [i for i in range(w.shape[1]) if i != k]
    zk = zeta[k]

    def interference(v):
        dv = v - v_tilde
        return float(sum(abs(zeta[i] + d[i] @ dv) ** 2 for i in others))

    def lin(v):
        return 2.0 * float(np.real(np.conj(zk) * (d[k] @ (v - v_tilde)))) / q_tilde

    return SinrBlock(k, 2.0 * abs(zk) ** 2 / q_tilde, abs(zk) ** 2 / q_tilde**2, lin, interference)


# ---------------------------------------------------------------- penalty


@dataclass(frozen=True)
class LinearPenalty:
    """Phi(v) = alpha * sum Re{2 v~_m^* v_m - |v~_m|^2}."""

    v_tilde: np.ndarray
    alpha: float

    def __call__(self, v) -> float:
        v = np.asarray(v, dtype=complex)
        return float(self.alpha * np.sum(np.real(2.0 * np.conj(self.v_tilde) * v) - np.abs(self.v_tilde) ** 2))

    @property
    def coefficients(self) -> np.ndarray:
        """c with Phi(v) = Re{c^T v} + constant."""
        return 2.0 * self.alpha * np.conj(self.v_tilde)

    @property
    def constant(self) -> float:
        return float(-self.alpha * np.sum(np.abs(self.v_tilde) ** 2))


def penalty_schedule(config: SystemConfig, phase_index: int) -> float:
    """Penalty weight of the ``phase_index``-th phase step (0-based) of a run.

    Starts at ``penalty_initial_weight`` and grows geometrically up to
    ``penalty_weight``. A large weight pins the phases to the expansion
    point, so early steps use a small one to let them move.
    """
    alpha0 = min(config.penalty_initial_weight, config.penalty_weight)
    return float(min(config.penalty_weight, alpha0 * config.penalty_growth ** max(phase_index, 0)))


def unit_modulus_penalty(v_tilde: np.ndarray, alpha_v: float) -> LinearPenalty:
    return LinearPenalty(np.asarray(v_tilde, dtype=complex).copy(), float(alpha_v))


def project_unit_modulus(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    mag = np.abs(v)
    out = np.ones_like(v)
    nz = mag > 0
    out[nz] = v[nz] / mag[nz]
    return out


# ---------------------------------------------------------------- programs


@dataclass
class Subproblem:
    """A built convex subproblem and what is needed to read its answer."""

    kind: Kind
    program: ConicProgram
    scale: _Scale
    iterate: Iterate
    w_fixed: np.ndarray | None = None


def q_scales(iterate: Iterate) -> np.ndarray:
    """Per-user unit of the q variable inside the programs.

    SINRs span many decades; the programs hold q / max(q~, 1) so every
    variable stays O(1) for the solver.
    """
    return np.maximum(np.asarray(iterate.q_tilde, dtype=float), 1.0)


def _common_rate_blocks(builder: ProgramBuilder, iterate: Iterate, config: SystemConfig, penalty: float):
    """Variables r, q, u, gap epigraph e and the rate / dispersion blocks.

    The q variable is stored in units of :func:`q_scales`.
    """
    qs = q_scales(iterate)
    k = len(iterate.q_tilde)
    r = builder.add_real("r", k)
    q = builder.add_real("q", k, lower=0.0)
    u = builder.add_real("u", k, lower=0.0)
    e = builder.add_real("e", k)
    builder.add_objective(builder.row({e.index(i): 1.0 for i in range(k)}))
    targets = config.rate_targets
    for i in range(k):
        # e_i >= |r_i - 1| (r in units of the user's target)
        builder.add(LinearIneq(builder.row({r.index(i): 1.0, e.index(i): -1.0})[None, :], np.array([1.0]), f"gap+{i}"))
        builder.add(LinearIneq(builder.row({r.index(i): -1.0, e.index(i): -1.0})[None, :], np.array([-1.0]), f"gap-{i}"))
        conic.log_rate_epigraph(
            builder,
            q.index(i),
            r.index(i),
            u.index(i),
            config.bandwidth_hz / targets[i],
            penalty,
            name=f"t{i}",
            q_scale=qs[i],
        )
        tangent = linearize_dispersion(max(float(iterate.q_tilde[i]), Q_FLOOR))
        # u_i >= value + slope * (q_i - point)
        builder.add(
            LinearIneq(
                builder.row({u.index(i): -1.0, q.index(i): tangent.slope * qs[i]})[None, :],
                np.array([tangent.slope * tangent.point - tangent.value]),
                f"disp{i}",
            )
        )
    return r, q, u


def _sinr_soc(builder: ProgramBuilder, interference_rows, interference_const, tangent_row, tangent_const, label):
    """||x||^2 <= T as ||(2x, T - 1)|| <= T + 1 with x affine and T affine.

    The block is first rescaled (x by sqrt(s), T by s) so its largest
    coefficient is at most one; a tiny expansion point otherwise produces
    rows the interior-point solver cannot handle.
    """
    rows = np.asarray(interference_rows, dtype=float).reshape(-1, builder.n)
    consts = np.asarray(interference_const, dtype=float).reshape(-1)
    size = max(
        1.0,
        float(np.max(np.abs(tangent_row))),
        abs(float(tangent_const)),
        float(np.max(rows**2, initial=0.0)),
        float(np.max(consts**2, initial=0.0)),
    )
    s = 1.0 / size
    rows, consts = math.sqrt(s) * rows, math.sqrt(s) * consts
    tangent_row, tangent_const = s * tangent_row, s * tangent_const
    A = np.vstack([2.0 * rows, tangent_row[None, :]])
    b = np.concatenate([2.0 * consts, [tangent_const - 1.0]])
    builder.add(SecondOrderCone(A, b, tangent_row, tangent_const + 1.0, label))


def build_beamforming_subproblem(
    iterate: Iterate,
    channels: ChannelSet,
    config: SystemConfig,
    regime: Regime,
    omega: float | None = None,
) -> Subproblem:
    scale = _Scale.of(channels, config)
    nl, k = iterate.w_tilde.shape
    n_aps, l = channels.n_aps, channels.antennas_per_ap
    builder = ProgramBuilder()
    w = builder.add_complex("w", nl * k)  # column-major: entry (j, user) at user * nl + j
    r, q, u = _common_rate_blocks(builder, iterate, config, rate_penalty(config, regime, omega))
    n = builder.n

    def w_cols(user):
        return slice(w.start + 2 * user * nl, w.start + 2 * (user + 1) * nl)

    for ap in range(n_aps):
        sel = []
        for user in range(k):
            for j in range(ap * l, (ap + 1) * l):
                sel += [w.re_index(user * nl + j), w.im_index(user * nl + j)]
        A = np.zeros((len(sel), n))
        A[np.arange(len(sel)), sel] = 1.0
        radius = math.sqrt(config.ap_power_w[ap]) / scale.w
        builder.add(SecondOrderCone(A, np.zeros(len(sel)), np.zeros(n), radius, f"power{ap}"))

    heff = effective_channels(channels, iterate.v_tilde) * scale.h
    w_tilde = iterate.w_tilde / scale.w
    for user in range(k):
        a = heff[:, user]
        q_t = max(float(iterate.q_tilde[user]), Q_FLOOR)
        zeta = np.vdot(a, w_tilde[:, user])
        rows = []
        for i in range(k):
            if i == user:
                continue
            re, im = complex_rows(np.conj(a))
            for part in (re, im):
                row = np.zeros(n)
                row[w_cols(i)] = part
                rows.append(row)
        tangent = np.zeros(n)
        tangent[w_cols(user)] = 2.0 / q_t * complex_rows(np.conj(zeta) * np.conj(a))[0]
        tangent[q.index(user)] = -abs(zeta) ** 2 / q_t**2 * q_scales(iterate)[user]
        _sinr_soc(builder, rows, np.zeros(len(rows)), tangent, -1.0, f"sinr{user}")

    return Subproblem(Kind.BEAMFORMING, builder.build(), scale, iterate)


def build_phase_subproblem(
    iterate: Iterate,
    channels: ChannelSet,
    config: SystemConfig,
    regime: Regime,
    omega: float | None = None,
    alpha: float | None = None,
) -> Subproblem:
    """Phase-shift program; the phase variable is the step dv = v - v~.

    The objective is Psi - Phi(v~ + dv) with each |v~_m + dv_m| <= 1;
    ``alpha`` defaults to ``config.penalty_weight``.
    """
    scale = _Scale.of(channels, config)
    m = len(iterate.v_tilde)
    k = iterate.w_tilde.shape[1]
    builder = ProgramBuilder()
    dv = builder.add_complex("dv", m)
    r, q, u = _common_rate_blocks(builder, iterate, config, rate_penalty(config, regime, omega))
    n = builder.n
    cols = slice(dv.start, dv.start + 2 * m)

    penalty = unit_modulus_penalty(iterate.v_tilde, config.penalty_weight if alpha is None else alpha)
    obj = np.zeros(n)
    obj[cols] = -complex_rows(penalty.coefficients)[0]
    # -Phi(v~ + dv) = -Re{c^T dv} - Re{c^T v~} - const
    builder.add_objective(obj, -(float(np.real(penalty.coefficients @ iterate.v_tilde)) + penalty.constant))

    for j in range(m):
        A = np.zeros((2, n))
        A[0, dv.re_index(j)] = 1.0
        A[1, dv.im_index(j)] = 1.0
        vt = iterate.v_tilde[j]
        builder.add(SecondOrderCone(A, np.array([vt.real, vt.imag]), np.zeros(n), 1.0, f"disk{j}"))

    w_fixed = iterate.w_tilde
    for user in range(k):
        q_t = max(float(iterate.q_tilde[user]), Q_FLOOR)
        zeta, d = _phase_terms(w_fixed, channels, iterate.v_tilde, user, scale)
        rows, consts = [], []
        for i in range(k):
            if i == user:
                continue
            re, im = complex_rows(d[i])
            for part, c0 in ((re, zeta[i].real), (im, zeta[i].imag)):
                row = np.zeros(n)
                row[cols] = part
                rows.append(row)
                consts.append(c0)
        zk = zeta[user]
        tangent = np.zeros(n)
        tangent[cols] = 2.0 / q_t * complex_rows(np.conj(zk) * d[user])[0]
        tangent[q.index(user)] = -abs(zk) ** 2 / q_t**2 * q_scales(iterate)[user]
        const = 2.0 * abs(zk) ** 2 / q_t - 1.0
        _sinr_soc(builder, rows, np.array(consts), tangent, const, f"sinr{user}")

    return Subproblem(Kind.PHASE, builder.build(), scale, iterate, w_fixed)


def read_solution(sub: Subproblem, x: np.ndarray, config: SystemConfig) -> Iterate:
    """Solver vector -> candidate iterate in physical units (not yet repaired)."""
    vm = sub.program.variables
    nl, k = sub.iterate.w_tilde.shape
    if sub.kind is Kind.BEAMFORMING:
        w = vm.extract(x, "w").reshape(k, nl).T * sub.scale.w
        v = sub.iterate.v_tilde.copy()
    else:
        w = sub.w_fixed.copy()
        v = sub.iterate.v_tilde + vm.extract(x, "dv")
    r = vm.extract(x, "r") * config.rate_targets
    return Iterate(w, v, r, vm.extract(x, "q") * q_scales(sub.iterate), vm.extract(x, "u"))


def settle(
    candidate: Iterate,
    channels: ChannelSet,
    config: SystemConfig,
    regime: Regime,
    omega: float | None = None,
) -> Iterate:
    """Make a solver answer an exact expansion point.

    Beamformers are scaled back into the power budget, phases projected to
    unit modulus, and (q, u, r) tightened so that q <= SINR, u >= sqrt(V(q))
    and r <= rate bound hold exactly. The changes are at solver-tolerance
    level for a well-solved subproblem.
    """
    w = candidate.w_tilde.copy()
    power = per_ap_power(w, channels.n_aps)
    l = channels.antennas_per_ap
    for n, (p, cap) in enumerate(zip(power, config.ap_power_w)):
        if p > cap:
            w[n * l : (n + 1) * l] *= math.sqrt(cap / p)
    v = project_unit_modulus(candidate.v_tilde)
    gamma = sinr_all(effective_channels(channels, v), w, channels.noise_power_w)
    q = np.maximum(np.minimum(candidate.q_tilde, gamma), Q_FLOOR)
    u = np.maximum(candidate.u_tilde, np.sqrt(dispersion(q)))
    bound = rate_bound(q, u, config.bandwidth_hz, rate_penalty(config, regime, omega))
    r = np.minimum(candidate.r_tilde, bound)
    return Iterate(w, v, r, q, u)


# ---------------------------------------------------------------- alternation


@dataclass
class StepRecord:
    z: int
    kind: Kind
    psi: float
    status: str
    time_s: float
    rates_bps: np.ndarray
    solve_time_s: float = 0.0


@dataclass
class AlternationTrace:
    regime: Regime
    psi_start: float
    start: Iterate
    steps: list = field(default_factory=list)
    final: Iterate | None = None
    failure: str | None = None
    elapsed_start_s: float = 0.0

    @property
    def psi(self) -> np.ndarray:
        """Gap at the start followed by the gap after every accepted step."""
        return np.array([self.psi_start] + [s.psi for s in self.steps])

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def final_w(self) -> np.ndarray:
        return self.final.w_tilde

    @property
    def final_v(self) -> np.ndarray:
        return project_unit_modulus(self.final.v_tilde)

    def rates_at(self, step: int) -> np.ndarray:
        """Delivered rates after ``step`` accepted steps (0 = start point)."""
        r = self.start.r_tilde if step == 0 else self.steps[step - 1].rates_bps
        return np.maximum(r, 0.0)

    def extend(self, other: "AlternationTrace") -> "AlternationTrace":
        """Concatenate a continuation run that started from this trace's end."""
        out = replace(self, steps=self.steps + other.steps, final=other.final, failure=other.failure)
        return out


def alternate(
    channels: ChannelSet,
    config: SystemConfig,
    regime: Regime,
    start: Iterate,
    *,
    omega: float | None = None,
    max_steps: int | None = None,
    elapsed_s: float = 0.0,
    first_step: int = 1,
    stop_on_convergence: bool = False,
) -> AlternationTrace:
    """One-step-per-subproblem alternation within the coherence-time budget.

    Odd global step numbers solve the beamforming program, even ones the
    phase program. Each subproblem costs ``per_subproblem_time_s``; a step
    is only taken while the elapsed time plus that cost stays within
    ``coherence_time_s``. ``elapsed_s``/``first_step`` let a run continue
    where an earlier one stopped.
    """
    t_calc = config.per_subproblem_time_s
    current = start.copy()
    trace = AlternationTrace(regime, psi_of(current.r_tilde, config), start.copy(), final=current, elapsed_start_s=elapsed_s)
    elapsed = elapsed_s
    z = first_step
    taken = 0
    while elapsed + t_calc <= config.coherence_time_s + 1e-12:
        if max_steps is not None and taken >= max_steps:
            break
        if z % 2 == 1:
            kind = Kind.BEAMFORMING
            sub = build_beamforming_subproblem(current, channels, config, regime, omega)
        else:
            kind = Kind.PHASE
            alpha = penalty_schedule(config, z // 2 - 1)
            sub = build_phase_subproblem(current, channels, config, regime, omega, alpha)
        solution = conic.solve(sub.program, config.solver_tol)
        usable = solution.ok or (solution.best_iterate and np.all(np.isfinite(solution.primal)))
        if not usable:
            trace.failure = f"step {z} ({kind.value}): {solution.status.value}"
            break
        candidate = settle(read_solution(sub, solution.primal, config), channels, config, regime, omega)
        status = solution.status.value
        psi_before = psi_of(current.r_tilde, config)
        psi = psi_of(candidate.r_tilde, config)
        # Projection onto |v_m| = 1 can lose more than a phase step gained,
        # and an uncertified solver answer carries no descent guarantee.
        if (kind is Kind.PHASE or not solution.ok) and psi > psi_before:
            status = REJECTED
        else:
            current = candidate
        elapsed += t_calc
        trace.steps.append(
            StepRecord(z, kind, psi_of(current.r_tilde, config), status, elapsed, current.r_tilde.copy(), solution.solve_time_s)
        )
        trace.final = current
        z += 1
        taken += 1
        if stop_on_convergence and convergence_step(trace.psi) is not None:
            break
    return trace


TRACE_COLUMNS = ("z", "kind", "psi", "status", "time_s")


def trace_to_csv(trace: AlternationTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for s in trace.steps:
        writer.writerow([s.z, s.kind.value, f"{s.psi:.12g}", s.status, f"{s.time_s:.6g}"])
    return buf.getvalue()
