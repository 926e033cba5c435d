"""Scenario geometry, channel realizations, effective channels and SINR."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .metrics import WeightError, check_weights


class ConfigError(ValueError):
    """A SystemConfig field is out of range; ``field`` names it."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class Regime(str, enum.Enum):
    IBL = "IBL"
    FBL = "FBL"


def dbm_to_w(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def w_to_dbm(watts: float) -> float:
    return 10.0 * math.log10(watts) + 30.0


@dataclass(frozen=True)
class SystemConfig:
    """All scenario constants, in linear SI units.

    The defaults reproduce the evaluation setup (3 APs with 8 antennas, 6
    users, 1000-element RIS, 10 MHz, -100 dBm noise, 32 dBm per AP, 37 Mbps
    per user). Values the source leaves open (blocklength, coherence time,
    subproblem time, path loss, heights) carry documented defaults.
    """

    n_aps: int = 3
    antennas_per_ap: int = 8
    n_users: int = 6
    n_ris_elements: int = 1000
    bandwidth_hz: float = 10e6
    noise_power_w: float = dbm_to_w(-100.0)
    max_tx_power_w: tuple = (dbm_to_w(32.0),)
    carrier_wavelength_m: float = 0.1
    element_spacing_m: float = 0.025
    area_half_extent_m: float = 500.0
    shadowing_std_db: float = 8.0
    bler: float = 1e-5
    blocklength: int = 500
    rate_targets_bps: tuple = (37e6,)
    resilience_weights: tuple = (0.1, 0.5, 0.4)
    t0_max_recovery_s: float = 5.0
    coherence_time_s: float = 0.5
    per_subproblem_time_s: float = 0.01
    penalty_weight: float = 1e3
    penalty_initial_weight: float = 1e-6
    penalty_growth: float = 2.0
    rng_seed: int = 0
    # propagation details left open by the scenario description
    pathloss_ref_db: float = 30.0
    pathloss_exp_direct: float = 3.5
    pathloss_exp_ris: float = 2.2
    ap_height_m: float = 10.0
    ris_height_m: float = 5.0
    user_height_m: float = 1.5
    # optimizer plumbing
    steady_state_max_steps: int = 100
    probe_steps: int = 4
    solver_tol: float = 1e-8

    def __post_init__(self):
        def fix(name, value):
            object.__setattr__(self, name, value)

        for name in ("n_aps", "antennas_per_ap", "n_users", "n_ris_elements"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(name, f"must be an integer >= 1, got {value!r}")
            fix(name, int(value))

        power = np.atleast_1d(np.asarray(self.max_tx_power_w, dtype=float))
        if power.size == 1:
            power = np.repeat(power, self.n_aps)
        if power.size != self.n_aps:
            raise ConfigError("max_tx_power_w", f"needs 1 or {self.n_aps} entries")
        if np.any(power <= 0):
            raise ConfigError("max_tx_power_w", "must be positive")
        fix("max_tx_power_w", tuple(float(p) for p in power))

        rates = np.atleast_1d(np.asarray(self.rate_targets_bps, dtype=float))
        if rates.size == 1:
            rates = np.repeat(rates, self.n_users)
        if rates.size != self.n_users:
            raise ConfigError("rate_targets_bps", f"needs 1 or {self.n_users} entries")
        if np.any(rates <= 0):
            raise ConfigError("rate_targets_bps", "must be positive")
        fix("rate_targets_bps", tuple(float(r) for r in rates))

        try:
            fix("resilience_weights", check_weights(self.resilience_weights))
        except WeightError as exc:
            raise ConfigError("resilience_weights", str(exc)) from None

        for name in (
            "bandwidth_hz",
            "noise_power_w",
            "carrier_wavelength_m",
            "area_half_extent_m",
            "t0_max_recovery_s",
            "coherence_time_s",
            "per_subproblem_time_s",
            "solver_tol",
        ):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "must be positive")
        for name in ("element_spacing_m", "shadowing_std_db", "penalty_weight", "penalty_initial_weight"):
            if not getattr(self, name) >= 0:
                raise ConfigError(name, "must be nonnegative")
        if not self.penalty_growth >= 1.0:
            raise ConfigError("penalty_growth", "must be >= 1")
        if not 0.0 < self.bler < 0.5:
            raise ConfigError("bler", f"must lie in (0, 0.5), got {self.bler}")
        if not self.blocklength >= 1:
            raise ConfigError("blocklength", "must be >= 1")
        if self.n_aps > 4:
            raise ConfigError("n_aps", "quadrant placement supports at most 4 APs")
        if self.steady_state_max_steps < 0 or self.probe_steps < 0:
            raise ConfigError("probe_steps", "step counts must be nonnegative")
        if not 1e-10 <= self.solver_tol <= 1e-4:
            raise ConfigError("solver_tol", "must lie in [1e-10, 1e-4]")

    @property
    def ap_power_w(self) -> np.ndarray:
        return np.asarray(self.max_tx_power_w)

    @property
    def rate_targets(self) -> np.ndarray:
        return np.asarray(self.rate_targets_bps)

    @property
    def max_subproblems(self) -> int:
        """Subproblems that fit in one coherence interval."""
        return int(math.floor(self.coherence_time_s / self.per_subproblem_time_s + 1e-9))

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


@dataclass(frozen=True)
class Topology:
    ap_positions_m: np.ndarray  # (N, 3)
    user_positions_m: np.ndarray  # (K, 3)
    ris_position_m: np.ndarray  # (3,)
    ris_element_offsets_m: np.ndarray  # (M, 3)
    ap_quadrants: tuple = ()


@dataclass(frozen=True)
class ChannelSet:
    """One coherence-block channel realization.

    ``direct[n, k]`` is the L-vector from AP n to user k, ``ap_to_ris`` the
    stacked NL x M AP-RIS matrix and ``ris_to_user[k]`` the M-vector g_k.
    """

    direct: np.ndarray  # (N, K, L) complex
    ap_to_ris: np.ndarray  # (N*L, M) complex
    ris_to_user: np.ndarray  # (K, M) complex
    noise_power_w: float
    blocked_links: frozenset = field(default_factory=frozenset)

    @property
    def n_aps(self) -> int:
        return self.direct.shape[0]

    @property
    def n_users(self) -> int:
        return self.direct.shape[1]

    @property
    def antennas_per_ap(self) -> int:
        return self.direct.shape[2]

    @property
    def n_ris_elements(self) -> int:
        return self.ap_to_ris.shape[1]

    def stacked_direct(self, k: int) -> np.ndarray:
        """h_k: per-AP direct channels of user k stacked in AP order."""
        return self.direct[:, k, :].reshape(-1)

    def reflected(self, k: int) -> np.ndarray:
        """G_k = H diag(g_k)."""
        return self.ap_to_ris * self.ris_to_user[k][None, :]

    def replace(self, **changes) -> "ChannelSet":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(changes)
        return ChannelSet(**data)


@dataclass
class NetworkState:
    beamformers: np.ndarray  # (N*L, K) complex, column k is w_k
    phase_vector: np.ndarray  # (M,) complex
    rates_bps: np.ndarray  # (K,)
    regime: Regime = Regime.IBL

    def per_ap_power(self, n_aps: int) -> np.ndarray:
        return per_ap_power(self.beamformers, n_aps)


def per_ap_power(beamformers: np.ndarray, n_aps: int) -> np.ndarray:
    nl, k = beamformers.shape
    blocks = beamformers.reshape(n_aps, nl // n_aps, k)
    return np.sum(np.abs(blocks) ** 2, axis=(1, 2))


def pathloss_gain(distance_m, exponent: float, ref_db: float = 30.0):
    """Linear channel power gain of the log-distance model (1 m reference)."""
    d = np.maximum(np.asarray(distance_m, dtype=float), 1.0)
    return 10.0 ** (-(ref_db + 10.0 * exponent * np.log10(d)) / 10.0)


def ris_grid_offsets(m: int, spacing_m: float) -> np.ndarray:
    """Element offsets of a planar array in the local y-z plane.

    Elements fill a ceil(sqrt(M))-column grid row by row, so a perfect
    square M gives the full square lattice.
    """
    cols = int(math.ceil(math.sqrt(m)))
    rows = int(math.ceil(m / cols))
    idx = np.arange(m)
    col = idx % cols - (cols - 1) / 2.0
    row = idx // cols - (rows - 1) / 2.0
    return np.stack([np.zeros(m), col * spacing_m, row * spacing_m], axis=1)


def ris_correlation(offsets_m: np.ndarray, wavelength_m: float) -> np.ndarray:
    """Isotropic-scattering correlation sinc(2 * |u_m - u_l| / wavelength)."""
    diff = offsets_m[:, None, :] - offsets_m[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    return np.sinc(2.0 * dist / wavelength_m)


def psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    """Hermitian square root of a PSD matrix, negative eigenvalues clipped."""
    vals, vecs = np.linalg.eigh(matrix)
    vals = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * vals) @ vecs.conj().T


def generate_topology(config: SystemConfig, rng: np.random.Generator) -> Topology:
    a = config.area_half_extent_m
    centers = np.array([[a / 2, a / 2], [-a / 2, a / 2], [-a / 2, -a / 2], [a / 2, -a / 2]])
    quadrants = rng.choice(4, size=config.n_aps, replace=False)
    aps = np.column_stack([centers[quadrants], np.full(config.n_aps, config.ap_height_m)])

    # the occupied quadrants have equal area: pick one uniformly, then a point in it
    user_quadrant = quadrants[rng.integers(0, config.n_aps, size=config.n_users)]
    sign = np.sign(centers[user_quadrant])
    users_xy = sign * rng.uniform(0.0, a, size=(config.n_users, 2))
    users = np.column_stack([users_xy, np.full(config.n_users, config.user_height_m)])

    return Topology(
        ap_positions_m=aps,
        user_positions_m=users,
        ris_position_m=np.array([0.0, 0.0, config.ris_height_m]),
        ris_element_offsets_m=ris_grid_offsets(config.n_ris_elements, config.element_spacing_m),
        ap_quadrants=tuple(int(q) for q in quadrants),
    )


def ap_antenna_positions(ap_position: np.ndarray, n_antennas: int, wavelength_m: float) -> np.ndarray:
    """Half-wavelength ULA along x, centred on the AP."""
    x = (np.arange(n_antennas) - (n_antennas - 1) / 2.0) * wavelength_m / 2.0
    pos = np.tile(ap_position, (n_antennas, 1))
    pos[:, 0] += x
    return pos


def generate_channels(topology: Topology, config: SystemConfig, rng: np.random.Generator) -> ChannelSet:
    n, k, l, m = config.n_aps, config.n_users, config.antennas_per_ap, config.n_ris_elements
    if topology.ap_positions_m.shape[0] != n or topology.user_positions_m.shape[0] != k:
        raise ValueError("topology does not match the configured AP/user counts")
    if topology.ris_element_offsets_m.shape[0] != m:
        raise ValueError("topology does not match the configured RIS size")
    # separate streams keep the direct links identical when only M changes
    direct_rng, ris_rng = rng.spawn(2)
    lam = config.carrier_wavelength_m

    d_direct = np.linalg.norm(
        topology.ap_positions_m[:, None, :] - topology.user_positions_m[None, :, :], axis=-1
    )
    shadow_db = config.shadowing_std_db * direct_rng.standard_normal((n, k))
    beta_direct = pathloss_gain(d_direct, config.pathloss_exp_direct, config.pathloss_ref_db)
    beta_direct = beta_direct * 10.0 ** (-shadow_db / 10.0)
    fading = (direct_rng.standard_normal((n, k, l)) + 1j * direct_rng.standard_normal((n, k, l))) / math.sqrt(2.0)
    direct = np.sqrt(beta_direct)[:, :, None] * fading

    elements = topology.ris_position_m[None, :] + topology.ris_element_offsets_m
    h_blocks = []
    for ap in topology.ap_positions_m:
        antennas = ap_antenna_positions(ap, l, lam)
        dist = np.linalg.norm(antennas[:, None, :] - elements[None, :, :], axis=-1)
        gain = pathloss_gain(np.linalg.norm(ap - topology.ris_position_m), config.pathloss_exp_ris, config.pathloss_ref_db)
        h_blocks.append(np.sqrt(gain) * np.exp(-2j * np.pi * dist / lam))
    ap_to_ris = np.vstack(h_blocks)

    root = psd_sqrt(ris_correlation(topology.ris_element_offsets_m, lam))
    d_ris_user = np.linalg.norm(topology.user_positions_m - topology.ris_position_m, axis=1)
    beta_ris_user = pathloss_gain(d_ris_user, config.pathloss_exp_ris, config.pathloss_ref_db)
    e = (ris_rng.standard_normal((k, m)) + 1j * ris_rng.standard_normal((k, m))) / math.sqrt(2.0)
    ris_to_user = np.sqrt(beta_ris_user)[:, None] * (e @ root.T)

    return ChannelSet(
        direct=direct,
        ap_to_ris=ap_to_ris,
        ris_to_user=ris_to_user,
        noise_power_w=config.noise_power_w,
    )


def effective_channel(channels: ChannelSet, v: np.ndarray, k: int) -> np.ndarray:
    """h_k + G_k v, the direct plus RIS-reflected channel of user k."""
    return channels.stacked_direct(k) + channels.ap_to_ris @ (channels.ris_to_user[k] * v)


def effective_channels(channels: ChannelSet, v: np.ndarray) -> np.ndarray:
    """All effective channels as columns of an NL x K matrix."""
    direct = channels.direct.transpose(0, 2, 1).reshape(-1, channels.n_users)
    return direct + channels.ap_to_ris @ (channels.ris_to_user * v[None, :]).T


def apply_blockage(channels: ChannelSet) -> ChannelSet:
    """Zero the strongest unblocked direct AP-user link (ties: lowest (n, k))."""
    power = np.sum(np.abs(channels.direct) ** 2, axis=2)
    best = None
    for n in range(channels.n_aps):
        for k in range(channels.n_users):
            if (n, k) in channels.blocked_links:
                continue
            if best is None or power[n, k] > power[best]:
                best = (n, k)
    if best is None:
        raise ValueError("every direct link is already blocked")
    direct = channels.direct.copy()
    direct[best] = 0.0
    return channels.replace(direct=direct, blocked_links=channels.blocked_links | {best})


def sinr_all(heff: np.ndarray, beamformers: np.ndarray, noise_power_w: float) -> np.ndarray:
    """SINR of every user; heff and beamformers are NL x K."""
    gains = np.abs(heff.conj().T @ beamformers) ** 2  # [k, i] = |h_k^H w_i|^2
    signal = np.diag(gains).copy()
    interference = gains.sum(axis=1) - signal
    return signal / (interference + noise_power_w)


def sinr(channels: ChannelSet, state: NetworkState, k: int) -> float:
    heff = effective_channels(channels, state.phase_vector)
    return float(sinr_all(heff, state.beamformers, channels.noise_power_w)[k])
