import math

import numpy as np
import pytest
from conftest import draw, small_config

from fblris.model import (
    ChannelSet,
    ConfigError,
    NetworkState,
    SystemConfig,
    apply_blockage,
    dbm_to_w,
    effective_channel,
    effective_channels,
    generate_topology,
    ris_correlation,
    ris_grid_offsets,
    sinr,
    sinr_all,
    w_to_dbm,
)


def rand_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def toy_channels(n=2, k=3, l=2, m=3, seed=0, noise=0.1):
    rng = np.random.default_rng(seed)
    return ChannelSet(rand_complex(rng, n, k, l), rand_complex(rng, n * l, m), rand_complex(rng, k, m), noise)


def test_defaults_match_evaluation_setup():
    c = SystemConfig()
    assert (c.n_aps, c.antennas_per_ap, c.n_users, c.n_ris_elements) == (3, 8, 6, 1000)
    assert c.bandwidth_hz == 10e6
    assert w_to_dbm(c.noise_power_w) == pytest.approx(-100.0)
    assert np.allclose([w_to_dbm(p) for p in c.max_tx_power_w], 32.0)
    assert np.all(c.rate_targets == 37e6)
    assert c.resilience_weights == (0.1, 0.5, 0.4)
    assert c.t0_max_recovery_s == 5.0


@pytest.mark.parametrize(
    "kwargs, field",
    [
        (dict(n_aps=0), "n_aps"),
        (dict(n_aps=5), "n_aps"),
        (dict(resilience_weights=(0.1, 0.5, 0.3)), "resilience_weights"),
        (dict(bler=0.5), "bler"),
        (dict(bandwidth_hz=0.0), "bandwidth_hz"),
        (dict(max_tx_power_w=(1.0, 2.0)), "max_tx_power_w"),
        (dict(rate_targets_bps=(-1.0,)), "rate_targets_bps"),
        (dict(solver_tol=1e-2), "solver_tol"),
    ],
)
def test_config_validation_names_field(kwargs, field):
    with pytest.raises(ConfigError) as err:
        SystemConfig(**kwargs)
    assert err.value.field == field


def test_dbm_round_trip():
    assert dbm_to_w(30.0) == pytest.approx(1.0)
    assert w_to_dbm(dbm_to_w(-100.0)) == pytest.approx(-100.0)


def test_topology_quadrant_centres():
    config = SystemConfig(n_aps=3)
    top = generate_topology(config, np.random.default_rng(4))
    xy = top.ap_positions_m[:, :2]
    assert np.allclose(np.abs(xy), 250.0)
    assert len({tuple(np.sign(p)) for p in xy}) == 3
    assert np.all(np.abs(top.user_positions_m[:, :2]) <= 500.0)
    # users sit in quadrants that hold an AP
    ap_quadrants = {tuple(np.sign(p)) for p in xy}
    assert all(tuple(np.sign(u)) in ap_quadrants for u in top.user_positions_m[:, :2])
    assert np.allclose(top.ris_position_m[:2], 0.0)


def test_topology_single_ap_single_user():
    config = SystemConfig(n_aps=1, n_users=1, n_ris_elements=4)
    top = generate_topology(config, np.random.default_rng(0))
    assert np.all(np.sign(top.user_positions_m[0, :2]) == np.sign(top.ap_positions_m[0, :2]))


def test_topology_and_channels_deterministic():
    config = small_config()
    t1, c1 = draw(config, 7)
    t2, c2 = draw(config, 7)
    assert np.array_equal(t1.user_positions_m, t2.user_positions_m)
    for name in ("direct", "ap_to_ris", "ris_to_user"):
        assert getattr(c1, name).tobytes() == getattr(c2, name).tobytes()


def test_direct_channels_independent_of_ris_size():
    _, a = draw(small_config(n_ris_elements=16), 3)
    _, b = draw(small_config(n_ris_elements=64), 3)
    assert np.array_equal(a.direct, b.direct)


def test_ris_grid_is_square_lattice():
    off = ris_grid_offsets(16, 0.05)
    ys, zs = np.unique(off[:, 1]), np.unique(off[:, 2])
    assert len(ys) == len(zs) == 4
    assert np.allclose(np.diff(ys), 0.05) and np.allclose(np.diff(zs), 0.05)
    assert len(ris_grid_offsets(10, 0.05)) == 10


def test_correlation_examples():
    off = ris_grid_offsets(9, 0.0)
    assert np.allclose(ris_correlation(off, 0.1), 1.0)
    line = np.zeros((5, 3))
    line[:, 1] = np.arange(5) * 0.05
    assert np.allclose(ris_correlation(line, 0.1), np.eye(5), atol=1e-15)


def test_correlation_is_psd_with_unit_diagonal():
    r = ris_correlation(ris_grid_offsets(36, 0.025), 0.1)
    assert np.allclose(r, r.conj().T)
    assert np.allclose(np.diag(r), 1.0)
    assert np.linalg.eigvalsh(r).min() > -1e-10


def test_effective_channel_triple_loop():
    ch = toy_channels(seed=2)
    v = np.exp(1j * np.random.default_rng(5).uniform(0, 2 * np.pi, ch.n_ris_elements))
    nl = ch.n_aps * ch.antennas_per_ap
    for k in range(ch.n_users):
        h = ch.stacked_direct(k)
        want = np.zeros(nl, dtype=complex)
        for i in range(nl):
            want[i] = h[i]
            for m in range(ch.n_ris_elements):
                want[i] += ch.ap_to_ris[i, m] * ch.ris_to_user[k, m] * v[m]
        assert np.allclose(effective_channel(ch, v, k), want, rtol=1e-13, atol=1e-13)
        assert np.allclose(effective_channels(ch, v)[:, k], want, rtol=1e-13, atol=1e-13)


def test_effective_channel_special_cases():
    ch = toy_channels(m=1)
    zero_ris = ch.replace(ris_to_user=np.zeros_like(ch.ris_to_user))
    assert np.array_equal(effective_channel(zero_ris, np.ones(1), 0), ch.stacked_direct(0))
    no_direct = ch.replace(direct=np.zeros_like(ch.direct))
    assert np.allclose(effective_channel(no_direct, np.ones(1), 1), ch.ap_to_ris[:, 0] * ch.ris_to_user[1, 0])


def test_stacking_identity():
    ch = toy_channels()
    for k in range(ch.n_users):
        stacked = ch.stacked_direct(k)
        for n in range(ch.n_aps):
            l = ch.antennas_per_ap
            assert np.array_equal(stacked[n * l : (n + 1) * l], ch.direct[n, k])


def test_sinr_brute_force():
    ch = toy_channels(seed=9)
    rng = np.random.default_rng(1)
    w = rand_complex(rng, ch.n_aps * ch.antennas_per_ap, ch.n_users)
    v = np.exp(1j * rng.uniform(0, 2 * np.pi, ch.n_ris_elements))
    state = NetworkState(w, v, np.zeros(ch.n_users))
    for k in range(ch.n_users):
        h = effective_channel(ch, v, k)
        num = abs(sum(np.conj(h[i]) * w[i, k] for i in range(len(h)))) ** 2
        den = ch.noise_power_w
        for j in range(ch.n_users):
            if j != k:
                den += abs(sum(np.conj(h[i]) * w[i, j] for i in range(len(h)))) ** 2
        assert sinr(ch, state, k) == pytest.approx(num / den, rel=1e-12)


def test_sinr_matched_filter_and_zero():
    ch = toy_channels(k=1, seed=4)
    v = np.ones(ch.n_ris_elements, dtype=complex)
    h = effective_channel(ch, v, 0)
    p = 2.5
    w = (math.sqrt(p) * h / np.linalg.norm(h))[:, None]
    assert sinr_all(h[:, None], w, ch.noise_power_w)[0] == pytest.approx(p * np.linalg.norm(h) ** 2 / ch.noise_power_w, rel=1e-12)
    assert sinr_all(h[:, None], np.zeros_like(w), ch.noise_power_w)[0] == 0.0


def test_blockage_examples():
    direct = np.zeros((2, 1, 1), dtype=complex)
    direct[0, 0, 0] = 1.0
    direct[1, 0, 0] = 2.0
    ch = ChannelSet(direct, np.ones((2, 1)), np.ones((1, 1)), 1.0)
    blocked = apply_blockage(ch)
    assert blocked.blocked_links == {(1, 0)}
    assert blocked.direct[1, 0, 0] == 0 and blocked.direct[0, 0, 0] == 1.0
    # tie: lowest (n, k)
    tie = ch.replace(direct=np.ones((2, 2, 1), dtype=complex), ris_to_user=np.ones((2, 1)))
    assert apply_blockage(tie).blocked_links == {(0, 0)}
    single = ChannelSet(np.full((1, 1, 2), 1 + 1j), np.ones((2, 1)), np.ones((1, 1)), 1.0)
    out = apply_blockage(single)
    assert np.all(out.direct == 0) and np.array_equal(out.ap_to_ris, single.ap_to_ris)
    with pytest.raises(ValueError):
        apply_blockage(out)


def test_blockage_reduces_total_direct_power(small):
    _, ch = small
    before = np.sum(np.abs(ch.direct) ** 2)
    blocked = apply_blockage(ch)
    assert np.sum(np.abs(blocked.direct) ** 2) < before
    assert np.array_equal(blocked.ris_to_user, ch.ris_to_user)
    assert np.array_equal(blocked.ap_to_ris, ch.ap_to_ris)
