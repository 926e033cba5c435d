"""Independent re-implementations used to check stored results."""

import itertools
import math

import numpy as np


def resilience_from_snapshots(result):
    """Recompute (r_abs, r_ada, r_rec, r) of an episode from its raw rates.

    Written from the metric definitions with plain loops, without calling
    the package's metric functions.
    """

    def mean_ratio(rates):
        total = 0.0
        for got, want in zip(rates, result.desired_rates_bps):
            ratio = max(float(got), 0.0) / float(want)
            total += min(ratio, 1.0) if result.capped else ratio
        return total / len(rates)

    r_abs = mean_ratio(result.post_blockage_rates_bps)
    r_ada = mean_ratio(result.recovered_rates_bps)
    if result.decision.value == "ignore":
        r_rec = 1.0
    else:
        late = result.timeline.tq_s - result.timeline.t0_s
        r_rec = 1.0 if late <= result.timeline.t0_max_s else result.timeline.t0_max_s / late
    a, b, c = result.weights
    return r_abs, r_ada, r_rec, a * r_abs + b * r_ada + c * r_rec


def brute_force_single_user(channels, power_w, bandwidth_hz, grid=64):
    """Best IBL rate of a one-AP, one-user, two-element instance.

    Every phase pair on a ``grid`` x ``grid`` lattice with the full-power
    matched filter, which is the optimal beamformer at fixed phases.
    """
    h = channels.direct[0, 0, :]
    g = channels.ap_to_ris * channels.ris_to_user[0][None, :]
    phases = np.exp(2j * np.pi * np.arange(grid) / grid)
    best = 0.0
    for a, b in itertools.product(phases, phases):
        heff = h + g @ np.array([a, b])
        snr = power_w * float(np.vdot(heff, heff).real) / channels.noise_power_w
        best = max(best, bandwidth_hz * math.log2(1.0 + snr))
    return best
