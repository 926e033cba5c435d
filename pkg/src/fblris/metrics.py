"""Resilience sub-metrics, their weighted combination and the adaptation gap."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class WeightError(ValueError):
    """Resilience weights are negative or do not sum to one."""


@dataclass(frozen=True)
class Timeline:
    t0_s: float
    tq_s: float
    t0_max_s: float

    def __post_init__(self):
        if self.tq_s < self.t0_s:
            raise ValueError("recovery instant precedes the disruption")
        if not self.t0_max_s > 0:
            raise ValueError("t0_max_s must be positive")


@dataclass(frozen=True)
class RateSnapshot:
    achieved_bps: np.ndarray
    desired_bps: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.achieved_bps, dtype=float)
        d = np.asarray(self.desired_bps, dtype=float)
        if a.shape != d.shape or a.ndim != 1:
            raise ValueError("achieved and desired rates must be 1-D of equal length")
        if np.any(d <= 0):
            raise ValueError("desired rates must be positive")
        if np.any(a < 0):
            raise ValueError("achieved rates must be nonnegative")
        object.__setattr__(self, "achieved_bps", a)
        object.__setattr__(self, "desired_bps", d)

    @property
    def ratios(self) -> np.ndarray:
        return self.achieved_bps / self.desired_bps


def _mean_ratio(snapshot: RateSnapshot, capped: bool) -> float:
    ratios = snapshot.ratios
    if capped:
        ratios = np.minimum(ratios, 1.0)
    return float(np.mean(ratios))


def absorption(snapshot_at_t0: RateSnapshot, capped: bool = True) -> float:
    """Mean fraction of the targets still delivered right after the disruption.

    Per-user ratios are capped at 1 unless ``capped=False``.
    """
    return _mean_ratio(snapshot_at_t0, capped)


def adaptation(snapshot_at_tq: RateSnapshot, capped: bool = True) -> float:
    """Mean fraction of the targets delivered at the recovery instant."""
    return _mean_ratio(snapshot_at_tq, capped)


def time_to_recovery(timeline: Timeline) -> float:
    elapsed = timeline.tq_s - timeline.t0_s
    if elapsed <= timeline.t0_max_s:
        return 1.0
    return timeline.t0_max_s / elapsed


def check_weights(weights) -> tuple[float, float, float]:
    w = tuple(float(x) for x in weights)
    if len(w) != 3:
        raise WeightError(f"resilience_weights needs 3 entries, got {len(w)}")
    if any(x < 0 for x in w):
        raise WeightError(f"resilience_weights must be nonnegative, got {w}")
    if abs(sum(w) - 1.0) > 1e-9:
        raise WeightError(f"resilience_weights must sum to 1, got sum {sum(w):.12g}")
    return w


def resilience(r_abs: float, r_ada: float, r_rec: float, weights) -> float:
    l1, l2, l3 = check_weights(weights)
    return l1 * r_abs + l2 * r_ada + l3 * r_rec


def adaptation_gap(snapshot: RateSnapshot) -> float:
    """Sum over users of |r_k / r_k^des - 1| (uncapped)."""
    return float(np.sum(np.abs(snapshot.ratios - 1.0)))


def gap_from_ratios(ratios) -> float:
    """Adaptation gap for rate ratios that may be negative (optimizer iterates)."""
    return float(np.sum(np.abs(np.asarray(ratios, dtype=float) - 1.0)))


def convergence_step(psi, rel_tol: float = 1e-3, patience: int = 3) -> int | None:
    """First step z at which the gap's relative improvement has stayed below
    ``rel_tol`` for ``patience`` consecutive steps, or None.

    ``psi[0]`` is the gap at the start point and ``psi[z]`` after step z.
    """
    psi = np.asarray(psi, dtype=float)
    run = 0
    for z in range(1, len(psi)):
        prev = psi[z - 1]
        improvement = (prev - psi[z]) / prev if prev > 1e-12 else 0.0
        run = run + 1 if improvement < rel_tol else 0
        if run >= patience:
            return z
    return None


def recovery_step(psi, rel_tol: float = 1e-3, patience: int = 3) -> int:
    """Recovery step for the time-to-recovery metric; the last step when the
    gap never settles."""
    z = convergence_step(psi, rel_tol, patience)
    return len(psi) - 1 if z is None else z
