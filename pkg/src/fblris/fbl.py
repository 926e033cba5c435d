"""Finite- and infinite-blocklength rate expressions (normal approximation)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc

LOG2E = math.log2(math.e)
DEFAULT_BLER = 1e-5

# Q(x) underflows to 0 around x = 38.5; p below Q(38) is not representable anyway.
_Q_BRACKET = 38.0


def q_func(x):
    """Gaussian tail probability Q(x) = P[N(0,1) > x]."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def q_inv(p: float) -> float:
    """Inverse of the Gaussian Q function.

    Solved by bracketed root finding on ``Q`` (built from ``erfc``), so the
    round trip ``Q(q_inv(p))`` is accurate to a few ulps of ``p``.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"q_inv needs 0 < p < 1, got {p!r}")
    if p == 0.5:
        return 0.0
    return brentq(
        lambda x: float(q_func(x)) - p,
        -_Q_BRACKET,
        _Q_BRACKET,
        xtol=1e-300,
        rtol=4 * np.finfo(float).eps,
        maxiter=500,
    )


def dispersion(gamma):
    """Channel dispersion V(gamma) = 1 - (1 + gamma)^-2 (Gaussian signalling)."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("dispersion needs gamma >= 0")
    out = -np.expm1(-2.0 * np.log1p(gamma))
    return out if out.ndim else float(out)


def ibl_rate(gamma, bandwidth_hz: float):
    """Shannon rate B*log2(1 + gamma) in bit/s."""
    gamma = np.asarray(gamma, dtype=float)
    out = bandwidth_hz * np.log1p(gamma) / math.log(2.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class FblParams:
    """Blocklength, target BLER and bandwidth of the short-packet regime.

    ``omega`` defaults to ``q_inv(bler) * log2(e)``. Passing it explicitly
    is allowed (e.g. ``omega=0.0`` collapses the FBL bound onto Shannon);
    the consistency check only runs when it is derived.
    """

    blocklength: float
    bler: float = DEFAULT_BLER
    bandwidth_hz: float = 1.0
    omega: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.blocklength >= 1:
            raise ValueError(f"blocklength must be >= 1, got {self.blocklength}")
        if not 0.0 < self.bler < 0.5:
            raise ValueError(f"bler must lie in (0, 0.5), got {self.bler}")
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth_hz must be positive")
        if self.omega is None:
            object.__setattr__(self, "omega", q_inv(self.bler) * LOG2E)
        elif self.omega < 0:
            raise ValueError("omega must be nonnegative")

    @property
    def penalty(self) -> float:
        """Omega / sqrt(eta), the coefficient of sqrt(V) in the rate bound."""
        return self.omega / math.sqrt(self.blocklength)


def fbl_rate_unclamped(gamma, params: FblParams):
    """B*(log2(1+gamma) - Omega*sqrt(V(gamma)/eta)); may be negative."""
    gamma = np.asarray(gamma, dtype=float)
    bits = np.log1p(gamma) / math.log(2.0) - params.penalty * np.sqrt(dispersion(gamma))
    out = params.bandwidth_hz * bits
    return out if out.ndim else float(out)


def fbl_rate(gamma, params: FblParams):
    """Normal-approximation FBL rate in bit/s, clamped at zero."""
    out = np.maximum(fbl_rate_unclamped(gamma, params), 0.0)
    return out if np.ndim(out) else float(out)
