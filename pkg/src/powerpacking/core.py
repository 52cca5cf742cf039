"""SINR arithmetic for multi-slot wireless links.

A network is a set of transmitter/receiver pairs ("links") sharing a frame
of M equal time slots.  Transmit powers are chosen per (link, slot) and
interference is treated as noise, so the quality of link i in slot m is the
SINR

    g_ii * p_im / (N0 + sum_{j != i} g_ji * p_jm)

where ``gains[j, i]`` is the channel gain from transmitter j to receiver i.
The per-frame rate of a link is the slot average of an increasing concave
function of the SINR, by default ``w * ln(1 + sinr)``.  A different rate
function can be passed to :func:`link_rates` / :func:`link_rate_given_interference`
through their ``rate_fn`` argument.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

# Absolute tolerance used for every rate comparison in the package.
RATE_TOL = 1e-9
# Absolute tolerance used when classifying power levels (zero / full).
POWER_TOL = 1e-9

# Rate vectors and target-rate vectors are plain float arrays of length n_links.
RateVector = np.ndarray
TargetRates = np.ndarray

RateFn = Callable[[np.ndarray], np.ndarray]


def shannon_rate(sinr, w: float = 1.0):
    """Rate at a given SINR: ``w * ln(1 + sinr)`` (natural log).

    Accepts scalars or arrays; negative SINR values are a domain error.
    """
    if w <= 0:
        raise ValueError("bandwidth w must be positive")
    x = np.asarray(sinr, dtype=float)
    if np.any(x < 0):
        raise ValueError("sinr must be nonnegative")
    y = w * np.log1p(x)
    return y if np.ndim(sinr) else float(y)


def shannon_rate_inverse(rate, w: float = 1.0):
    """SINR needed for a given rate: ``exp(rate / w) - 1``.

    Exact inverse of :func:`shannon_rate`; negative rates are a domain error.
    """
    if w <= 0:
        raise ValueError("bandwidth w must be positive")
    r = np.asarray(rate, dtype=float)
    if np.any(r < 0):
        raise ValueError("rate must be nonnegative")
    y = np.expm1(r / w)
    return y if np.ndim(rate) else float(y)


@dataclass(frozen=True)
class NetworkConfig:
    """Static description of an interference network.

    ``gains[j, i]`` is the channel gain from transmitter j to receiver i;
    the diagonal holds the direct gains.  ``noise`` is the receiver noise
    power N0, ``p_max`` the per-slot transmit power cap and ``bandwidth``
    the scale factor of the logarithmic rate function.
    """

    n_links: int
    gains: np.ndarray
    noise: float
    p_max: float
    bandwidth: float = 1.0

    def __post_init__(self):
        g = np.array(self.gains, dtype=float)
        if g.shape != (self.n_links, self.n_links):
            raise ValueError(
                f"gains must be {self.n_links}x{self.n_links}, got {g.shape}"
            )
        if not np.all(np.isfinite(g)) or np.any(g < 0):
            raise ValueError("gains must be finite and nonnegative")
        if np.any(np.diag(g) <= 0):
            raise ValueError("direct gains g_ii must be positive")
        if self.noise <= 0:
            raise ValueError("noise must be positive")
        if self.p_max <= 0:
            raise ValueError("p_max must be positive")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        object.__setattr__(self, "gains", g)

    @property
    def own_gains(self) -> np.ndarray:
        """Vector of direct gains g_ii."""
        return np.diag(self.gains).copy()

    def rate_ceiling(self) -> RateVector:
        """Single-link ceiling f(p_max * g_ii / N0) for every link."""
        return shannon_rate(self.p_max * np.diag(self.gains) / self.noise,
                            self.bandwidth) * np.ones(self.n_links)

    def to_dict(self) -> dict:
        return {
            "n_links": self.n_links,
            "gains": self.gains.tolist(),
            "noise": self.noise,
            "p_max": self.p_max,
            "bandwidth": self.bandwidth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        try:
            return cls(
                n_links=int(d["n_links"]),
                gains=np.array(d["gains"], dtype=float),
                noise=float(d["noise"]),
                p_max=float(d["p_max"]),
                bandwidth=float(d.get("bandwidth", 1.0)),
            )
        except KeyError as exc:
            raise ValueError(f"network document missing key {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "NetworkConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class PowerAllocation:
    """Per-link, per-slot transmit powers, shape (n_links, frame_size)."""

    powers: np.ndarray

    def __post_init__(self):
        p = np.array(self.powers, dtype=float)
        if p.ndim != 2:
            raise ValueError("powers must be a 2-D (n_links, frame_size) array")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("powers must be finite and nonnegative")
        self.powers = p

    @property
    def n_links(self) -> int:
        return self.powers.shape[0]

    @property
    def frame_size(self) -> int:
        return self.powers.shape[1]

    @classmethod
    def zeros(cls, n_links: int, frame_size: int) -> "PowerAllocation":
        return cls(np.zeros((n_links, frame_size)))

    def copy(self) -> "PowerAllocation":
        return PowerAllocation(self.powers.copy())

    def is_binary(self, p_max: float, tol: float = POWER_TOL) -> bool:
        p = self.powers
        return bool(np.all((np.abs(p) <= tol) | (np.abs(p - p_max) <= tol)))


def _powers_of(p) -> np.ndarray:
    return p.powers if isinstance(p, PowerAllocation) else np.asarray(p, dtype=float)


def interference_matrix(p, net: NetworkConfig) -> np.ndarray:
    """Per-link, per-slot interference-plus-noise, shape (n_links, frame_size).

    ``out[i, m] = N0 + sum_{j != i} gains[j, i] * p[j, m]``; a link's own
    transmission never contributes to its own interference.
    """
    powers = _powers_of(p)
    if powers.shape[0] != net.n_links:
        raise ValueError("allocation and network disagree on n_links")
    total = net.gains.T @ powers
    own = np.diag(net.gains)[:, None] * powers
    return net.noise + total - own


def interference(p, net: NetworkConfig, i: int) -> np.ndarray:
    """Interference-plus-noise seen by receiver i in every slot."""
    powers = _powers_of(p)
    if powers.shape[0] != net.n_links:
        raise ValueError("allocation and network disagree on n_links")
    if not 0 <= i < net.n_links:
        raise ValueError(f"link index {i} out of range")
    mask = np.ones(net.n_links, dtype=bool)
    mask[i] = False
    return net.noise + net.gains[mask, i] @ powers[mask]


def link_rates(p, net: NetworkConfig, rate_fn: RateFn | None = None,
               inter: np.ndarray | None = None) -> RateVector:
    """Frame-averaged rate of every link under allocation ``p``.

    ``R_i = (1/M) * sum_m f(g_ii * p_im / I_im)`` with f defaulting to
    ``bandwidth * ln(1 + sinr)``.  ``inter`` lets callers reuse an already
    computed interference matrix.
    """
    powers = _powers_of(p)
    imat = interference_matrix(powers, net) if inter is None else inter
    sinr = np.diag(net.gains)[:, None] * powers / imat
    if rate_fn is None:
        per_slot = net.bandwidth * np.log1p(sinr)
    else:
        per_slot = rate_fn(sinr)
    return per_slot.mean(axis=1)


def link_rate_given_interference(p_row, own_gain: float, interference_row,
                                 w: float = 1.0,
                                 rate_fn: RateFn | None = None) -> float:
    """Rate of a single link given its own powers and fixed interference.

    This is the one-argument restriction ``h(q, I)`` used by the packing
    best responses: only the link's own row varies, the interference row is
    held fixed.
    """
    q = np.asarray(p_row, dtype=float)
    inter = np.asarray(interference_row, dtype=float)
    if q.shape != inter.shape:
        raise ValueError("power row and interference row must have equal length")
    if np.any(inter <= 0):
        raise ValueError("interference must be positive (it includes noise)")
    sinr = own_gain * q / inter
    if rate_fn is None:
        per_slot = w * np.log1p(sinr)
    else:
        per_slot = rate_fn(sinr)
    return float(per_slot.mean())


def batch_interference(allocs: np.ndarray, net: NetworkConfig) -> np.ndarray:
    """interference_matrix for a stack of allocations, shape (k, n, m)."""
    allocs = np.asarray(allocs, dtype=float)
    if allocs.ndim != 3 or allocs.shape[1] != net.n_links:
        raise ValueError("expected allocations of shape (k, n_links, frame_size)")
    total = np.einsum("kjm,ji->kim", allocs, net.gains)
    own = np.diag(net.gains)[None, :, None] * allocs
    return net.noise + total - own


def batch_link_rates(allocs: np.ndarray, net: NetworkConfig,
                     inter: np.ndarray | None = None) -> np.ndarray:
    """link_rates for a stack of allocations; returns shape (k, n_links).

    ``inter`` lets callers that already hold the batch interference reuse it.
    """
    allocs = np.asarray(allocs, dtype=float)
    if inter is None:
        inter = batch_interference(allocs, net)
    sinr = np.diag(net.gains)[None, :, None] * allocs / inter
    return net.bandwidth * np.log1p(sinr).mean(axis=2)
