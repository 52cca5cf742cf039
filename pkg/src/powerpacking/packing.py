"""Single-transmitter packing responses and the scheduling game's utility.

Given fixed interference, a transmitter sorts the frame's slots by
increasing interference and fills them in that order with full power until
the cumulative rate reaches its target.  The continuous variant trims the
last used slot down to the exact power that meets the target ("power
packing"); the binary variant keeps the last slot at full power and
overshoots ("binary power packing").  If the target is unreachable even at
full power everywhere, the transmitter stays silent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    RATE_TOL,
    NetworkConfig,
    _powers_of,
    interference,
    link_rate_given_interference,
    shannon_rate,
    shannon_rate_inverse,
)


@dataclass(frozen=True)
class LinkView:
    """Everything one transmitter needs to compute its response.

    ``interference`` holds the per-slot interference-plus-noise currently
    seen by the link's receiver; it already includes N0 so every entry is
    positive.
    """

    own_gain: float
    target: float
    interference: np.ndarray
    p_max: float
    bandwidth: float = 1.0

    def __post_init__(self):
        inter = np.array(self.interference, dtype=float)
        if inter.ndim != 1 or inter.size == 0:
            raise ValueError("interference must be a nonempty 1-D array")
        if np.any(inter <= 0):
            raise ValueError("interference entries must be positive")
        if self.own_gain <= 0:
            raise ValueError("own_gain must be positive")
        if self.target < 0:
            raise ValueError("target rate must be nonnegative")
        if self.p_max <= 0:
            raise ValueError("p_max must be positive")
        object.__setattr__(self, "interference", inter)

    @property
    def frame_size(self) -> int:
        return self.interference.size

    @classmethod
    def from_allocation(cls, p, net: NetworkConfig, i: int,
                        target: float) -> "LinkView":
        return cls(
            own_gain=float(net.gains[i, i]),
            target=float(target),
            interference=interference(p, net, i),
            p_max=net.p_max,
            bandwidth=net.bandwidth,
        )


def _packing_order(view: LinkView):
    """Sorted slot order and the minimal number of slots meeting the target.

    Returns ``(order, slot_rates, cum, m_tilde)`` or ``None`` when the
    target is unreachable at full power on all slots.  Ties in interference
    are broken by ascending slot index (stable sort).
    """
    slot_rates = shannon_rate(view.p_max * view.own_gain / view.interference,
                              view.bandwidth)
    need = view.frame_size * view.target
    if slot_rates.sum() < need - RATE_TOL:
        return None
    order = np.argsort(view.interference, kind="stable")
    cum = np.cumsum(slot_rates[order])
    m_tilde = int(np.argmax(cum >= need - RATE_TOL)) + 1
    return order, slot_rates, cum, m_tilde


def pp_allocate(view: LinkView) -> np.ndarray:
    """Continuous packing response: meet the target exactly, or stay silent.

    Full power on the m_tilde - 1 least interfered slots, a fractional
    power on the next one chosen so the frame-averaged rate equals the
    target, zero elsewhere.  A zero target returns the all-zero row.
    """
    row = np.zeros(view.frame_size)
    if view.target <= RATE_TOL:
        return row
    packed = _packing_order(view)
    if packed is None:
        return row
    order, slot_rates, cum, m_tilde = packed
    row[order[: m_tilde - 1]] = view.p_max
    already = cum[m_tilde - 2] if m_tilde >= 2 else 0.0
    residual = view.frame_size * view.target - already
    # Residual rate fits in the boundary slot by minimality of m_tilde; the
    # clip only absorbs floating-point drift.
    boundary = order[m_tilde - 1]
    frac = (view.interference[boundary] / view.own_gain) * shannon_rate_inverse(
        max(residual, 0.0), view.bandwidth
    )
    row[boundary] = min(max(frac, 0.0), view.p_max)
    return row


def bpp_allocate(view: LinkView) -> np.ndarray:
    """Binary packing response: full power on the m_tilde least interfered
    slots, zero elsewhere.  Meets or exceeds the target; a zero target or an
    unreachable one returns the all-zero row."""
    row = np.zeros(view.frame_size)
    if view.target <= RATE_TOL:
        return row
    packed = _packing_order(view)
    if packed is None:
        return row
    order, _, _, m_tilde = packed
    row[order[:m_tilde]] = view.p_max
    return row


@dataclass(frozen=True)
class UtilityParams:
    """Satisfaction reward C of the scheduling game.

    C must dominate the largest possible SINR cost so that meeting the
    target always beats missing it: ``C > M * p_max * g_ii / N0`` for every
    link.
    """

    c: float

    @classmethod
    def default_for(cls, net: NetworkConfig, frame_size: int) -> "UtilityParams":
        worst = frame_size * net.p_max * float(np.max(np.diag(net.gains))) / net.noise
        return cls(c=1.0 + worst)

    def validate_for(self, net: NetworkConfig, frame_size: int) -> None:
        bound = frame_size * net.p_max * float(np.max(np.diag(net.gains))) / net.noise
        if self.c <= bound:
            raise ValueError(
                f"C={self.c} too small: needs C > {bound} for this network/frame"
            )


def row_utility(view: LinkView, row, c: float) -> float:
    """Utility of one strategy row against the view's fixed interference:
    ``C * 1{rate >= target} - sum_m row_m * g / I_m``."""
    q = np.asarray(row, dtype=float)
    rate = link_rate_given_interference(q, view.own_gain, view.interference,
                                        view.bandwidth)
    cost = float(np.sum(q * view.own_gain / view.interference))
    reward = c if rate >= view.target - RATE_TOL else 0.0
    return reward - cost


def utility(p, i: int, target: float, net: NetworkConfig,
            params: UtilityParams) -> float:
    """Utility of link i under the full allocation ``p``."""
    powers = _powers_of(p)
    params.validate_for(net, powers.shape[1])
    view = LinkView.from_allocation(powers, net, i, target)
    return row_utility(view, powers[i], params.c)
