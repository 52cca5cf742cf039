"""Sequential packing dynamics for a pair of interfering links.

One transmitter at a time recomputes its packing response against the
interference produced by the other.  With the continuous response this is
an asynchronous best-response scheme that, for feasible targets, settles on
a "repulsive" allocation: one link occupies a prefix of the (reordered)
frame, the other a suffix, with at most one partial-power slot at each
boundary.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .core import (
    POWER_TOL,
    RATE_TOL,
    NetworkConfig,
    PowerAllocation,
    _powers_of,
    interference,
    link_rates,
)
from .packing import LinkView, bpp_allocate, pp_allocate

# A continuous packing update whose row moves less than this is treated as
# unchanged; geometric tails of the power iteration stall below this level
# long before the update budget runs out.
POWER_STABLE_TOL = 1e-13

SCHEDULE_KINDS = ("round_robin", "uniform_random")


@dataclass
class UpdateSchedule:
    """Order in which transmitters are selected for updates.

    ``round_robin`` cycles 0, 1, ..., n-1 forever (every link updates
    infinitely often); ``uniform_random`` draws an independent uniform link
    index at every step from a generator seeded with ``seed``.
    """

    kind: str
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    def sequence(self, n_links: int) -> Iterator[int]:
        if self.kind == "round_robin":
            return itertools.cycle(range(n_links))
        rng = np.random.default_rng(self.seed)

        def draw():
            while True:
                yield int(rng.integers(n_links))

        return draw()


@dataclass
class SimTrace:
    """Per-update log of a run; one row per update, fixed column order."""

    columns: list[str]
    rows: list[tuple] = field(default_factory=list)

    def append(self, row) -> None:
        row = tuple(row)
        if len(row) != len(self.columns):
            raise ValueError("trace row length does not match columns")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(_csv_cell(v) for v in row) + "\n")


def _csv_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _trace_columns(n: int, m: int, extra: list[str]) -> list[str]:
    cols = ["t", "link", "branch"]
    cols += [f"p_{i}_{s}" for i in range(n) for s in range(m)]
    cols += [f"rate_{i}" for i in range(n)]
    cols += [f"sat_{i}" for i in range(n)]
    cols += extra
    cols.append("absorbed")
    return cols


def _trace_row(t, link, branch, powers, rates, sat, extra, absorbed):
    return (
        [t, link, branch]
        + [float(x) for x in powers.ravel()]
        + [float(r) for r in rates]
        + [bool(s) for s in sat]
        + list(extra)
        + [bool(absorbed)]
    )


@dataclass
class IterationResult:
    """Outcome of a run.  ``absorbed`` means the dynamics can no longer
    change the allocation; ``converged`` additionally requires every link to
    be satisfied at that point."""

    converged: bool
    final_allocation: PowerAllocation
    final_rates: np.ndarray
    updates_used: int
    absorbed: bool = False
    trace: SimTrace | None = None


def _classify(row: np.ndarray, p_max: float, tol: float) -> np.ndarray:
    """0 for zero power, 2 for full power, 1 for strictly in between."""
    cls = np.ones(row.size, dtype=int)
    cls[row <= tol] = 0
    cls[row >= p_max - tol] = 2
    return cls


def is_repulsive(p, p_max: float, tol: float = POWER_TOL) -> bool:
    """Whether a 2-link allocation is repulsive.

    Repulsive: the slots can be reordered so that link 1 transmits at full
    power on a prefix and link 2 on a suffix, each with at most one
    partial-power slot just past its block and zeros elsewhere.  Decided by
    sorting slots by (link-1 level descending, link-2 level ascending) and
    checking the prefix/suffix pattern on the result.
    """
    powers = _powers_of(p)
    if powers.shape[0] != 2:
        raise ValueError("repulsive structure is defined for exactly 2 links")
    ca = _classify(powers[0], p_max, tol)
    cb = _classify(powers[1], p_max, tol)
    if np.sum(ca == 1) > 1 or np.sum(cb == 1) > 1:
        return False
    order = np.lexsort((cb, -ca))
    sca, scb = ca[order], cb[order]
    return bool(np.all(np.diff(sca) <= 0) and np.all(np.diff(scb) >= 0))


def sample_repulsive_allocation(frame_size: int, p_max: float,
                                rng: np.random.Generator,
                                binary: bool = False) -> np.ndarray:
    """Draw a random repulsive allocation (slot order: identity).

    Link 1 gets a full-power prefix of random length with a random partial
    slot after it; link 2 gets a full-power suffix with a random partial
    slot before it.  With ``binary=True`` the boundary slots are drawn from
    {0, p_max} instead.
    """
    m = frame_size
    a = np.zeros(m)
    b = np.zeros(m)
    m1 = int(rng.integers(0, m + 1))
    m2 = int(rng.integers(1, m + 2))
    a[:m1] = p_max
    if m1 < m:
        a[m1] = p_max * float(rng.integers(2)) if binary else rng.uniform(0, p_max)
    b[m2 - 1:] = p_max
    if 0 <= m2 - 2 < m:
        b[m2 - 2] = p_max * float(rng.integers(2)) if binary else rng.uniform(0, p_max)
    return np.vstack([a, b])


def _best_response_run(net: NetworkConfig, targets, schedule: UpdateSchedule,
                       init, budget: int, allocator, stable_tol: float,
                       record_trace: bool) -> IterationResult:
    targets = np.asarray(targets, dtype=float)
    if net.n_links != 2:
        raise ValueError("pairwise packing dynamics support exactly 2 links")
    if targets.shape != (net.n_links,):
        raise ValueError("targets length must equal n_links")
    p = _powers_of(init).copy()
    if p.shape[0] != net.n_links:
        raise ValueError("initial allocation and network disagree on n_links")
    if np.any(p < 0) or np.any(p > net.p_max + POWER_TOL):
        raise ValueError("initial powers must lie in [0, p_max]")
    n, m = p.shape

    trace = SimTrace(_trace_columns(n, m, [])) if record_trace else None
    seq = schedule.sequence(n)
    # Links confirmed unchanged since the last actual row change; absorption
    # needs every link confirmed, not just any N consecutive quiet updates.
    quiet: set[int] = set()
    absorbed = False
    updates = 0
    for t in range(1, budget + 1):
        i = next(seq)
        view = LinkView.from_allocation(p, net, i, targets[i])
        row = allocator(view)
        if np.max(np.abs(row - p[i])) > stable_tol:
            p[i] = row
            quiet = {i}
        else:
            quiet.add(i)
        updates = t
        if len(quiet) == n:
            rates = link_rates(p, net)
            sat = rates >= targets - RATE_TOL
            silent = np.all(np.abs(p) <= POWER_TOL, axis=1)
            if sat.all() or bool(np.all(sat | silent)):
                absorbed = True
        if record_trace:
            rates = link_rates(p, net)
            sat = rates >= targets - RATE_TOL
            trace.append(_trace_row(t, i, "pack", p, rates, sat, [], absorbed))
        if absorbed:
            break
    rates = link_rates(p, net)
    sat = rates >= targets - RATE_TOL
    return IterationResult(
        converged=bool(absorbed and sat.all()),
        final_allocation=PowerAllocation(p),
        final_rates=rates,
        updates_used=updates,
        absorbed=absorbed,
        trace=trace,
    )


def ipp_run(net: NetworkConfig, targets, schedule: UpdateSchedule, init,
            budget: int = 10_000, record_trace: bool = False) -> IterationResult:
    """Iterate the continuous packing response over a 2-link network.

    Stops once every link's response leaves its row unchanged and either
    all links are satisfied or every unsatisfied link is silent.
    """
    return _best_response_run(net, targets, schedule, init, budget,
                              pp_allocate, POWER_STABLE_TOL, record_trace)


def ibpp_run(net: NetworkConfig, targets, schedule: UpdateSchedule, init,
             budget: int = 10_000, record_trace: bool = False) -> IterationResult:
    """Iterate the binary packing response over a 2-link network."""
    return _best_response_run(net, targets, schedule, init, budget,
                              bpp_allocate, 0.0, record_trace)
