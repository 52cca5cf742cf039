"""Randomized packing dynamics for any number of links.

Past two links, plain binary packing responses can lock the network into a
partially satisfied state.  The cure is occasional exploration: a selected
transmitter sometimes replaces its row with a uniformly random binary one.
Unsatisfied transmitters explore with probability alpha1; satisfied ones
explore with probability alpha2 but only when a trigger fires.  Two
triggers are implemented: a one-bit memory flag (was I satisfied by my own
last decision?) and a threshold on the change of the per-frame interference
sum.  The structural conditions under which these dynamics reach every
feasible target are decidable by brute force on small instances
(``check_a1`` / ``check_a2``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    RATE_TOL,
    POWER_TOL,
    NetworkConfig,
    PowerAllocation,
    _powers_of,
    batch_interference,
    batch_link_rates,
    interference_matrix,
    link_rate_given_interference,
    link_rates,
)
from .iterative import (
    IterationResult,
    SimTrace,
    UpdateSchedule,
    _trace_columns,
    _trace_row,
)
from .packing import LinkView, bpp_allocate


@dataclass(frozen=True)
class PerturbParams:
    """Exploration rates and run limits for the randomized dynamics.

    alpha = 0 disables the corresponding random branch entirely, which
    recovers the deterministic binary dynamics as a baseline; 1 would make
    the absorbing states unreachable, so rates live in [0, 1).
    """

    alpha1: float
    alpha2: float
    delta: float = 1.0
    budget: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.alpha1 < 1 and 0 <= self.alpha2 < 1):
            raise ValueError("exploration rates must lie in [0, 1)")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.budget < 1:
            raise ValueError("budget must be a positive integer")


@dataclass
class AgentState:
    """Per-transmitter private state between that transmitter's updates."""

    row: np.ndarray
    beta: int = 0
    i_last: float = 0.0


def random_binary_row(m: int, p_max: float, rng: np.random.Generator) -> np.ndarray:
    """Each slot independently at p_max with probability 1/2, else silent."""
    return p_max * rng.integers(0, 2, size=m).astype(float)


def _require_binary(p: np.ndarray, p_max: float) -> None:
    binary = (np.abs(p) <= POWER_TOL) | (np.abs(p - p_max) <= POWER_TOL)
    if not binary.all():
        raise ValueError("initial allocation must be binary (0 or p_max per slot)")


class _ExplorationProcess:
    """One-update-at-a-time driver shared by both exploration triggers.

    ``step(targets)`` performs a single selected-transmitter update and
    ``is_absorbed(targets)`` decides whether the state can ever change
    again.  Targets are passed per call so a queueing layer can move them
    between updates; a target change invalidates the quiet-link bookkeeping
    used for stall detection.
    """

    def __init__(self, net: NetworkConfig, schedule: UpdateSchedule, init,
                 params: PerturbParams):
        p = _powers_of(init).copy()
        if p.shape[0] != net.n_links:
            raise ValueError("initial allocation and network disagree on n_links")
        _require_binary(p, net.p_max)
        self.net = net
        self.params = params
        self.p = p
        self.rng = np.random.default_rng(params.seed)
        self._seq = schedule.sequence(net.n_links)
        # Links confirmed unchanged since the last state change; complete
        # coverage with alpha1 = 0 means no branch can ever fire again.
        self._quiet: set[int] = set()
        self._last_targets: np.ndarray | None = None
        # interference/rate caches, valid until a row changes
        self._inter_cache: np.ndarray | None = None
        self._rates_cache: np.ndarray | None = None

    def _interference(self) -> np.ndarray:
        if self._inter_cache is None:
            self._inter_cache = interference_matrix(self.p, self.net)
        return self._inter_cache

    def _rates(self) -> np.ndarray:
        if self._rates_cache is None:
            self._rates_cache = link_rates(self.p, self.net,
                                           inter=self._interference())
        return self._rates_cache

    def _check_targets(self, targets) -> np.ndarray:
        targets = np.asarray(targets, dtype=float)
        if targets.shape != (self.net.n_links,):
            raise ValueError("targets length must equal n_links")
        if self._last_targets is None or not np.array_equal(targets, self._last_targets):
            self._quiet.clear()
            self._last_targets = targets.copy()
        return targets

    def _wants_exploration(self, i: int, inter_row: np.ndarray) -> bool:
        raise NotImplementedError

    def _record(self, i: int, row: np.ndarray, inter_row: np.ndarray,
                target: float) -> None:
        raise NotImplementedError

    def step(self, targets) -> tuple[int, str, bool]:
        """Run one update; returns (link, branch taken, row changed)."""
        targets = self._check_targets(targets)
        i = int(next(self._seq))
        inter_row = self._interference()[i]
        own_gain = float(self.net.gains[i, i])
        rate_now = self.net.bandwidth * float(
            np.log1p(own_gain * self.p[i] / inter_row).mean())
        m = self.p.shape[1]
        if rate_now >= targets[i] - RATE_TOL:
            if (self._wants_exploration(i, inter_row)
                    and self.params.alpha2 > 0
                    and self.rng.random() < self.params.alpha2):
                row, branch = random_binary_row(m, self.net.p_max, self.rng), "random"
            else:
                row, branch = self.p[i].copy(), "keep"
        else:
            if self.params.alpha1 > 0 and self.rng.random() < self.params.alpha1:
                row, branch = random_binary_row(m, self.net.p_max, self.rng), "random"
            else:
                view = LinkView(own_gain=own_gain, target=float(targets[i]),
                                interference=inter_row, p_max=self.net.p_max,
                                bandwidth=self.net.bandwidth)
                row, branch = bpp_allocate(view), "bpp"
        changed = not np.array_equal(row, self.p[i])
        self.p[i] = row
        self._record(i, row, inter_row, targets[i])
        if changed:
            self._quiet = {i}
            self._inter_cache = None
            self._rates_cache = None
        else:
            self._quiet.add(i)
        return i, branch, changed

    def _satisfied(self, targets: np.ndarray) -> np.ndarray:
        return self._rates() >= targets - RATE_TOL

    def _stalled(self) -> bool:
        # Deterministic dead end: no random branch reachable and a full
        # sweep of links produced no change.
        return self.params.alpha1 == 0 and len(self._quiet) == self.net.n_links

    def is_absorbed(self, targets) -> bool:
        raise NotImplementedError


class BetaTriggerProcess(_ExplorationProcess):
    """Satisfied transmitters explore only while their satisfaction was not
    earned by their own last decision (memory bit 0)."""

    def __init__(self, net, schedule, init, params, beta0=None):
        super().__init__(net, schedule, init, params)
        if beta0 is None:
            self.beta = np.zeros(net.n_links, dtype=int)
        else:
            self.beta = np.asarray(beta0, dtype=int).copy()
            if self.beta.shape != (net.n_links,) or not np.isin(self.beta, (0, 1)).all():
                raise ValueError("beta0 must be a length-n_links 0/1 vector")

    def _wants_exploration(self, i, inter_row):
        return self.beta[i] == 0

    def _record(self, i, row, inter_row, target):
        rate = link_rate_given_interference(
            row, self.net.own_gains[i], inter_row, w=self.net.bandwidth)
        self.beta[i] = 1 if rate >= target - RATE_TOL else 0

    def is_absorbed(self, targets) -> bool:
        targets = self._check_targets(targets)
        sat = self._satisfied(targets)
        if sat.all() and self.beta.all():
            return True
        return self._stalled()

    def agent(self, i: int) -> AgentState:
        return AgentState(row=self.p[i].copy(), beta=int(self.beta[i]))


class InterferenceTriggerProcess(_ExplorationProcess):
    """Satisfied transmitters explore only when the interference sum has
    moved more than delta since their last update."""

    def __init__(self, net, schedule, init, params, i_last0=None):
        super().__init__(net, schedule, init, params)
        if i_last0 is None:
            self.i_last = interference_matrix(self.p, net).sum(axis=1)
        else:
            self.i_last = np.asarray(i_last0, dtype=float).copy()
            if self.i_last.shape != (net.n_links,) or np.any(self.i_last < 0):
                raise ValueError("i_last0 must be a length-n_links nonnegative vector")

    def _wants_exploration(self, i, inter_row):
        return abs(inter_row.sum() - self.i_last[i]) > self.params.delta

    def _record(self, i, row, inter_row, target):
        self.i_last[i] = inter_row.sum()

    def is_absorbed(self, targets) -> bool:
        targets = self._check_targets(targets)
        sat = self._satisfied(targets)
        if sat.all():
            sums = self._interference().sum(axis=1)
            if np.all(np.abs(sums - self.i_last) <= self.params.delta):
                return True
        return self._stalled()

    def agent(self, i: int) -> AgentState:
        return AgentState(row=self.p[i].copy(), i_last=float(self.i_last[i]))


def _run_process(proc: _ExplorationProcess, targets, record_trace: bool,
                 extra_cols: list[str], extra_fn) -> IterationResult:
    net = proc.net
    targets = np.asarray(targets, dtype=float)
    n, m = proc.p.shape
    trace = SimTrace(_trace_columns(n, m, extra_cols)) if record_trace else None
    absorbed = proc.is_absorbed(targets)
    updates = 0
    while not absorbed and updates < proc.params.budget:
        i, branch, _ = proc.step(targets)
        updates += 1
        absorbed = proc.is_absorbed(targets)
        if record_trace:
            rates = link_rates(proc.p, net)
            sat = rates >= targets - RATE_TOL
            trace.append(_trace_row(updates, i, branch, proc.p, rates, sat,
                                    extra_fn(proc), absorbed))
    rates = link_rates(proc.p, net)
    sat = rates >= targets - RATE_TOL
    return IterationResult(
        converged=bool(absorbed and sat.all()),
        final_allocation=PowerAllocation(proc.p.copy()),
        final_rates=rates,
        updates_used=updates,
        absorbed=bool(absorbed),
        trace=trace,
    )


def ipbpp_run(net: NetworkConfig, targets, schedule: UpdateSchedule, init,
              params: PerturbParams, beta0=None,
              record_trace: bool = False) -> IterationResult:
    """Memory-bit exploration dynamics, run until absorbed or out of budget.

    Absorbed means every link is satisfied and every memory bit is 1 (no
    rule can change the allocation anymore), or, when alpha1 = 0, that a
    full sweep of deterministic responses changed nothing.
    """
    proc = BetaTriggerProcess(net, schedule, init, params, beta0=beta0)
    cols = [f"beta_{i}" for i in range(net.n_links)]
    return _run_process(proc, targets, record_trace, cols,
                        lambda pr: [int(b) for b in pr.beta])


def itipbpp_run(net: NetworkConfig, targets, schedule: UpdateSchedule, init,
                params: PerturbParams, i_last0=None,
                record_trace: bool = False) -> IterationResult:
    """Interference-triggered exploration dynamics.

    Absorbed means every link is satisfied and every recorded interference
    sum is within delta of the current one.
    """
    proc = InterferenceTriggerProcess(net, schedule, init, params, i_last0=i_last0)
    cols = [f"i_last_{i}" for i in range(net.n_links)]
    return _run_process(proc, targets, record_trace, cols,
                        lambda pr: [float(v) for v in pr.i_last])


def check_a1(net: NetworkConfig, targets, m: int) -> bool:
    """Decide by exhaustion whether every partially satisfied binary state
    is escapable.

    For each binary allocation whose unsatisfied set U is nonempty and
    proper, require that either some link in U reaches its target at full
    power on every slot (others held fixed), or that sending every link of
    U to full power strictly enlarges the unsatisfied set.
    """
    n = net.n_links
    if n * m > 20:
        raise ValueError("instance too large to enumerate (n_links * frame_size > 20)")
    targets = np.asarray(targets, dtype=float)
    if targets.shape != (n,):
        raise ValueError("targets length must equal n_links")
    total = 1 << (n * m)
    rates = np.empty((total, n))
    rate_full = np.empty((total, n))
    own = net.own_gains
    pos = np.arange(n * m, dtype=np.int64)
    chunk = 1 << 14
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        bits = (idx[:, None] >> pos) & 1
        allocs = net.p_max * bits.reshape(-1, n, m).astype(float)
        inter = batch_interference(allocs, net)
        rates[lo:lo + len(idx)] = batch_link_rates(allocs, net, inter)
        full_sinr = own[None, :, None] * net.p_max / inter
        rate_full[lo:lo + len(idx)] = net.bandwidth * np.log1p(full_sinr).mean(axis=2)
    unsat = rates < targets[None, :] - RATE_TOL
    counts = unsat.sum(axis=1)
    proper = (counts > 0) & (counts < n)
    clause_a = np.any(unsat & (rate_full >= targets[None, :] - RATE_TOL), axis=1)
    # Index of the allocation with all unsatisfied rows forced to full
    # power: the per-link bit masks are disjoint, so OR equals sum.
    row_mask = ((1 << m) - 1) << (m * np.arange(n, dtype=np.int64))
    idx_prime = np.arange(total, dtype=np.int64) | (unsat @ row_mask)
    unsat_prime = unsat[idx_prime]
    superset = ~np.any(unsat & ~unsat_prime, axis=1)
    grew = np.any(unsat_prime & ~unsat, axis=1)
    clause_b = superset & grew
    return bool(np.all(~proper | clause_a | clause_b))


def check_a2(net: NetworkConfig, delta: float, m: int) -> bool:
    """Decide by exhaustion whether every group of links can be heard.

    True iff for every nonempty proper subset U of links some link j
    outside U satisfies m * p_max * sum_{i in U} gains[i, j] > delta.
    """
    n = net.n_links
    if n > 20:
        raise ValueError("instance too large to enumerate (n_links > 20)")
    if n < 2:
        return True
    for mask in range(1, (1 << n) - 1):
        members = np.array([(mask >> i) & 1 for i in range(n)], dtype=bool)
        heard = m * net.p_max * net.gains[members].sum(axis=0)
        if not np.any(heard[~members] > delta):
            return False
    return True
