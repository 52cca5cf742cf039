"""Buffered transmitters on top of the interference-triggered scheduler.

Each link owns an infinite buffer fed by a bounded i.i.d. arrival stream.
Per frame, the scheduler performs one update, the link serves bits at its
current frame rate (dummy bits when empty), and the queue follows the
max(0, q + arrivals - served) recursion.  Targets are either fixed a
margin above the known mean arrival rates, or derived per frame from the
running arrival-rate estimate via a quantized always-above rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .core import RATE_TOL, NetworkConfig, link_rates
from .iterative import UpdateSchedule
from .perturbed import InterferenceTriggerProcess, PerturbParams
from .region import enumerate_sm, in_coord_convex

MODES = ("known_rates", "estimated_rates")


@dataclass
class ArrivalProcess:
    """Bounded i.i.d. arrivals, one value per link per frame.

    The default law is two-point: a_max bits with probability lam/a_max,
    else nothing, so the mean is exactly lam.  Any bounded generator can be
    plugged in through ``generator`` (called with an rng, returns length-N).
    """

    lam: np.ndarray
    a_max: float
    seed: int = 0
    generator: Callable[[np.random.Generator], np.ndarray] | None = None

    def __post_init__(self):
        self.lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        if self.a_max <= 0:
            raise ValueError("a_max must be positive")
        if np.any(self.lam < 0) or np.any(self.lam > self.a_max):
            raise ValueError("mean rates must lie in [0, a_max]")
        self._rng = np.random.default_rng(self.seed)

    @property
    def n_links(self) -> int:
        return self.lam.size

    def draw(self, rng: np.random.Generator | None = None) -> np.ndarray:
        rng = self._rng if rng is None else rng
        if self.generator is not None:
            a = np.asarray(self.generator(rng), dtype=float)
            if a.shape != self.lam.shape or np.any(a < 0) or np.any(a > self.a_max):
                raise ValueError("generator output violates the arrival bounds")
            return a
        return self.a_max * (rng.random(self.n_links) < self.lam / self.a_max)


@dataclass
class QueueState:
    q: np.ndarray
    t: int = 0

    def __post_init__(self):
        self.q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if np.any(self.q < 0):
            raise ValueError("queue lengths must be nonnegative")


def step_queues(state: QueueState, arrivals, served) -> QueueState:
    """One frame of the max(0, q + arrivals - served) recursion."""
    arrivals = np.asarray(arrivals, dtype=float)
    served = np.asarray(served, dtype=float)
    if np.any(arrivals < 0) or np.any(served < 0):
        raise ValueError("arrivals and served bits must be nonnegative")
    return QueueState(np.maximum(0.0, state.q + arrivals - served), state.t + 1)


def target_from_estimate(lambda_hat, mu: float):
    """Quantized target strictly above the estimate.

    With k the 1-based index of the half-open length-2*mu interval holding
    the estimate, the target is (4k+1)*mu/2, which lands in
    (lambda, lambda + 5*mu/2) once the estimate settles inside its interval.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    lambda_hat = np.asarray(lambda_hat, dtype=float)
    if np.any(lambda_hat < 0):
        raise ValueError("estimates must be nonnegative")
    k = np.floor(lambda_hat / (2.0 * mu)) + 1.0
    out = (4.0 * k + 1.0) * mu / 2.0
    return float(out) if out.ndim == 0 else out


@dataclass
class EstimatorState:
    """Running mean of arrivals and the target it currently implies."""

    mu: float
    sum: np.ndarray = field(default_factory=lambda: np.zeros(0))
    t: int = 0
    current_target: np.ndarray | None = None

    def observe(self, arrivals: np.ndarray) -> np.ndarray:
        arrivals = np.asarray(arrivals, dtype=float)
        if self.t == 0 and self.sum.size == 0:
            self.sum = np.zeros_like(arrivals)
        self.sum = self.sum + arrivals
        self.t += 1
        self.current_target = target_from_estimate(self.lambda_hat, self.mu)
        return self.current_target

    @property
    def lambda_hat(self) -> np.ndarray:
        if self.t == 0:
            return np.zeros_like(self.sum)
        return self.sum / self.t


def run_stability_experiment(net: NetworkConfig, arrivals: ArrivalProcess,
                             m: int, mode: str, epsilon: float,
                             params: PerturbParams, horizon: int,
                             n_seeds: int = 50, q0=None,
                             stop_when_drained: bool = True,
                             min_frames: int = 0,
                             record_queues: bool = False) -> dict:
    """Simulate queue dynamics over many seeds and report drainage.

    known_rates fixes targets at lam + epsilon/2; estimated_rates rederives
    them each frame from the running estimate (mu = epsilon/8) and lets the
    scheduler continue from its current allocation whenever they move.
    Early stop happens once the queues have emptied while the scheduler is
    absorbed, but never before min_frames (so estimates can settle first).
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if arrivals.n_links != net.n_links:
        raise ValueError("arrival process and network disagree on n_links")
    lam = arrivals.lam
    known_targets = lam + epsilon / 2.0
    mu = epsilon / 8.0

    oracle = enumerate_sm(net, m) if net.n_links * m <= 20 else None
    report = {
        "mode": mode,
        "epsilon": epsilon,
        "m": m,
        "horizon": int(horizon),
        "n_seeds": int(n_seeds),
        "lambda": [float(x) for x in lam],
        "a_max": float(arrivals.a_max),
        "lambda_feasible": None if oracle is None
        else bool(in_coord_convex(known_targets, oracle)),
        "per_seed": [],
    }

    for seed_idx in range(n_seeds):
        keys = np.random.SeedSequence([params.seed, seed_idx]).generate_state(3)
        arrival_rng = np.random.default_rng(keys[0])
        schedule = UpdateSchedule("uniform_random", seed=int(keys[1]))
        proc = InterferenceTriggerProcess(
            net, schedule, np.zeros((net.n_links, m)),
            replace(params, seed=int(keys[2])))
        estimator = EstimatorState(mu=mu)
        q = QueueState(np.zeros(net.n_links) if q0 is None
                       else np.asarray(q0, dtype=float).copy())
        targets = known_targets.copy() if mode == "known_rates" \
            else target_from_estimate(np.zeros(net.n_links), mu)
        prev_targets = targets.copy()
        emptying_time = 0 if np.all(q.q == 0) else None
        absorbed_at = None
        updates_to_absorption = None
        emptied_after_absorb = None
        settle_at = np.zeros(net.n_links, dtype=int)
        queue_max = float(q.q.max(initial=0.0))
        updates_done = 0
        series = [q.q.copy()] if record_queues else None

        absorbed = False
        served = None
        for u in range(int(horizon)):
            tchanged = False
            if mode == "estimated_rates":
                moved = targets != prev_targets
                tchanged = bool(moved.any())
                settle_at[moved] = u
                prev_targets = targets.copy()
            # while absorbed with unchanged targets the state is frozen, so
            # the cached absorption verdict and rates stay valid
            if tchanged or not absorbed:
                absorbed = proc.is_absorbed(targets)
                if not absorbed:
                    proc.step(targets)
                    updates_done += 1
                    served = None
                    absorbed = proc.is_absorbed(targets)
            if absorbed and absorbed_at is None:
                absorbed_at = u
                updates_to_absorption = updates_done
            if not absorbed:
                absorbed_at = None
                updates_to_absorption = None
            if served is None:
                served = link_rates(proc.p, net)
            a = arrivals.draw(arrival_rng)
            if mode == "estimated_rates":
                targets = estimator.observe(a)
            q = step_queues(q, a, served)
            queue_max = max(queue_max, float(q.q.max()))
            if record_queues:
                series.append(q.q.copy())
            if emptying_time is None and np.all(q.q == 0):
                emptying_time = q.t
            if absorbed and emptied_after_absorb is None and np.all(q.q == 0):
                emptied_after_absorb = q.t
            if (stop_when_drained and emptied_after_absorb is not None
                    and q.t >= min_frames):
                break

        final_rates = link_rates(proc.p, net)
        entry = {
            "B": emptying_time,
            "absorbed_at": absorbed_at,
            "updates_to_absorption": updates_to_absorption,
            "emptied_after_absorb": emptied_after_absorb,
            "queue_max": queue_max,
            "frames_run": q.t,
            "final_targets": [float(x) for x in np.atleast_1d(targets)],
            "final_rates": [float(x) for x in final_rates],
            "post_absorb_service_exceeds_arrivals":
                bool(absorbed_at is not None and np.all(final_rates > lam)),
            "target_feasible": None if oracle is None
            else bool(in_coord_convex(np.atleast_1d(targets), oracle)),
        }
        if mode == "estimated_rates":
            entry["settle_at"] = [int(x) for x in settle_at]
            entry["lambda_hat"] = [float(x) for x in estimator.lambda_hat]
        if record_queues:
            entry["queues"] = [[float(x) for x in row] for row in series]
        report["per_seed"].append(entry)
    return report
