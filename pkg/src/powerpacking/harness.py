"""Experiment drivers: topologies, sweeps, scenario configs and exports.

Converts a JSON scenario description into seeded, reproducible experiment
runs and writes their results as CSV (per-run rows) and JSON (aggregates).
Every run is a pure function of (config, seed), so repeating a command
reproduces its artifacts byte for byte.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import NetworkConfig, link_rates
from .iterative import UpdateSchedule, ibpp_run, ipp_run
from .perturbed import PerturbParams, check_a2, ipbpp_run, itipbpp_run
from .queueing import ArrivalProcess, run_stability_experiment
from .region import (
    boundary_grid,
    enumerate_s1,
    enumerate_sm,
    hull_pareto_polyline,
    in_coord_convex,
    pareto_boundary,
    sample_feasible_target,
    sample_pc_region,
    write_region_csv,
)

ALGOS = ("ipp", "ibpp", "ipbpp", "itipbpp")


class ScenarioError(Exception):
    """Raised for configs the drivers refuse to run."""


@dataclass
class TopologySpec:
    """Random link placement on a square with power-law gains."""

    n_links: int
    square_side: float = 1.0
    rx_offset: float = 0.1
    path_loss_exp: float = 3.0
    seed: int = 0
    noise: float = 0.1
    p_max: float = 1.0


def random_topology(spec: TopologySpec) -> NetworkConfig:
    """Transmitters uniform on the square, each receiver at rx_offset in a
    random direction; gain tx j -> rx i is distance^(-path_loss_exp)."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_links
    while True:
        tx = spec.square_side * rng.random((n, 2))
        ang = 2.0 * np.pi * rng.random(n)
        rx = tx + spec.rx_offset * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        d = np.linalg.norm(tx[:, None, :] - rx[None, :, :], axis=2)
        if d.min() >= 1e-6:
            break
    gains = d ** (-spec.path_loss_exp)
    return NetworkConfig(n_links=n, gains=gains, noise=spec.noise, p_max=spec.p_max)


def two_link_symmetric_network() -> NetworkConfig:
    """Two links, every gain 1: heavy mutual interference."""
    return NetworkConfig(2, np.ones((2, 2)), noise=0.1, p_max=1.0)


def two_link_asymmetric_network() -> NetworkConfig:
    """Two very unequal links: one strong direct gain, weak cross gains."""
    gains = np.array([[2000.0, 0.4], [0.4, 0.6]])
    return NetworkConfig(2, gains, noise=0.1, p_max=1.0)


def three_link_shared_receiver_network() -> NetworkConfig:
    """Two aggressors that both hammer a third, quiet link."""
    gains = np.array([
        [1.0, 1.0, 60.0],
        [1.0, 1.0, 60.0],
        [0.5, 0.5, 1.0],
    ])
    return NetworkConfig(3, gains, noise=0.1, p_max=1.0)


def shared_receiver_targets(net: NetworkConfig, m: int = 3,
                            scale: float = 0.99) -> np.ndarray:
    """Targets just under the rates of the one allocation that can serve
    the three-link shared-receiver net: links 1-2 share two slots, link 3
    gets the third alone."""
    p = np.zeros((3, m))
    p[0, :2] = net.p_max
    p[1, :2] = net.p_max
    p[2, 2] = net.p_max
    return scale * link_rates(p, net)


@dataclass
class ExperimentReport:
    per_run: list = field(default_factory=list)
    mean_updates_converged: float | None = None
    fraction_unconverged: float = 0.0

    @classmethod
    def from_runs(cls, rows: list) -> "ExperimentReport":
        conv = [r["updates_used"] for r in rows if r["converged"]]
        mean = float(np.mean(conv)) if conv else None
        frac = float(np.mean([not r["converged"] for r in rows])) if rows else 0.0
        return cls(per_run=rows, mean_updates_converged=mean,
                   fraction_unconverged=frac)

    def to_dict(self) -> dict:
        return {
            "runs": len(self.per_run),
            "mean_updates_converged": self.mean_updates_converged,
            "fraction_unconverged": self.fraction_unconverged,
        }


def _init_allocation(algo: str, n: int, m: int, p_max: float,
                     rng: np.random.Generator) -> np.ndarray:
    if algo == "ipp":
        return rng.uniform(0.0, p_max, size=(n, m))
    return p_max * rng.integers(0, 2, size=(n, m)).astype(float)


def _one_run(net, algo, targets, m, params, rep_key, record_trace=False):
    keys = np.random.SeedSequence(list(rep_key)).generate_state(3)
    init_rng = np.random.default_rng(keys[0])
    init = _init_allocation(algo, net.n_links, m, net.p_max, init_rng)
    if algo in ("ipp", "ibpp"):
        schedule = UpdateSchedule("round_robin")
        fn = ipp_run if algo == "ipp" else ibpp_run
        return fn(net, targets, schedule, init, budget=params.budget,
                  record_trace=record_trace)
    schedule = UpdateSchedule("uniform_random", seed=int(keys[1]))
    run_params = replace(params, seed=int(keys[2]))
    fn = ipbpp_run if algo == "ipbpp" else itipbpp_run
    return fn(net, targets, schedule, init, run_params, record_trace=record_trace)


def _run_row(args) -> dict:
    net, algo, targets, m, params, rep_key, rep = args
    res = _one_run(net, algo, targets, m, params, rep_key)
    return {
        "rep": rep,
        "converged": bool(res.converged),
        "absorbed": bool(res.absorbed),
        "updates_used": int(res.updates_used),
        "rates": [float(x) for x in res.final_rates],
    }


def _map_runs(arglist, parallel: int) -> list:
    if parallel > 1 and len(arglist) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(_run_row, arglist))
    return [_run_row(a) for a in arglist]


def run_battery(net, algo, targets, m, params, repetitions,
                seed_prefix=(0,), parallel: int = 1) -> ExperimentReport:
    """repetitions independent runs from seeded random initial allocations."""
    targets = np.asarray(targets, dtype=float)
    args = [(net, algo, targets, m, params, tuple(seed_prefix) + (rep,), rep)
            for rep in range(repetitions)]
    return ExperimentReport.from_runs(_map_runs(args, parallel))


def sweep_alpha(net, targets, m, alphas, algo, params, repetitions,
                base_seed: int = 0, parallel: int = 1) -> dict:
    """One report per exploration rate, with alpha2 tied to alpha1."""
    out = {}
    for ai, alpha in enumerate(alphas):
        p = replace(params, alpha1=float(alpha), alpha2=float(alpha))
        out[float(alpha)] = run_battery(
            net, algo, targets, m, p, repetitions,
            seed_prefix=(base_seed, ai), parallel=parallel)
    return out


def sweep_frame_size(net, m_values, algos, params, n_targets, repetitions,
                     base_seed: int = 0, margin: float = 0.01,
                     parallel: int = 1) -> dict:
    """Reports per (frame size, algorithm); targets are redrawn per frame
    size from random binary allocations so they are achievable at that M."""
    out = {}
    for mi, m in enumerate(m_values):
        target_rng = np.random.default_rng(
            np.random.SeedSequence([base_seed, mi]).generate_state(1)[0])
        targets = [sample_feasible_target(net, m, target_rng, margin=margin)
                   for _ in range(n_targets)]
        certified = None
        if net.n_links * m <= 20:
            sm = enumerate_sm(net, m)
            certified = all(in_coord_convex(t, sm) for t in targets)
        for algo in algos:
            rows = []
            for ti, t in enumerate(targets):
                args = [(net, algo, t, m, params,
                         (base_seed, mi, ti, rep), rep)
                        for rep in range(repetitions)]
                rows.extend(_map_runs(args, parallel))
            report = ExperimentReport.from_runs(rows)
            out[(int(m), algo)] = {
                "report": report,
                "targets_certified_feasible": certified,
                "a2_holds": bool(check_a2(net, params.delta, m)),
            }
    return out


def _resolve_net(d: dict) -> NetworkConfig:
    if "reference" in d:
        factories = {
            "two_link_symmetric": two_link_symmetric_network,
            "two_link_asymmetric": two_link_asymmetric_network,
            "three_link_shared_receiver": three_link_shared_receiver_network,
        }
        if d["reference"] not in factories:
            raise ScenarioError(f"malformed config: unknown reference net {d['reference']!r}")
        return factories[d["reference"]]()
    if "generator" in d:
        try:
            return random_topology(TopologySpec(**d["generator"]))
        except TypeError as e:
            raise ScenarioError(f"malformed config: bad topology generator ({e})")
    try:
        return NetworkConfig.from_dict(d)
    except Exception as e:
        raise ScenarioError(f"malformed config: bad network ({e})")


@dataclass
class ScenarioConfig:
    command: str
    net: NetworkConfig
    m: int
    algo: str | None = None
    targets: np.ndarray | None = None
    targets_spec: dict | None = None
    params: PerturbParams = field(default_factory=lambda: PerturbParams(0.1, 0.1))
    repetitions: int = 100
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, command: str = "run") -> "ScenarioConfig":
        if not isinstance(d, dict):
            raise ScenarioError("malformed config: expected a JSON object")
        known = {"net", "m", "algo", "targets", "targets_spec", "params",
                 "repetitions", "extras"}
        try:
            net = _resolve_net(d["net"])
            m = int(d["m"])
        except KeyError as e:
            raise ScenarioError(f"malformed config: missing field {e.args[0]!r}")
        if m < 1:
            raise ScenarioError("malformed config: frame size must be >= 1")
        algo = d.get("algo")
        if command in ("run", "sweep-alpha", "sweep-frame") and algo is not None \
                and algo not in ALGOS:
            raise ScenarioError(
                f"unknown algorithm {algo!r}; expected one of {', '.join(ALGOS)}")
        if command == "run" and algo is None:
            raise ScenarioError("malformed config: missing field 'algo'")
        targets = None
        raw_t = d.get("targets")
        targets_spec = d.get("targets_spec")
        if isinstance(targets_spec, str):
            targets_spec = {targets_spec: True}
        if isinstance(raw_t, dict):
            targets_spec = raw_t
        elif raw_t is not None:
            targets = np.asarray(raw_t, dtype=float)
            if targets.shape != (net.n_links,):
                raise ScenarioError(
                    f"dimension mismatch: {targets.size} targets for "
                    f"{net.n_links} links")
        if targets_spec is not None and not isinstance(targets_spec, dict):
            raise ScenarioError("malformed config: 'targets_spec' must be an "
                                "object or a named preset string")
        try:
            params = PerturbParams(**d.get("params", {"alpha1": 0.1, "alpha2": 0.1}))
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"malformed config: bad params ({e})")
        extras = {k: v for k, v in d.items() if k not in known}
        nested = d.get("extras", {})
        if not isinstance(nested, dict):
            raise ScenarioError("malformed config: 'extras' must be an object")
        extras.update(nested)
        return cls(command=command, net=net, m=m, algo=algo, targets=targets,
                   targets_spec=targets_spec, params=params,
                   repetitions=int(d.get("repetitions", 100)),
                   extras=extras)

    def resolve_targets(self) -> np.ndarray:
        if self.targets is not None:
            return self.targets
        spec = self.targets_spec or {}
        if spec.get("shared_receiver"):
            return shared_receiver_targets(self.net, self.m,
                                           scale=spec.get("scale", 0.99))
        if spec.get("from_random_binary", True):
            rng = np.random.default_rng(
                np.random.SeedSequence([self.params.seed, 977]).generate_state(1)[0])
            return sample_feasible_target(self.net, self.m, rng,
                                          margin=spec.get("margin", 0.01))
        raise ScenarioError("malformed config: no usable targets entry")


def _write_csv(path: Path, columns: list[str], rows: list[list]) -> None:
    def cell(v):
        if isinstance(v, bool):
            return "1" if v else "0"
        if isinstance(v, float):
            return repr(v)
        return str(v)

    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(cell(v) for v in row) + "\n")


def _runs_csv(path: Path, report: ExperimentReport, targets) -> None:
    n = len(targets)
    cols = (["rep", "converged", "absorbed", "updates_used"]
            + [f"rate_{i}" for i in range(n)] + [f"target_{i}" for i in range(n)])
    rows = [[r["rep"], r["converged"], r["absorbed"], r["updates_used"]]
            + [float(x) for x in r["rates"]] + [float(t) for t in targets]
            for r in report.per_run]
    _write_csv(path, cols, rows)


def drive_run(config: ScenarioConfig, out: Path, parallel: int = 1) -> ExperimentReport:
    targets = config.resolve_targets()
    report = run_battery(config.net, config.algo, targets, config.m,
                         config.params, config.repetitions,
                         seed_prefix=(config.params.seed,), parallel=parallel)
    res0 = _one_run(config.net, config.algo, targets, config.m, config.params,
                    (config.params.seed, 0), record_trace=True)
    res0.trace.write_csv(out / "trace_rep0.csv")
    _runs_csv(out / "runs.csv", report, targets)
    (out / "report.json").write_text(json.dumps({
        "algo": config.algo, "m": config.m,
        "targets": [float(t) for t in targets],
        **report.to_dict()}, indent=2) + "\n")
    return report


def drive_sweep_alpha(config: ScenarioConfig, out: Path,
                      parallel: int = 1) -> dict:
    alphas = config.extras.get("alphas")
    if not alphas:
        raise ScenarioError("malformed config: sweep-alpha needs a nonempty 'alphas' list")
    algo = config.algo or "ipbpp"
    if algo not in ("ipbpp", "itipbpp"):
        raise ScenarioError(f"unknown algorithm {algo!r} for sweep-alpha; "
                            "expected ipbpp or itipbpp")
    targets = config.resolve_targets()
    reports = sweep_alpha(config.net, targets, config.m, alphas, algo,
                          config.params, config.repetitions,
                          base_seed=config.params.seed, parallel=parallel)
    rows = [[float(a), len(r.per_run), r.fraction_unconverged,
             -1.0 if r.mean_updates_converged is None else r.mean_updates_converged]
            for a, r in reports.items()]
    _write_csv(out / "sweep_alpha.csv",
               ["alpha", "runs", "fraction_unconverged", "mean_updates_converged"],
               rows)
    (out / "sweep_alpha.json").write_text(json.dumps(
        {repr(a): r.to_dict() for a, r in reports.items()}, indent=2) + "\n")
    return reports


def drive_sweep_frame(config: ScenarioConfig, out: Path,
                      parallel: int = 1) -> dict:
    m_values = config.extras.get("frame_sizes")
    if not m_values:
        raise ScenarioError("malformed config: sweep-frame needs a nonempty 'frame_sizes' list")
    n_targets = int(config.extras.get("n_targets", 20))
    algos = config.extras.get("algos", ["ipbpp", "itipbpp"])
    for algo in algos:
        if algo not in ("ipbpp", "itipbpp"):
            raise ScenarioError(f"unknown algorithm {algo!r} for sweep-frame; "
                                "expected ipbpp or itipbpp")
    cells = sweep_frame_size(config.net, m_values, algos, config.params,
                             n_targets, config.repetitions,
                             base_seed=config.params.seed,
                             margin=config.extras.get("margin", 0.01),
                             parallel=parallel)
    rows = []
    for (m, algo), cell in sorted(cells.items()):
        r = cell["report"]
        rows.append([m, algo, len(r.per_run), r.fraction_unconverged,
                     -1.0 if r.mean_updates_converged is None
                     else r.mean_updates_converged,
                     cell["a2_holds"],
                     -1 if cell["targets_certified_feasible"] is None
                     else int(cell["targets_certified_feasible"])])
    _write_csv(out / "sweep_frame.csv",
               ["m", "algo", "runs", "fraction_unconverged",
                "mean_updates_converged", "a2_holds", "targets_feasible"],
               rows)
    (out / "sweep_frame.json").write_text(json.dumps(
        {f"{m}:{algo}": {**cell["report"].to_dict(),
                         "a2_holds": cell["a2_holds"],
                         "targets_certified_feasible":
                             cell["targets_certified_feasible"]}
         for (m, algo), cell in sorted(cells.items())}, indent=2) + "\n")
    return cells


def drive_region(config: ScenarioConfig, out: Path) -> None:
    net = config.net
    s1 = enumerate_s1(net)
    write_region_csv(s1, out / "s1.csv")
    if net.n_links == 2:
        grid = int(config.extras.get("grid", 60))
        write_region_csv(sample_pc_region(net, grid), out / "pc_sample.csv")
        pts = boundary_grid(hull_pareto_polyline(s1),
                            int(config.extras.get("boundary_points", 50)))
        _write_csv(out / "conv_s1_boundary.csv",
                   ["rate_0", "rate_1"], [[float(a), float(b)] for a, b in pts])
    if net.n_links * config.m <= 20:
        sm = enumerate_sm(net, config.m)
        write_region_csv(sm, out / "sm.csv")
        write_region_csv(pareto_boundary(sm), out / "sm_pareto.csv")


def drive_stability(config: ScenarioConfig, out: Path) -> dict:
    extras = config.extras
    try:
        lam = np.asarray(extras["lambda"], dtype=float)
        epsilon = float(extras["epsilon"])
    except KeyError as e:
        raise ScenarioError(f"malformed config: missing field {e.args[0]!r}")
    if lam.shape != (config.net.n_links,):
        raise ScenarioError(f"dimension mismatch: {lam.size} arrival rates "
                            f"for {config.net.n_links} links")
    arrivals = ArrivalProcess(lam, a_max=float(extras.get("a_max", 2.0)),
                              seed=config.params.seed)
    report = run_stability_experiment(
        config.net, arrivals, config.m,
        mode=extras.get("mode", "known_rates"), epsilon=epsilon,
        params=config.params, horizon=int(extras.get("horizon", 100_000)),
        n_seeds=int(extras.get("n_seeds", 50)),
        stop_when_drained=bool(extras.get("stop_when_drained", True)),
        min_frames=int(extras.get("min_frames", 0)),
        record_queues=bool(extras.get("record_queues", False)))
    (out / "stability.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


def run_scenario(config: ScenarioConfig, out_dir, parallel: int = 1):
    """Dispatch a parsed scenario to its driver, creating the output dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.command == "run":
        return drive_run(config, out, parallel=parallel)
    if config.command == "sweep-alpha":
        return drive_sweep_alpha(config, out, parallel=parallel)
    if config.command == "sweep-frame":
        return drive_sweep_frame(config, out, parallel=parallel)
    if config.command == "region":
        return drive_region(config, out)
    if config.command == "stability":
        return drive_stability(config, out)
    raise ScenarioError(f"unknown command {config.command!r}")
