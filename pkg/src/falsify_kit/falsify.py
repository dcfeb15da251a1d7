"""Falsification orchestration: sample -> simulate -> monitor -> record.

Three modes share one loop. falsify and fuzz score each run by the
property's robustness; synthesize scores by the negated objective so that
"falsifying" the negation means finding a satisfying (safe) configuration.
fuzz never feeds scores back, forcing passive behavior even from active
samplers. Scores below zero qualify for the counterexample table in every
mode; ties at exactly zero do not.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid, SimulatorError
from .mtl import Formula, parse_formula, robustness, satisfies
from .samplers import Feedback, make_sampler
from .sims import make_simulator
from .space import flatten
from .table import ErrorTable
from . import protocol

MODES = ("falsify", "fuzz", "synthesize")

# Fixed spawn keys for per-consumer child RNG streams derived from the
# single run seed.
_SAMPLER_STREAM = 0
_RESTART_STREAM = 1


@dataclass(frozen=True)
class InProcessSim:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SocketSim:
    host: str = "127.0.0.1"
    port: int = protocol.DEFAULT_PORT
    timeout: float = protocol.DEFAULT_TIMEOUT


@dataclass(frozen=True)
class Objective:
    """Score source for synthesize mode: the robustness of a formula or a
    designated signal's final value, both negated by the loop."""
    kind: str  # robustness | final_signal
    formula: object = None
    signal: str = ""

    @staticmethod
    def from_spec(spec):
        if isinstance(spec, str):
            return Objective("robustness", formula=parse_formula(spec))
        kind = spec.get("kind")
        if kind == "robustness":
            f = spec.get("property")
            return Objective("robustness",
                             formula=f if isinstance(f, Formula) else parse_formula(f))
        if kind == "final_signal":
            return Objective("final_signal", signal=str(spec["signal"]))
        raise ConfigInvalid(f"unknown objective kind {kind!r}", "objective.kind")

    def value(self, trace):
        if self.kind == "robustness":
            return robustness(self.formula, trace, 0)
        return float(trace.signals[self.signal][-1])


@dataclass
class RunConfig:
    space: object
    prop: object                 # Formula or None (synthesize may omit it)
    sampler: dict
    mode: str
    budget: int
    seed: int
    simulator: object            # InProcessSim | SocketSim
    stop_on_first: bool = False
    objective: Objective = None
    restart_on_stagnation: bool = False
    restart_after: int = 100

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigInvalid(f"unknown mode {self.mode!r}", "mode")
        if int(self.budget) < 1:
            raise ConfigInvalid("budget must be >= 1", "budget")
        self.budget = int(self.budget)
        if isinstance(self.prop, str):
            self.prop = parse_formula(self.prop)
        if self.mode == "synthesize":
            if self.objective is None:
                raise ConfigInvalid("synthesize mode requires an objective", "objective")
            if not isinstance(self.objective, Objective):
                self.objective = Objective.from_spec(self.objective)
        elif self.prop is None:
            raise ConfigInvalid(f"{self.mode} mode requires a property", "property")


@dataclass(frozen=True)
class RunRecord:
    run_id: int
    point: object
    score: float          # None when the simulator errored
    satisfied: bool       # None when the simulator errored
    error: str = None


@dataclass
class RunResult:
    counterexamples: ErrorTable
    all_runs: list
    best: tuple           # (point, score) over successful runs, or None
    simulations_used: int
    wall_time: float


def _child_rng(seed, stream, epoch=0):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, epoch)))


def _score_run(config, trace):
    """(score, satisfied) for one trace under the config's mode."""
    if config.mode == "synthesize":
        score = -config.objective.value(trace)
        if config.prop is not None:
            sat = satisfies(config.prop, trace, 0)
        else:
            sat = score < 0
        return score, sat
    return robustness(config.prop, trace, 0), satisfies(config.prop, trace, 0)


class _Simulation:
    """Uniform episode interface over in-process and socket simulators."""

    def __init__(self, config):
        self._server = None
        sim = config.simulator
        if isinstance(sim, InProcessSim):
            self._fn = make_simulator(sim.name, sim.params)
        elif isinstance(sim, SocketSim):
            self._server = protocol.EpisodeServer(config.space, sim.host, sim.port,
                                                  sim.timeout)
            self._server.accept_and_handshake()
            self._fn = None
        else:
            raise ConfigInvalid(f"unknown simulator spec {sim!r}", "simulator")

    def episode(self, run_id, point):
        if self._server is not None:
            return self._server.serve_episode(run_id, point)
        try:
            return self._fn(point.assignments)
        except SimulatorError:
            raise
        except Exception as exc:
            raise SimulatorError(f"{type(exc).__name__}: {exc}", run_id=run_id) from exc

    def close(self):
        if self._server is not None:
            self._server.close()


def run(config):
    """Execute up to config.budget simulations and collect qualifying rows.

    Simulator errors reported by the episode consume budget and are
    recorded as failed runs; they do not abort the campaign.
    """
    started = time.perf_counter()
    table = ErrorTable(config.space)
    all_runs = []
    best = None
    feeds_back = config.mode != "fuzz"
    epoch = 0
    sampler = make_sampler(config.sampler, config.space,
                           _child_rng(config.seed, _SAMPLER_STREAM, epoch))
    since_improvement = 0
    best_seen = np.inf
    sim = _Simulation(config)
    used = 0
    try:
        for run_id in range(config.budget):
            point = sampler.next_point()
            used += 1
            try:
                trace = sim.episode(run_id, point)
            except SimulatorError as exc:
                all_runs.append(RunRecord(run_id, point, None, None, str(exc)))
                continue
            score, sat = _score_run(config, trace)
            all_runs.append(RunRecord(run_id, point, score, sat))
            if feeds_back:
                sampler.observe(Feedback(point, score))
            if best is None or score < best[1]:
                best = (point, score)
            qualifying = score < 0
            if qualifying:
                table.insert(point, score, run_id)
                if config.stop_on_first:
                    break
            if config.restart_on_stagnation:
                if score < best_seen:
                    best_seen = score
                    since_improvement = 0
                else:
                    since_improvement += 1
                    if since_improvement >= config.restart_after:
                        epoch += 1
                        sampler = make_sampler(
                            config.sampler, config.space,
                            _child_rng(config.seed, _SAMPLER_STREAM, epoch))
                        since_improvement = 0
    finally:
        sim.close()
    return RunResult(table, all_runs, best, used, time.perf_counter() - started)


def replay(config, point):
    """Re-simulate one point and re-evaluate the monitor.

    For in-process simulators the result is bit-identical to the original
    run with the same point.
    """
    flatten(config.space, point)  # raises PointSpaceMismatch if foreign
    sim = _Simulation(config)
    try:
        trace = sim.episode(0, point)
    finally:
        sim.close()
    score, sat = _score_run(config, trace)
    return trace, score, sat
