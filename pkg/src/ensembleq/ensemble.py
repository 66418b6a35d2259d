"""Seeded Monte Carlo ensembles over registered scenarios.

Each scenario is first reduced to an exact *outcome tree*: one node per
readout reached along a branch, holding the Born probabilities of that
readout's outcomes and the child node reached by each outcome.

* collapse mode: children are the ``collapse_branches`` post-states, so the
  tree is sequential collapse enumerated exactly.
* unitary mode: reading a meter does not touch the stored state. A readout's
  probabilities come from the state at its stage, conditioned on earlier
  readouts of the same stage (a sub-ensemble of one ket); readouts at
  different stages are independent draws.

Trials then only walk the tree. Trial ``i`` draws its uniforms from its own
SplitMix64 stream keyed by ``(master_seed, i)`` (layout in ``_walk_py``), so
serial, chunked and threaded runs agree bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ensembleq import _sampling
from ensembleq._walk_py import stream_ids
from ensembleq.measurement import (
    Mode,
    collapse_branches,
    condition_on_measurement,
    outcome_distribution,
)
from ensembleq.scenarios import Evolve, Scenario, get_scenario

# Probabilities below this are treated as exact zeros before building CDFs.
PROBABILITY_FLOOR = 1e-13
DIVERGENCE_THRESHOLD = 1e-9

SEED_MODULUS = 2 ** 64


def _clean(probs: np.ndarray) -> np.ndarray:
    p = np.where(np.asarray(probs, dtype=float) < PROBABILITY_FLOOR, 0.0, probs)
    return p / p.sum()


@dataclass(frozen=True, eq=False)
class OutcomeTree:
    readouts: tuple[str, ...]
    outcome_names: tuple[tuple[str, ...], ...]
    probs: np.ndarray
    cdf: np.ndarray
    offsets: np.ndarray
    sizes: np.ndarray
    children: np.ndarray

    @property
    def depth(self) -> int:
        return len(self.readouts)

    def joint(self) -> dict[tuple[int, ...], float]:
        """Exact probability of every reachable outcome tuple."""
        out: dict[tuple[int, ...], float] = {}

        def walk(node: int, prefix: tuple[int, ...], weight: float):
            off, size = self.offsets[node], self.sizes[node]
            for j in range(size):
                p = self.probs[off + j]
                if p == 0.0:
                    continue
                child = self.children[off + j]
                if child < 0:
                    out[prefix + (j,)] = out.get(prefix + (j,), 0.0) + weight * p
                else:
                    walk(child, prefix + (j,), weight * p)

        walk(0, (), 1.0)
        return out

    def marginals(self) -> dict[str, dict[str, float]]:
        result = {name: dict.fromkeys(names, 0.0) for name, names in zip(self.readouts, self.outcome_names)}
        for outcome, p in self.joint().items():
            for name, names, j in zip(self.readouts, self.outcome_names, outcome):
                result[name][names[j]] += float(p)
        return result


def outcome_tree(scenario: Scenario, mode: Mode | str) -> OutcomeTree:
    mode = Mode(mode)
    steps = scenario.steps
    nodes: list[tuple[np.ndarray, list[int]] | None] = []

    def visit(state, view, i):
        while i < len(steps) and isinstance(steps[i], Evolve):
            state = steps[i].fn(state)
            view = state
            i += 1
        if i == len(steps):
            return -1
        model = steps[i].model(mode)
        index = len(nodes)
        nodes.append(None)
        if mode is Mode.UNITARY:
            probs = _clean(outcome_distribution(view, model))
            children = [
                visit(state, condition_on_measurement(view, model, r), i + 1) if p > 0 else -1
                for r, p in enumerate(probs)
            ]
        else:
            raw = np.zeros(model.object_dim)
            posts = {}
            for r, p, post in collapse_branches(state, model):
                raw[r], posts[r] = p, post
            probs = _clean(raw)
            children = [visit(posts[r], posts[r], i + 1) if p > 0 else -1 for r, p in enumerate(probs)]
        nodes[index] = (probs, children)
        return index

    start = scenario.initial_state()
    visit(start, start, 0)
    sizes = np.array([len(p) for p, _ in nodes], dtype=np.int64)
    offsets = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
    probs = np.concatenate([p for p, _ in nodes])
    cdfs = []
    for p, _ in nodes:
        c = np.cumsum(p)
        c[np.flatnonzero(p)[-1]:] = 1.0
        cdfs.append(c)
    readouts = scenario.readouts
    return OutcomeTree(
        readouts=tuple(r.name for r in readouts),
        outcome_names=tuple(r.outcome_names for r in readouts),
        probs=probs,
        cdf=np.ascontiguousarray(np.concatenate(cdfs)),
        offsets=offsets,
        sizes=sizes,
        children=np.array([c for _, ch in nodes for c in ch], dtype=np.int64),
    )


def exact_distributions(scenario: Scenario | str, mode: Mode | str) -> dict[str, dict[str, float]]:
    """Non-sampled per-readout outcome distributions."""
    if isinstance(scenario, str):
        scenario = get_scenario(scenario)
    return outcome_tree(scenario, mode).marginals()


@dataclass(frozen=True, slots=True)
class TrialRecord:
    trial: int
    outcomes: dict[str, str]
    mode: str
    stream: int


@dataclass(frozen=True)
class EnsembleStats:
    """Outcome counts per readout, with binomial standard errors.

    ``lineage`` lists the post-selection predicates applied, outermost last;
    ``parent_id`` names the stats the subset was drawn from.
    """

    scenario: str
    mode: str
    seed: int
    n_trials: int
    counts: dict[str, dict[str, int]]
    lineage: tuple[str, ...] = ()
    parent_id: str | None = None

    @property
    def id(self) -> str:
        base = f"{self.scenario}/{self.mode}/seed={self.seed}"
        return "/".join((base,) + self.lineage)

    @property
    def empty(self) -> bool:
        return self.n_trials == 0

    @property
    def frequencies(self) -> dict[str, dict[str, float | None]]:
        n = self.n_trials
        return {r: {o: (c / n if n else None) for o, c in counts.items()} for r, counts in self.counts.items()}

    @property
    def stderr(self) -> dict[str, dict[str, float | None]]:
        """Normal-approximation binomial errors ``sqrt(p (1 - p) / n)``."""
        n = self.n_trials
        return {
            r: {o: (math.sqrt(f * (1 - f) / n) if n else None) for o, f in freqs.items()}
            for r, freqs in self.frequencies.items()
        }

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "scenario": self.scenario,
            "mode": self.mode,
            "seed": self.seed,
            "n": self.n_trials,
            "empty": self.empty,
            "lineage": list(self.lineage),
            "parent_id": self.parent_id,
            "counts": self.counts,
            "frequencies": self.frequencies,
            "stderr": self.stderr,
        }


def _check_n(n: int) -> None:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"number of trials must be a positive integer, got {n!r}")


def _walk(tree: OutcomeTree, seed: int, n: int, workers: int, kernel) -> np.ndarray:
    args = (tree.cdf, tree.offsets, tree.sizes, tree.children, tree.depth)
    if workers <= 1 or n < 2 * workers:
        return kernel(seed, 0, n, *args)
    bounds = np.linspace(0, n, workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(lambda b: kernel(seed, int(b[0]), int(b[1] - b[0]), *args),
                         zip(bounds[:-1], bounds[1:]))
        return np.concatenate(list(parts), axis=0)


@dataclass
class TrialBatch:
    """Raw result of ``sample_outcomes``: outcome indices with their tree."""

    scenario: Scenario
    mode: Mode
    seed: int
    tree: OutcomeTree
    outcomes: np.ndarray

    def stats(self) -> EnsembleStats:
        counts = {}
        for d, (name, names) in enumerate(zip(self.tree.readouts, self.tree.outcome_names)):
            tally = np.bincount(self.outcomes[:, d], minlength=len(names))
            counts[name] = {o: int(c) for o, c in zip(names, tally)}
        return EnsembleStats(self.scenario.id, self.mode.value, self.seed, len(self.outcomes), counts)

    def records(self) -> list[TrialRecord]:
        streams = stream_ids(self.seed, 0, len(self.outcomes)).tolist()
        names = self.tree.outcome_names
        readouts = self.tree.readouts
        mode = self.mode.value
        return [
            TrialRecord(i, {r: names[d][j] for d, (r, j) in enumerate(zip(readouts, row))}, mode, streams[i])
            for i, row in enumerate(self.outcomes.tolist())
        ]


def _resolve(scenario: Scenario | str, intermediate_readout: bool) -> Scenario:
    if isinstance(scenario, Scenario):
        return scenario
    return get_scenario(scenario, intermediate_readout=intermediate_readout)


def sample_outcomes(
    scenario: Scenario | str,
    mode: Mode | str,
    n: int,
    master_seed: int,
    *,
    workers: int = 1,
    intermediate_readout: bool = False,
    kernel=None,
) -> TrialBatch:
    """Run ``n`` trials and keep the outcomes as an ``(n, readouts)`` index array."""
    _check_n(n)
    scenario = _resolve(scenario, intermediate_readout)
    mode = Mode(mode)
    seed = int(master_seed) % SEED_MODULUS
    tree = outcome_tree(scenario, mode)
    outcomes = _walk(tree, seed, int(n), workers, kernel or _sampling.walk_trees)
    return TrialBatch(scenario, mode, seed, tree, outcomes)


def run_trials(
    scenario: Scenario | str,
    mode: Mode | str,
    n: int,
    master_seed: int,
    *,
    workers: int = 1,
    intermediate_readout: bool = False,
) -> tuple[list[TrialRecord], EnsembleStats]:
    batch = sample_outcomes(scenario, mode, n, master_seed, workers=workers,
                            intermediate_readout=intermediate_readout)
    return batch.records(), batch.stats()


def _predicate_text(predicate: Mapping[str, str]) -> str:
    return ",".join(f"{k}={v}" for k, v in sorted(predicate.items()))


def post_select(
    records: Sequence[TrialRecord],
    predicate: Mapping[str, str],
    parent: EnsembleStats | None = None,
) -> EnsembleStats:
    """Statistics of the sub-ensemble whose readouts match ``predicate``.

    An empty match is returned as stats with ``n_trials == 0`` (``empty``
    is true), not raised.
    """
    if parent is not None:
        outcome_names = {r: tuple(c) for r, c in parent.counts.items()}
    else:
        outcome_names = {}
        for rec in records:
            for r, o in rec.outcomes.items():
                names = outcome_names.setdefault(r, ())
                if o not in names:
                    outcome_names[r] = names + (o,)
    for label in predicate:
        if label not in outcome_names:
            raise KeyError(f"unknown readout {label!r}; known: {sorted(outcome_names)}")
    wanted = {k: str(v) for k, v in predicate.items()}
    chosen = [rec for rec in records if all(rec.outcomes[k] == v for k, v in wanted.items())]
    counts = {r: dict.fromkeys(names, 0) for r, names in outcome_names.items()}
    for rec in chosen:
        for r, o in rec.outcomes.items():
            counts[r][o] += 1
    if parent is not None:
        scenario, mode, seed, lineage = parent.scenario, parent.mode, parent.seed, parent.lineage
        parent_id = parent.id
    elif records:
        scenario, mode, seed, lineage, parent_id = "?", records[0].mode, -1, (), None
    else:
        scenario, mode, seed, lineage, parent_id = "?", "?", -1, (), None
    return EnsembleStats(scenario, mode, seed, len(chosen), counts,
                         lineage + (_predicate_text(wanted),), parent_id)


@dataclass
class ModeComparison:
    scenario: str
    n: int
    seed: int
    intermediate_readout: bool
    stats: dict[str, EnsembleStats]
    exact: dict[str, dict[str, dict[str, float]]]
    max_difference: float
    divergent: bool = field(init=False)

    def __post_init__(self):
        self.divergent = self.max_difference > DIVERGENCE_THRESHOLD

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "intermediate_readout": self.intermediate_readout,
            "n": self.n,
            "seed": self.seed,
            "modes": {
                m: {
                    "counts": s.counts,
                    "frequencies": s.frequencies,
                    "stderr": s.stderr,
                    "exact": self.exact[m],
                }
                for m, s in self.stats.items()
            },
            "max_exact_difference": self.max_difference,
            "divergence": self.divergent,
        }


def compare_modes(
    scenario: Scenario | str,
    n: int,
    master_seed: int,
    *,
    workers: int = 1,
    intermediate_readout: bool = False,
) -> ModeComparison:
    """Sample both modes and compare their exact per-readout predictions."""
    _check_n(n)
    scenario = _resolve(scenario, intermediate_readout)
    stats, exact = {}, {}
    for mode in Mode:
        batch = sample_outcomes(scenario, mode, n, master_seed, workers=workers)
        stats[mode.value] = batch.stats()
        exact[mode.value] = batch.tree.marginals()
    diff = max(
        abs(p - exact[Mode.COLLAPSE.value][r][o])
        for r, dist in exact[Mode.UNITARY.value].items()
        for o, p in dist.items()
    )
    return ModeComparison(scenario.id, int(n), int(master_seed) % SEED_MODULUS,
                          scenario.intermediate_readout, stats, exact, float(diff))
