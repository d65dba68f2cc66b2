"""Steady-state genetic algorithm over fixed-template genomes.

RNG contract, one ``numpy.random.Generator`` seeded with the master seed,
consumed per step in this order:

1. technique index (``integers(3)``)
2. the technique's own draws (none for elitism; ``i`` then ``j`` for
   tournament; two ``random()`` for proportionate)
3. crossover point ``k`` (``integers(1, L)``), then orientation (``integers(2)``)
4. mutation gate (``random()``), mutation point (``integers(L)``), replacement
   gene (``integers(n_ops)``); all three are drawn even when the gate is closed
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .expr import N_BINARY, N_UNARY, EncodingType, Genome, GenomeError, format_genome, render_formula
from .fitness import EARLY_REJECTED, Evaluator

log = logging.getLogger(__name__)

TECHNIQUES = ("elitism", "tournament", "proportionate")


@dataclass
class Individual:
    genome: Genome
    fitness: float
    eval_status: str = "completed"
    eval_index: int = -1

    def __post_init__(self):
        if not 0.0 <= self.fitness <= 1.0:
            raise ValueError(f"fitness {self.fitness} outside [0, 1]")

    def to_dict(self):
        return {"genome": format_genome(self.genome), "fitness": self.fitness,
                "status": self.eval_status, "eval_index": self.eval_index}


def _sort_key(ind: Individual):
    return (-ind.fitness, ind.eval_index)


class Population:
    """Members sorted by descending fitness, ties by earlier evaluation index."""

    def __init__(self, members):
        self.members = sorted(members, key=_sort_key)

    def __len__(self):
        return len(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def __iter__(self):
        return iter(self.members)

    @property
    def fitnesses(self):
        return np.array([m.fitness for m in self.members])

    @property
    def best(self) -> Individual:
        return self.members[0]

    @property
    def worst(self) -> Individual:
        return self.members[-1]

    def replace_worst(self, ind: Individual):
        self.members[-1] = ind
        self.members.sort(key=_sort_key)

    def is_sorted(self) -> bool:
        keys = [_sort_key(m) for m in self.members]
        return all(a <= b for a, b in zip(keys, keys[1:]))


@dataclass
class GAConfig:
    encoding: EncodingType = EncodingType.TYPE1
    pop_size: int = 30
    budget: int = 2000
    stagnation: int = 200
    mutation_prob: float = 1.0
    seed: int = 0
    jobs: int = 1
    max_init_evals: int | None = None  # default 50 * pop_size

    def __post_init__(self):
        self.encoding = EncodingType.parse(self.encoding)
        problems = self.problems()
        if problems:
            raise ValueError("invalid GA config: " + "; ".join(problems))

    def problems(self):
        out = []
        if self.pop_size < 2:
            out.append("pop_size must be >= 2")
        if self.budget < 0:
            out.append("budget must be >= 0")
        if self.stagnation < 1:
            out.append("stagnation must be >= 1")
        if not 0.0 <= self.mutation_prob <= 1.0:
            out.append("mutation_prob must lie in [0, 1]")
        if self.jobs < 1:
            out.append("jobs must be >= 1")
        return out

    def to_dict(self):
        d = asdict(self)
        d["encoding"] = self.encoding.value
        return d


@dataclass
class GARunState:
    population: Population
    rng: np.random.Generator
    evaluator: Evaluator
    best_history: list = field(default_factory=list)
    stagnation: int = 0
    steps: int = 0

    @property
    def evaluations(self) -> int:
        return self.evaluator.counter


@dataclass
class StepInfo:
    technique: str
    parent_indices: tuple
    offspring: Genome
    fitness: float
    replaced: bool


# --------------------------------------------------------------------------
# variation operators


def random_genome(encoding, rng) -> Genome:
    enc = EncodingType.parse(encoding)
    genes = [int(rng.integers(N_UNARY)) for _ in range(enc.n_unary)]
    genes += [int(rng.integers(N_BINARY)) for _ in range(enc.n_binary)]
    return Genome(enc, tuple(genes))


def select(population: Population, rng, technique: str | None = None):
    """Pick two parent indices; returns ``(technique, i, j)``.

    ``technique`` forces a choice but the technique draw is still consumed.
    """
    if len(population) < 2:
        raise ValueError("selection needs at least two members")
    t = TECHNIQUES[int(rng.integers(3))]
    technique = technique or t
    S = len(population)
    if technique == "elitism":
        return technique, 0, 1
    if technique == "tournament":
        i = int(rng.integers(0, S - 1))
        j = int(rng.integers(i + 1, S))
        return technique, i, j
    if technique == "proportionate":
        f = population.fitnesses
        total = f.sum()
        p = f / total if total > 0 else np.full(S, 1.0 / S)
        cdf = np.cumsum(p)
        cdf[-1] = 1.0
        # side="right" skips zero-probability members sitting on flat cdf steps
        picks = [min(int(np.searchsorted(cdf, rng.random(), side="right")), S - 1) for _ in range(2)]
        return technique, picks[0], picks[1]
    raise ValueError(f"unknown selection technique {technique!r}")


def crossover(p1: Genome, p2: Genome, rng, k: int | None = None, orientation: int | None = None) -> Genome:
    """Single-point crossover; gene layout keeps every slot type-valid."""
    if p1.encoding != p2.encoding:
        raise GenomeError(f"cannot cross {p1.encoding.value} with {p2.encoding.value}")
    L = len(p1.genes)
    k_draw, o_draw = int(rng.integers(1, L)), int(rng.integers(2))
    k = k_draw if k is None else k
    orientation = o_draw if orientation is None else orientation
    a, b = (p1, p2) if orientation == 0 else (p2, p1)
    return Genome(p1.encoding, a.genes[:k] + b.genes[k:])


def mutate(g: Genome, rng, prob: float = 1.0) -> Genome:
    """Resample one slot from its own operator table (possibly to the same value)."""
    gate = rng.random()
    L = len(g.genes)
    pos = int(rng.integers(L))
    n_ops = N_UNARY if g.is_unary_slot(pos) else N_BINARY
    gene = int(rng.integers(n_ops))
    if gate >= prob:
        return g
    genes = list(g.genes)
    genes[pos] = gene
    return Genome(g.encoding, tuple(genes))


# --------------------------------------------------------------------------
# loop


def init_population(S: int, encoding, evaluator: Evaluator, rng, jobs: int = 1,
                    max_evals: int | None = None) -> Population:
    """Random initial population; early-rejected candidates are resampled.

    Candidates are drawn in batches of the number still missing, so the
    genomes and their evaluation indices do not depend on ``jobs``.
    """
    if S < 2:
        raise ValueError("population size must be >= 2")
    max_evals = 50 * S if max_evals is None else max_evals
    members, rejected = [], []
    spent = 0
    while len(members) < S:
        if spent >= max_evals:
            # the schedule rejects nearly everything; keep the best rejects rather than loop forever
            log.warning("initialization hit %d evaluations; filling with rejected candidates", spent)
            rejected.sort(key=_sort_key)
            members += rejected[: S - len(members)]
            break
        batch = [random_genome(encoding, rng) for _ in range(S - len(members))]
        start = evaluator.counter
        results = evaluator.evaluate_batch(batch, jobs=jobs)
        spent += len(batch)
        for n, (g, r) in enumerate(zip(batch, results)):
            ind = Individual(g, float(r.fitness), r.status, start + n)
            (rejected if r.status == EARLY_REJECTED else members).append(ind)
    return Population(members)


def new_state(config: GAConfig, evaluator: Evaluator) -> GARunState:
    rng = np.random.default_rng(config.seed)
    pop = init_population(config.pop_size, config.encoding, evaluator, rng, config.jobs, config.max_init_evals)
    return GARunState(pop, rng, evaluator, best_history=[pop.best.fitness])


def step(state: GARunState, mutation_prob: float = 1.0) -> StepInfo:
    """One select / crossover / mutate / evaluate / replace iteration (in place)."""
    pop, rng = state.population, state.rng
    technique, i, j = select(pop, rng)
    child = crossover(pop[i].genome, pop[j].genome, rng)
    child = mutate(child, rng, mutation_prob)
    idx = state.evaluator.claim()[0]
    try:
        res = state.evaluator.cached_evaluate(child, idx)
        fitness, status = float(res.fitness), res.status
    except Exception as e:  # noqa: BLE001 - a failed evaluation must not stop the search
        log.warning("evaluation %d of %s failed: %s", idx, format_genome(child), e)
        fitness, status = 0.0, "diverged"
    replaced = fitness > pop.worst.fitness
    if replaced:
        pop.replace_worst(Individual(child, fitness, status, idx))
        state.stagnation = 0
    else:
        state.stagnation += 1
    state.steps += 1
    state.best_history.append(pop.best.fitness)
    return StepInfo(technique, (i, j), child, fitness, replaced)


def run(config: GAConfig, evaluator: Evaluator, callback=None) -> dict:
    """Initialize, then step until the evaluation budget or stagnation limit."""
    state = new_state(config, evaluator)
    cause = "budget"
    while True:
        if state.evaluations >= config.budget:
            cause = "budget"
            break
        if state.stagnation >= config.stagnation:
            cause = "stagnation"
            break
        info = step(state, config.mutation_prob)
        if callback is not None:
            callback(state, info)
    return make_report(config, state, cause)


def make_report(config: GAConfig, state: GARunState, cause: str, extra: dict | None = None) -> dict:
    best = state.population.best
    report = {
        "config": config.to_dict(),
        "seed": config.seed,
        "best_genome": format_genome(best.genome),
        "best_formula": render_formula(best.genome),
        "best_fitness": best.fitness,
        "population": [m.to_dict() for m in state.population],
        "stop_cause": cause,
        "steps": state.steps,
        "evaluations": state.evaluations,
        "best_history": state.best_history,
        "log_path": None if state.evaluator.log_path is None else str(state.evaluator.log_path),
    }
    if extra:
        report.update(extra)
    return report


def write_report(report: dict, path):
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
