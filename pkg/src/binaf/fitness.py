"""Fitness evaluation: train a binary network with a candidate function and score it.

The evaluator owns the global evaluation counter. Every request (cache hits
included) takes the next index; the per-evaluation training seed and the
active early-rejection threshold are both functions of that index, which is
what makes runs reproducible regardless of ``jobs``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .bnn import Adam, ModelSpec, TinyBinNet, TrainingDiverged, train_epoch
from .bnn.layers import DegenerateBatchError
from .data import Dataset
from .expr import Genome, canonicalize, decode, format_genome

log = logging.getLogger(__name__)

DEFAULT_SCHEDULE = ((0, 0.11), (500, 0.25), (1500, 0.35), (3000, 0.40))

COMPLETED = "completed"
EARLY_REJECTED = "early_rejected"
DIVERGED = "diverged"


@dataclass(frozen=True)
class FitnessConfig:
    epochs: int = 15
    rejection_schedule: tuple = DEFAULT_SCHEDULE
    lr: float = 5e-3
    batch_size: int = 128
    betas: tuple = (0.9, 0.999)
    seed: int = 0
    arch: str = "dense"
    width: int = 64
    n_blocks: int = 2
    shortcut: bool = True
    t_clip: float = 1.0

    def __post_init__(self):
        sched = tuple((int(b), float(t)) for b, t in self.rejection_schedule)
        object.__setattr__(self, "rejection_schedule", sched)
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        problems = self.problems()
        if problems:
            raise ValueError("invalid fitness config: " + "; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.epochs < 1:
            out.append("epochs must be >= 1")
        if not self.rejection_schedule:
            out.append("rejection_schedule must not be empty")
        bounds = [b for b, _ in self.rejection_schedule]
        ts = [t for _, t in self.rejection_schedule]
        if bounds and bounds[0] != 0:
            out.append("rejection_schedule must start at evaluation 0")
        if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
            out.append("rejection_schedule boundaries must increase")
        if any(t2 < t1 for t1, t2 in zip(ts, ts[1:])):
            out.append("rejection_schedule thresholds must be non-decreasing")
        if any(not 0 <= t < 1 for t in ts):
            out.append("rejection thresholds must lie in [0, 1)")
        if self.lr <= 0:
            out.append("lr must be positive")
        if self.batch_size < 2:
            out.append("batch_size must be >= 2")
        if len(self.betas) != 2 or not all(0 <= b < 1 for b in self.betas):
            out.append("betas must be two values in [0, 1)")
        return out

    def threshold_at(self, eval_index: int) -> float:
        """Active early-rejection threshold for a global evaluation index."""
        active = self.rejection_schedule[0][1]
        for boundary, t in self.rejection_schedule:
            if eval_index >= boundary:
                active = t
        return active

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rejection_schedule"] = [list(p) for p in self.rejection_schedule]
        d["betas"] = list(self.betas)
        return d

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class FitnessResult:
    fitness: float
    status: str
    epoch_history: list = field(default_factory=list)
    wall_time: float = 0.0
    eval_index: int = -1
    seed: int = 0
    threshold_active: float = 0.0
    genome: str = ""
    canonical_genome: str = ""

    def record(self, eval_index=None, cache_hit=False) -> dict:
        """One JSONL log line."""
        rec = {
            "eval_index": self.eval_index if eval_index is None else eval_index,
            "genome": self.genome,
            "canonical_genome": self.canonical_genome,
            "status": self.status,
            "fitness": self.fitness,
            "epoch_history": list(self.epoch_history),
            "seed": self.seed,
            "wall_time_s": round(self.wall_time, 6),
            "threshold_active": self.threshold_active,
        }
        if cache_hit:
            rec["cache_hit"] = True
        return rec


def derive_seed(master_seed: int, eval_index: int) -> int:
    return int(np.random.SeedSequence([int(master_seed), int(eval_index)]).generate_state(1, np.uint32)[0])


# --------------------------------------------------------------------------
# trainers


class BNNTrainer:
    """Builds a fresh TinyBinNet per evaluation and trains it epoch by epoch."""

    def __init__(self, dataset: Dataset, config: FitnessConfig):
        self.dataset = dataset
        self.config = config
        self.spec = ModelSpec(
            dataset.input_shape, dataset.n_classes, arch=config.arch, width=config.width,
            n_blocks=config.n_blocks, shortcut=config.shortcut, t_clip=config.t_clip,
        )

    def start(self, af, seed: int) -> "TrainingSession":
        return TrainingSession(self, af, seed)


class TrainingSession:
    def __init__(self, trainer: BNNTrainer, af, seed: int):
        ss = np.random.SeedSequence(seed)
        init_ss, shuffle_ss = ss.spawn(2)
        self.trainer = trainer
        self.model = TinyBinNet(trainer.spec, af, rng=np.random.default_rng(init_ss))
        cfg = trainer.config
        self.optimizer = Adam(cfg.lr, cfg.betas)
        self.rng = np.random.default_rng(shuffle_ss)
        self.epochs_run = 0

    def run_epoch(self) -> float:
        """Train one epoch; return validation accuracy."""
        ds = self.trainer.dataset
        with np.errstate(all="ignore"):
            train_epoch(self.model, ds.x_train, ds.y_train, self.optimizer, self.trainer.config.batch_size, self.rng)
            self.epochs_run += 1
            return self.model.accuracy(ds.x_val, ds.y_val)


def train_fitness(session, epochs: int, threshold: float):
    """Run the early-rejection protocol on a session.

    Returns ``(status, fitness, history)``.
    """
    history = []
    try:
        for epoch in range(epochs):
            acc = float(session.run_epoch())
            history.append(acc)
            if not np.isfinite(acc):
                return DIVERGED, 0.0, history
            if epoch == 0 and acc < threshold:
                return EARLY_REJECTED, acc, history
    except (TrainingDiverged, DegenerateBatchError, FloatingPointError) as e:
        log.debug("training diverged: %s", e)
        return DIVERGED, 0.0, history
    return COMPLETED, history[-1], history


# --------------------------------------------------------------------------
# analytic fitness (cheap deterministic stand-in for training)


def _unit_hash(text: str) -> float:
    h = hashlib.blake2b(text.encode(), digest_size=8).digest()
    return int.from_bytes(h, "little") / 2.0 ** 64


def analytic_fitness(genome: Genome) -> float:
    """Deterministic score in [0.05, 0.95].

    A separable per-slot table (hash-seeded) gives the landscape smooth
    structure that crossover can exploit; a small whole-genome hash term
    breaks ties so the maximum over a search space is unique.
    """
    enc = genome.encoding.value
    slot = np.mean([_unit_hash(f"{enc}/{i}/{g}") for i, g in enumerate(genome.genes)])
    jitter = _unit_hash(f"{enc}/{genome.genes}")
    return float(0.05 + 0.9 * (0.999 * slot + 0.001 * jitter))


# --------------------------------------------------------------------------
# evaluators


class Evaluator:
    """Base evaluator: counter, cache, JSONL log and batch evaluation.

    Subclasses implement :meth:`_score`.
    """

    def __init__(self, config: FitnessConfig | None = None, log_path=None, cache: dict | None = None):
        self.config = config or FitnessConfig()
        self.cache = {} if cache is None else cache
        self.counter = 0
        self.log_path = log_path
        self.records: list[dict] = []
        self._lock = threading.Lock()
        if log_path is not None:
            open(log_path, "w").close()

    # -- counter / logging

    def claim(self, n: int = 1) -> list[int]:
        with self._lock:
            start = self.counter
            self.counter += n
        return list(range(start, start + n))

    def _emit(self, rec: dict):
        with self._lock:
            self.records.append(rec)
            if self.log_path is not None:
                with open(self.log_path, "a") as fh:
                    fh.write(json.dumps(rec, sort_keys=False) + "\n")

    def cache_key(self, genome: Genome):
        return (format_genome(canonicalize(genome)), self.fingerprint())

    def fingerprint(self) -> str:
        return self.config.fingerprint()

    # -- evaluation

    def _score(self, genome: Genome, eval_index: int, seed: int, threshold: float) -> FitnessResult:
        raise NotImplementedError

    def evaluate(self, genome: Genome, eval_index: int | None = None, log_record: bool = True) -> FitnessResult:
        """Uncached evaluation at ``eval_index`` (claims the next index if None)."""
        if eval_index is None:
            eval_index = self.claim()[0]
        seed = derive_seed(self.config.seed, eval_index)
        threshold = self.config.threshold_at(eval_index)
        t0 = time.perf_counter()
        res = self._score(genome, eval_index, seed, threshold)
        res.wall_time = time.perf_counter() - t0
        res.eval_index, res.seed, res.threshold_active = eval_index, seed, threshold
        res.genome = format_genome(genome)
        res.canonical_genome = format_genome(canonicalize(genome))
        if not 0.0 <= res.fitness <= 1.0 or not np.isfinite(res.fitness):
            res.fitness, res.status = 0.0, DIVERGED
        if log_record:
            self._emit(res.record())
        return res

    def cached_evaluate(self, genome: Genome, eval_index: int | None = None) -> FitnessResult:
        """Evaluate through the cache; a hit still consumes an evaluation index."""
        idx = self.claim()[0] if eval_index is None else eval_index
        key = self.cache_key(genome)
        hit = self.cache.get(key)
        if hit is not None:
            rec = hit.record(eval_index=idx, cache_hit=True)
            rec["genome"] = format_genome(genome)
            rec["wall_time_s"] = 0.0
            self._emit(rec)
            return hit
        res = self.evaluate(genome, idx)
        self.cache[key] = res
        return res

    def evaluate_batch(self, genomes, jobs: int = 1) -> list[FitnessResult]:
        """Evaluate a batch with consecutive indices; results and log order do not depend on ``jobs``.

        Genomes sharing a cache key within the batch (or with the cache) are
        trained once.
        """
        genomes = list(genomes)
        idxs = self.claim(len(genomes))
        keys = [self.cache_key(g) for g in genomes]
        first = {}
        todo = []
        for i, k in enumerate(keys):
            if k not in self.cache and k not in first:
                first[k] = i
                todo.append(i)

        def run(i):
            return self.evaluate(genomes[i], idxs[i], log_record=False)

        if jobs > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as ex:
                fresh = dict(zip(todo, ex.map(run, todo)))
        else:
            fresh = {i: run(i) for i in todo}
        out = []
        for i, (g, k) in enumerate(zip(genomes, keys)):
            if i in fresh:
                res = fresh[i]
                self.cache[k] = res
                self._emit(res.record())
            else:
                res = self.cache[k] if k in self.cache else fresh[first[k]]
                rec = res.record(eval_index=idxs[i], cache_hit=True)
                rec["genome"] = format_genome(g)
                rec["wall_time_s"] = 0.0
                self._emit(rec)
            out.append(res)
        return out


class TrainingEvaluator(Evaluator):
    """Scores a genome by training a TinyBinNet with it in every binary block.

    ``trainer`` needs ``start(af, seed)`` returning a session with
    ``run_epoch() -> validation accuracy``; tests inject stubs here.
    """

    def __init__(self, trainer, config: FitnessConfig | None = None, log_path=None, cache=None,
                 data_fingerprint: str = ""):
        super().__init__(config, log_path, cache)
        self.trainer = trainer
        self.data_fingerprint = data_fingerprint

    def fingerprint(self) -> str:
        return self.config.fingerprint() + ":" + self.data_fingerprint

    def _score(self, genome, eval_index, seed, threshold):
        af = None if genome is None else decode(genome)
        return self.score_af(af, seed, threshold)

    def score_af(self, af, seed, threshold) -> FitnessResult:
        session = self.trainer.start(af, seed)
        status, fitness, history = train_fitness(session, self.config.epochs, threshold)
        return FitnessResult(fitness=fitness, status=status, epoch_history=history)

    def evaluate_af(self, af, name: str, eval_index: int | None = None) -> FitnessResult:
        """Evaluate a non-genome function (catalog baselines, plain sign)."""
        if eval_index is None:
            eval_index = self.claim()[0]
        seed = derive_seed(self.config.seed, eval_index)
        threshold = self.config.threshold_at(eval_index)
        t0 = time.perf_counter()
        res = self.score_af(af, seed, threshold)
        res.wall_time = time.perf_counter() - t0
        res.eval_index, res.seed, res.threshold_active = eval_index, seed, threshold
        res.genome = res.canonical_genome = name
        self._emit(res.record())
        return res


class AnalyticEvaluator(Evaluator):
    """Evaluator backed by :func:`analytic_fitness`; never rejects."""

    def _score(self, genome, eval_index, seed, threshold):
        f = analytic_fitness(genome)
        return FitnessResult(fitness=f, status=COMPLETED, epoch_history=[f])


def evaluate(genome: Genome, evaluator: Evaluator, eval_index: int | None = None) -> FitnessResult:
    return evaluator.evaluate(genome, eval_index)


def cached_evaluate(genome: Genome, evaluator: Evaluator, eval_index: int | None = None) -> FitnessResult:
    return evaluator.cached_evaluate(genome, eval_index)


def with_seed(config: FitnessConfig, seed: int) -> FitnessConfig:
    return replace(config, seed=seed)
