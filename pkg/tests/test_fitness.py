import json
import threading

import numpy as np
import pytest

from binaf.data import make_synthetic, split
from binaf.expr import EncodingType, Genome, all_genomes, parse_genome
from binaf.fitness import (
    COMPLETED,
    DIVERGED,
    EARLY_REJECTED,
    AnalyticEvaluator,
    BNNTrainer,
    FitnessConfig,
    TrainingEvaluator,
    analytic_fitness,
    derive_seed,
)
from binaf.bnn import TrainingDiverged


class StubSession:
    def __init__(self, accs, log, diverge_at=None):
        self.accs = list(accs)
        self.log = log
        self.diverge_at = diverge_at
        self.epochs_run = 0

    def run_epoch(self):
        if self.diverge_at is not None and self.epochs_run == self.diverge_at:
            raise TrainingDiverged("non-finite loss")
        acc = self.accs[min(self.epochs_run, len(self.accs) - 1)]
        self.epochs_run += 1
        self.log.append(acc)
        return acc


class StubTrainer:
    """Plays back a fixed accuracy curve and records every epoch run."""

    def __init__(self, accs, diverge_at=None):
        self.accs = accs
        self.diverge_at = diverge_at
        self.epochs = []
        self.starts = []
        self._lock = threading.Lock()

    def start(self, af, seed):
        with self._lock:
            self.starts.append(seed)
        return StubSession(self.accs, self.epochs, self.diverge_at)


G = parse_genome("t1:U11-U12-B1")


class TestConfig:
    def test_defaults(self):
        c = FitnessConfig()
        assert c.epochs == 15 and c.lr == 5e-3 and c.batch_size == 128 and c.betas == (0.9, 0.999)
        assert c.rejection_schedule == ((0, 0.11), (500, 0.25), (1500, 0.35), (3000, 0.40))

    @pytest.mark.parametrize("kw", [
        {"epochs": 0},
        {"rejection_schedule": [(0, 0.3), (10, 0.2)]},
        {"rejection_schedule": [(0, 1.0)]},
        {"rejection_schedule": [(5, 0.1)]},
        {"lr": 0},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            FitnessConfig(**kw)

    def test_schedule_boundaries(self):
        c = FitnessConfig()
        expect = {0: 0.11, 499: 0.11, 500: 0.25, 1499: 0.25, 1500: 0.35, 2999: 0.35, 3000: 0.40, 10**6: 0.40}
        for i, t in expect.items():
            assert c.threshold_at(i) == t

    def test_schedule_monotone(self):
        c = FitnessConfig()
        ts = [c.threshold_at(i) for i in range(4000)]
        assert all(a <= b for a, b in zip(ts, ts[1:]))

    def test_fingerprint_depends_on_seed(self):
        assert FitnessConfig(seed=1).fingerprint() != FitnessConfig(seed=2).fingerprint()
        assert FitnessConfig(seed=1).fingerprint() == FitnessConfig(seed=1).fingerprint()


class TestProtocol:
    def test_early_rejection(self):
        tr = StubTrainer([0.10, 0.9])
        res = TrainingEvaluator(tr, FitnessConfig()).evaluate(G)
        assert res.status == EARLY_REJECTED and res.fitness == 0.10
        assert res.epoch_history == [0.10] and len(tr.epochs) == 1
        assert res.threshold_active == 0.11

    def test_continues_to_full_budget(self):
        tr = StubTrainer([0.5, 0.6, 0.7])
        res = TrainingEvaluator(tr, FitnessConfig(epochs=15)).evaluate(G)
        assert res.status == COMPLETED and len(tr.epochs) == 15 and res.fitness == 0.7

    def test_threshold_follows_counter(self):
        tr = StubTrainer([0.30])
        ev = TrainingEvaluator(tr, FitnessConfig(rejection_schedule=[(0, 0.11), (2, 0.35)]))
        out = [ev.evaluate(G).status for _ in range(3)]
        assert out == [COMPLETED, COMPLETED, EARLY_REJECTED]

    def test_divergence(self):
        res = TrainingEvaluator(StubTrainer([0.5], diverge_at=3), FitnessConfig()).evaluate(G)
        assert res.status == DIVERGED and res.fitness == 0.0 and len(res.epoch_history) == 3

    def test_nan_accuracy_is_divergence(self):
        res = TrainingEvaluator(StubTrainer([float("nan")]), FitnessConfig()).evaluate(G)
        assert res.status == DIVERGED and res.fitness == 0.0

    def test_seed_from_index(self):
        tr = StubTrainer([0.5])
        ev = TrainingEvaluator(tr, FitnessConfig(seed=9))
        ev.evaluate(G)
        ev.evaluate(G)
        assert tr.starts == [derive_seed(9, 0), derive_seed(9, 1)]
        assert derive_seed(9, 0) != derive_seed(9, 1) != derive_seed(8, 1)


class TestCache:
    def test_hit_skips_training(self):
        tr = StubTrainer([0.5])
        ev = TrainingEvaluator(tr, FitnessConfig(epochs=2))
        a = ev.cached_evaluate(G)
        b = ev.cached_evaluate(G)
        assert a is b and len(tr.starts) == 1 and ev.counter == 2
        assert ev.records[1]["cache_hit"] and ev.records[1]["wall_time_s"] == 0.0

    def test_commutative_shared(self):
        tr = StubTrainer([0.5])
        ev = TrainingEvaluator(tr, FitnessConfig(epochs=1))
        ev.cached_evaluate(Genome.from_genes([11, 12, 0]))
        ev.cached_evaluate(Genome.from_genes([12, 11, 0]))
        assert len(tr.starts) == 1

    def test_seed_change_misses(self):
        tr = StubTrainer([0.5])
        cache = {}
        TrainingEvaluator(tr, FitnessConfig(seed=1, epochs=1), cache=cache).cached_evaluate(G)
        TrainingEvaluator(tr, FitnessConfig(seed=2, epochs=1), cache=cache).cached_evaluate(G)
        assert len(tr.starts) == 2

    def test_batch_dedupes_and_ignores_jobs(self, tmp_path):
        genomes = [Genome.from_genes(g) for g in ([11, 12, 0], [12, 11, 0], [1, 2, 3], [4, 5, 6], [1, 2, 3])]
        logs = []
        for jobs in (1, 4):
            path = tmp_path / f"log{jobs}.jsonl"
            ev = AnalyticEvaluator(FitnessConfig(), log_path=path)
            res = ev.evaluate_batch(genomes, jobs=jobs)
            assert res[0] is res[1] and res[2] is res[4]
            assert res[3].fitness == analytic_fitness(genomes[3])
            logs.append([{k: v for k, v in json.loads(line).items() if k != "wall_time_s"}
                         for line in path.read_text().splitlines()])
        assert logs[0] == logs[1]
        assert [r["eval_index"] for r in logs[0]] == [0, 1, 2, 3, 4]
        assert [bool(r.get("cache_hit")) for r in logs[0]] == [False, True, False, False, True]


class TestJsonl:
    def test_schema(self, tmp_path):
        path = tmp_path / "e.jsonl"
        ev = TrainingEvaluator(StubTrainer([0.4, 0.6]), FitnessConfig(epochs=2), log_path=path)
        ev.evaluate(G)
        rec = json.loads(path.read_text().splitlines()[0])
        assert set(rec) == {"eval_index", "genome", "canonical_genome", "status", "fitness",
                            "epoch_history", "seed", "wall_time_s", "threshold_active"}
        assert rec["genome"] == "t1:U11-U12-B1" and rec["epoch_history"] == [0.4, 0.6]


class TestAnalytic:
    def test_deterministic_and_range(self):
        vals = [analytic_fitness(g) for g in all_genomes(EncodingType.TYPE1)]
        assert vals == [analytic_fitness(g) for g in all_genomes(EncodingType.TYPE1)]
        assert all(0 <= v <= 1 for v in vals)

    def test_injective_unique_max(self):
        vals = np.array([analytic_fitness(g) for g in all_genomes(EncodingType.TYPE1)])
        assert len(vals) == 5324
        assert len(np.unique(vals)) == len(vals)
        assert (vals == vals.max()).sum() == 1


@pytest.fixture(scope="module")
def dataset():
    x, y = make_synthetic(1250, 2, 0.5, seed=7)
    return split(x, y)


class TestRealTrainer:
    def test_identity_af_fits(self, dataset):
        cfg = FitnessConfig(epochs=15)
        ev = TrainingEvaluator(BNNTrainer(dataset, cfg), cfg)
        res = ev.evaluate(parse_genome("t1:U0-U3-B0"))
        assert res.status == COMPLETED and res.fitness > 0.9

    def test_deterministic(self, dataset):
        cfg = FitnessConfig(epochs=2)
        a = TrainingEvaluator(BNNTrainer(dataset, cfg), cfg).evaluate(G, eval_index=5)
        b = TrainingEvaluator(BNNTrainer(dataset, cfg), cfg).evaluate(G, eval_index=5)
        assert a.fitness == b.fitness and a.epoch_history == b.epoch_history
