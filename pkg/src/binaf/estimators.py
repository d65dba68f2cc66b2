"""scikit-learn style wrappers around the network, the functions and the search."""

from __future__ import annotations

import numpy as np
from scipy.special import softmax
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import ga
from .bnn import Adam, ModelSpec, TinyBinNet, train_epoch
from .bnn.fusion import fuse_sign_threshold
from .data import Dataset, split
from .expr import Genome, decode, format_genome, parse_genome, resolve_af
from .fitness import AnalyticEvaluator, BNNTrainer, FitnessConfig, TrainingEvaluator


def _as_af(af, channels=1):
    if af is None or isinstance(af, str):
        return resolve_af(af or "baseline", channels)
    if isinstance(af, Genome):
        return decode(af, channels)
    return af


class BinaryNetClassifier(ClassifierMixin, BaseEstimator):
    """TinyBinNet classifier with an optional complementary function in every binary block.

    ``af`` is genome text, a catalog name, ``"baseline"`` or a Genome.
    """

    def __init__(self, af="baseline", arch="dense", width=64, n_blocks=2, shortcut=True, t_clip=1.0,
                 epochs=15, lr=5e-3, batch_size=128, random_state=0):
        self.af = af
        self.arch = arch
        self.width = width
        self.n_blocks = n_blocks
        self.shortcut = shortcut
        self.t_clip = t_clip
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.random_state = random_state

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float32)
        self.classes_, y_idx = np.unique(np.asarray(y), return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        spec = ModelSpec(X.shape[1:], len(self.classes_), arch=self.arch, width=self.width,
                         n_blocks=self.n_blocks, shortcut=self.shortcut, t_clip=self.t_clip)
        init_ss, shuffle_ss = np.random.SeedSequence(self.random_state).spawn(2)
        self.model_ = TinyBinNet(spec, _as_af(self.af), rng=np.random.default_rng(init_ss))
        opt = Adam(self.lr)
        rng = np.random.default_rng(shuffle_ss)
        self.history_ = []
        for _ in range(self.epochs):
            stats = train_epoch(self.model_, X, y_idx.astype(np.int64), opt, self.batch_size, rng)
            self.history_.append(stats.train_accuracy)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict_logits(np.asarray(X, dtype=np.float32))

    def predict_proba(self, X):
        return softmax(self.decision_function(X).astype(np.float64), axis=1)

    def predict(self, X):
        return self.classes_[self.decision_function(X).argmax(axis=1)]


class ComplementaryActivation(TransformerMixin, BaseEstimator):
    """Applies a complementary function elementwise (channels share parameters)."""

    def __init__(self, af="AF1"):
        self.af = af

    def fit(self, X=None, y=None):
        self.af_ = _as_af(self.af)
        return self

    def transform(self, X):
        check_is_fitted(self, "af_")
        X = np.asarray(X, dtype=np.float64)
        if self.af_ is None:
            return X.copy()
        with np.errstate(all="ignore"):
            return self.af_.scalar(0)(X)

    def thresholds(self, bound=64.0, piecewise_fallback=False):
        """Fused sign thresholds for this function."""
        check_is_fitted(self, "af_")
        return fuse_sign_threshold(self.af_, 0, bound=bound, piecewise_fallback=piecewise_fallback)


class ActivationSearch(BaseEstimator):
    """Runs the genetic search on ``(X, y)`` and keeps the best genome.

    With ``fitness="analytic"`` the data is ignored and the cheap oracle
    fitness is used instead of training.
    """

    def __init__(self, encoding="type1", pop_size=30, budget=2000, stagnation=200, mutation_prob=1.0,
                 fitness="train", epochs=15, lr=5e-3, batch_size=128, arch="dense", width=64,
                 n_blocks=2, t_clip=1.0, random_state=0, n_jobs=1, log_path=None):
        self.encoding = encoding
        self.pop_size = pop_size
        self.budget = budget
        self.stagnation = stagnation
        self.mutation_prob = mutation_prob
        self.fitness = fitness
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.arch = arch
        self.width = width
        self.n_blocks = n_blocks
        self.t_clip = t_clip
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.log_path = log_path

    def _fitness_config(self):
        return FitnessConfig(epochs=self.epochs, lr=self.lr, batch_size=self.batch_size, seed=self.random_state,
                             arch=self.arch, width=self.width, n_blocks=self.n_blocks, t_clip=self.t_clip)

    def fit(self, X=None, y=None, X_val=None, y_val=None):
        fcfg = self._fitness_config()
        if self.fitness == "analytic":
            evaluator = AnalyticEvaluator(fcfg, log_path=self.log_path)
        elif self.fitness == "train":
            if X is None or y is None:
                raise ValueError("training fitness needs X and y")
            X = np.asarray(X, dtype=np.float32)
            y = np.asarray(y, dtype=np.int64)
            ds = split(X, y) if X_val is None else Dataset(X, y, np.asarray(X_val, np.float32),
                                                           np.asarray(y_val, np.int64))
            evaluator = TrainingEvaluator(BNNTrainer(ds, fcfg), fcfg, log_path=self.log_path)
        else:
            raise ValueError(f"fitness must be 'train' or 'analytic', got {self.fitness!r}")
        cfg = ga.GAConfig(encoding=self.encoding, pop_size=self.pop_size, budget=self.budget,
                          stagnation=self.stagnation, mutation_prob=self.mutation_prob,
                          seed=self.random_state, jobs=self.n_jobs)
        self.report_ = ga.run(cfg, evaluator)
        self.best_genome_ = parse_genome(self.report_["best_genome"])
        self.best_fitness_ = self.report_["best_fitness"]
        self.population_ = [(m["genome"], m["fitness"]) for m in self.report_["population"]]
        return self

    def transform(self, X):
        """Apply the best function found."""
        check_is_fitted(self, "best_genome_")
        return ComplementaryActivation(format_genome(self.best_genome_)).fit().transform(X)
