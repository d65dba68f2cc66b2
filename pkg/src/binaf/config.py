"""Run configuration: one flat JSON object, validated field by field.

Command-line flags override values loaded from ``--config``. Every field
below may appear in the file; unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

from .data import DatasetSource
from .expr import EncodingType
from .fitness import DEFAULT_SCHEDULE, FitnessConfig
from .ga import GAConfig


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` maps field name to message."""

    def __init__(self, problems: dict):
        self.problems = dict(problems)
        lines = [f"  {k}: {v}" for k, v in self.problems.items()]
        super().__init__("invalid configuration:\n" + "\n".join(lines))


@dataclass
class RunConfig:
    # search
    encoding: str = "type1"
    pop_size: int = 30
    budget: int = 2000
    stagnation: int = 200
    mutation_prob: float = 1.0
    fitness: str = "train"  # train | analytic
    # training protocol
    epochs: int = 15
    lr: float = 5e-3
    batch_size: int = 128
    betas: tuple = (0.9, 0.999)
    rejection_schedule: tuple = DEFAULT_SCHEDULE
    # model
    arch: str = "dense"
    width: int = 64
    n_blocks: int = 2
    shortcut: bool = True
    t_clip: float = 1.0
    # data
    dataset: str = "synthetic"
    dataset_path: str | None = None
    n_samples: int = 1250
    n_classes: int = 2
    noise: float = 0.5
    subset: int | None = None
    data_seed: int = 0
    # run
    seed: int = 0
    out: str = "runs"
    jobs: int = 1

    def __post_init__(self):
        self.betas = tuple(float(b) for b in self.betas)
        self.rejection_schedule = tuple((int(b), float(t)) for b, t in self.rejection_schedule)

    # -- validation

    def problems(self) -> dict:
        p = {}
        try:
            EncodingType.parse(self.encoding)
        except ValueError:
            p["encoding"] = f"unknown encoding {self.encoding!r} (type1 or type2)"
        if self.pop_size < 2:
            p["pop_size"] = "population size S must be >= 2"
        if self.budget < 0:
            p["budget"] = "must be >= 0"
        if self.stagnation < 1:
            p["stagnation"] = "must be >= 1"
        if not 0 <= self.mutation_prob <= 1:
            p["mutation_prob"] = "must lie in [0, 1]"
        if self.fitness not in ("train", "analytic"):
            p["fitness"] = "must be 'train' or 'analytic'"
        if self.epochs < 1:
            p["epochs"] = "must be >= 1"
        if self.lr <= 0:
            p["lr"] = "must be positive"
        if self.batch_size < 2:
            p["batch_size"] = "must be >= 2"
        if len(self.betas) != 2 or not all(0 <= b < 1 for b in self.betas):
            p["betas"] = "must be two values in [0, 1)"
        try:
            FitnessConfig(rejection_schedule=self.rejection_schedule)
        except ValueError as e:
            p["rejection_schedule"] = str(e).split(": ", 1)[-1]
        if self.arch not in ("dense", "conv"):
            p["arch"] = "must be 'dense' or 'conv'"
        if self.width < 1:
            p["width"] = "must be >= 1"
        if self.n_blocks < 1:
            p["n_blocks"] = "must be >= 1"
        if self.t_clip <= 0:
            p["t_clip"] = "must be positive"
        if self.dataset not in ("synthetic", "cifar10-binary", "npz"):
            p["dataset"] = "must be synthetic, cifar10-binary or npz"
        elif self.dataset != "synthetic" and not self.dataset_path:
            p["dataset_path"] = f"required for dataset {self.dataset!r}"
        if self.dataset == "synthetic" and not 2 <= self.n_classes <= 10:
            p["n_classes"] = "synthetic datasets have 2-10 classes"
        if self.n_samples < 10:
            p["n_samples"] = "must be >= 10"
        if self.noise < 0:
            p["noise"] = "must be >= 0"
        if self.subset is not None and self.subset < 10:
            p["subset"] = "must be >= 10 when given"
        for name in ("seed", "data_seed"):
            if not 0 <= getattr(self, name) < 2 ** 64:
                p[name] = "must be an unsigned 64-bit integer"
        if self.jobs < 1:
            p["jobs"] = "must be >= 1"
        return p

    def validate(self) -> "RunConfig":
        p = self.problems()
        if p:
            raise ConfigError(p)
        return self

    # -- serialization

    def to_dict(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        d["rejection_schedule"] = [list(x) for x in self.rejection_schedule]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError({k: "unknown field" for k in unknown})
        try:
            return cls(**d)
        except (TypeError, ValueError) as e:
            raise ConfigError({"<file>": str(e)}) from e

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError({"<file>": f"not valid JSON: {e}"}) from e
        if not isinstance(d, dict):
            raise ConfigError({"<file>": "top level must be a JSON object"})
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                return cls.from_json(fh.read())
        except OSError as e:
            raise OSError(f"cannot read config {path}: {e.strerror}") from e

    def merged(self, overrides: dict) -> "RunConfig":
        """Copy with every non-None override applied."""
        d = self.to_dict()
        d.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(d)

    # -- views

    def fitness_config(self) -> FitnessConfig:
        return FitnessConfig(
            epochs=self.epochs, rejection_schedule=self.rejection_schedule, lr=self.lr,
            batch_size=self.batch_size, betas=self.betas, seed=self.seed, arch=self.arch,
            width=self.width, n_blocks=self.n_blocks, shortcut=self.shortcut, t_clip=self.t_clip,
        )

    def ga_config(self) -> GAConfig:
        return GAConfig(
            encoding=self.encoding, pop_size=self.pop_size, budget=self.budget,
            stagnation=self.stagnation, mutation_prob=self.mutation_prob, seed=self.seed, jobs=self.jobs,
        )

    def dataset_source(self) -> DatasetSource:
        return DatasetSource(
            kind=self.dataset, path=self.dataset_path, n_samples=self.n_samples,
            n_classes=self.n_classes, noise=self.noise, subset=self.subset, seed=self.data_seed,
        )
