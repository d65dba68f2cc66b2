"""Evolutionary search for complementary activation functions in binary neural networks."""

from .estimators import ActivationSearch, BinaryNetClassifier, ComplementaryActivation
from .expr import (
    ActivationExpr,
    EncodingType,
    Genome,
    GenomeError,
    RPReLU,
    RSign,
    canonicalize,
    catalog_af,
    decode,
    format_genome,
    parse_genome,
    render_formula,
)
from .fitness import (
    AnalyticEvaluator,
    FitnessConfig,
    FitnessResult,
    TrainingEvaluator,
    analytic_fitness,
    cached_evaluate,
    evaluate,
)
from .ga import GAConfig, Individual, Population, crossover, mutate, run, select, step

__all__ = [
    "ActivationExpr",
    "ActivationSearch",
    "AnalyticEvaluator",
    "BinaryNetClassifier",
    "ComplementaryActivation",
    "EncodingType",
    "FitnessConfig",
    "FitnessResult",
    "GAConfig",
    "Genome",
    "GenomeError",
    "Individual",
    "Population",
    "RPReLU",
    "RSign",
    "TrainingEvaluator",
    "analytic_fitness",
    "cached_evaluate",
    "canonicalize",
    "catalog_af",
    "crossover",
    "decode",
    "evaluate",
    "format_genome",
    "mutate",
    "parse_genome",
    "render_formula",
    "run",
    "select",
    "step",
]

__version__ = "0.1.0"
