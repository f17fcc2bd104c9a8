"""Hausdorff dimension of limit sets of sequences of Lalley-Gatzouras schemes."""

from .schemes import (
    AffineCell,
    AlphabetCapError,
    LGScheme,
    SchemeError,
    SchemeFamily,
    SchemeRow,
    bedford_mcmullen,
    compose,
    compose_word,
    family_from_dict,
    validate_scheme,
)
from .variational import (
    CellWeights,
    DimensionReport,
    FrequencyVector,
    OptimizerOptions,
    dim_of_frequency_limit,
    dim_of_rational_frequency,
    grid_search_oracle,
    lg_gradient,
    lg_objective,
    maximize_dimension,
    mcmullen_oracle,
)
from .sequences import SymbolSequence

__version__ = "0.1.0"

__all__ = [
    "AffineCell",
    "AlphabetCapError",
    "LGScheme",
    "SchemeError",
    "SchemeFamily",
    "SchemeRow",
    "bedford_mcmullen",
    "compose",
    "compose_word",
    "family_from_dict",
    "validate_scheme",
    "CellWeights",
    "DimensionReport",
    "FrequencyVector",
    "OptimizerOptions",
    "dim_of_frequency_limit",
    "dim_of_rational_frequency",
    "grid_search_oracle",
    "lg_gradient",
    "lg_objective",
    "maximize_dimension",
    "mcmullen_oracle",
    "SymbolSequence",
]
