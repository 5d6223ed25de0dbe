"""Almost Golden Riemannian structures, their adapted connections and numerical checks."""

from .catalog import CatalogEntry, random_pure_structure
from .connections import (
    DerivationLaw,
    PotentialTensor,
    crasmareanu_formula,
    first_canonical,
    is_adapted,
    levi_civita,
    nabla0_type,
    nijenhuis,
    nijenhuis_tensor,
    schouten,
    solve_well_adapted,
    vranceanu,
    well_adapted,
)
from .exprdsl import evaluate, parse, to_text
from .fields import ChartSpec, MetricField, OneOneField, SplitMix64, VectorField, sample_points
from .golden import GoldenPair, adapted_orthonormal_frame, induced_golden, induced_product
from .verify import MatrixLieAlgebra, VerificationReport, build_report, first_prolongation_dim

__all__ = [
    "CatalogEntry",
    "ChartSpec",
    "DerivationLaw",
    "GoldenPair",
    "MatrixLieAlgebra",
    "MetricField",
    "OneOneField",
    "PotentialTensor",
    "SplitMix64",
    "VectorField",
    "VerificationReport",
    "adapted_orthonormal_frame",
    "build_report",
    "crasmareanu_formula",
    "evaluate",
    "first_canonical",
    "first_prolongation_dim",
    "induced_golden",
    "induced_product",
    "is_adapted",
    "levi_civita",
    "nabla0_type",
    "nijenhuis",
    "nijenhuis_tensor",
    "parse",
    "random_pure_structure",
    "sample_points",
    "schouten",
    "solve_well_adapted",
    "to_text",
    "vranceanu",
    "well_adapted",
]
