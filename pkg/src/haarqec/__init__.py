"""Haar random quantum error-correcting codes with certified approximate nondegeneracy."""

from __future__ import annotations

__version__ = "0.1.0"

from .budget import BudgetError
from .codes import CodeSample, NondegeneracyReport, nondegeneracy_report, sample_haar_isometry, shifted_basis_matrix
from .decoder import Decoder, NondegenerateRankError, build_decoder, decode_density
from .errorsets import UnitaryErrorSet, gen_erasure_set, gen_weight_set, validate
from .linalg import approx_isometry_report, isometrize, partial_isometry_round, singular_extrema
from .metrics import disturbance_report, entangled_disturbance, lemma_residual
from .noise import NoiseChannel, channel_from_kraus, depolarizing_erasure, mixture_channel, random_local_channel

__all__ = [
    "BudgetError",
    "CodeSample",
    "Decoder",
    "NoiseChannel",
    "NondegeneracyReport",
    "NondegenerateRankError",
    "UnitaryErrorSet",
    "approx_isometry_report",
    "build_decoder",
    "channel_from_kraus",
    "decode_density",
    "depolarizing_erasure",
    "disturbance_report",
    "entangled_disturbance",
    "gen_erasure_set",
    "gen_weight_set",
    "isometrize",
    "lemma_residual",
    "mixture_channel",
    "nondegeneracy_report",
    "partial_isometry_round",
    "random_local_channel",
    "sample_haar_isometry",
    "shifted_basis_matrix",
    "singular_extrema",
    "validate",
]
