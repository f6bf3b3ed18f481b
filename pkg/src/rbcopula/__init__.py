"""Bayesian copula regression for paired continuous proportions.

Rectangular-beta margins (a beta core mixed with a uniform rectangle)
linked by a one-parameter copula indexed on the Kendall-tau scale, fitted
by an adaptive Metropolis-within-Gibbs sampler, compared by warp-3 bridge
sampling, and checked with posterior-predictive rank residuals and
tail-dependence curves.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .rectbeta import RectBetaParams
from .copulas import CopulaFamily, CopulaSpec
from .model import Dataset, ModelSpec, ParameterState, PriorConfig, standard_variants
from .mcmc import (ChainConfig, Draws, fit, hpd_interval,
                   posterior_summary, psrf, run_chains)
from .evidence import BridgeResult, bayes_factor_report, bridge_lml, evidence_strength
from .diagnostics import (
    DependenceCurves,
    ResidualSet,
    copula_diagnostics,
    scaled_rank_residuals,
)

__all__ = [
    "__version__",
    "RectBetaParams",
    "CopulaFamily",
    "CopulaSpec",
    "Dataset",
    "ModelSpec",
    "ParameterState",
    "PriorConfig",
    "standard_variants",
    "ChainConfig",
    "Draws",
    "fit",
    "hpd_interval",
    "posterior_summary",
    "psrf",
    "run_chains",
    "BridgeResult",
    "bayes_factor_report",
    "bridge_lml",
    "evidence_strength",
    "DependenceCurves",
    "ResidualSet",
    "copula_diagnostics",
    "scaled_rank_residuals",
]
