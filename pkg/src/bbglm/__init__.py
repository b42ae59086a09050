"""Bayesian-bootstrap posteriors for GLM coefficients without MCMC.

Dirichlet weight draws over the observed support points are fed as prior
weights into a weighted IWLS solver; the refitted coefficient vectors form
the posterior sample.
"""

__version__ = "0.1.0"

from bbglm.dataset import Dataset, load, load_bundled, read_csv  # noqa: E402
from bbglm.design import ModelSpec, build_design  # noqa: E402
from bbglm.elimination import backward_eliminate, expand_terms  # noqa: E402
from bbglm.engine import (  # noqa: E402
    PosteriorDraws,
    curve_draws,
    functional_draws,
    run_posterior,
)
from bbglm.iwls import FitResult, deviance, iwls_fit  # noqa: E402
from bbglm.summaries import (  # noqa: E402
    central_interval,
    classical_intervals,
    ecdf,
    kde,
    ml_bands,
    summarize,
)
from bbglm.support import SupportTable, WeightDraw, sample_weights, tabulate  # noqa: E402

__all__ = [
    "Dataset", "FitResult", "ModelSpec", "PosteriorDraws", "SupportTable", "WeightDraw",
    "backward_eliminate", "build_design", "central_interval", "classical_intervals",
    "curve_draws", "deviance", "ecdf", "expand_terms", "functional_draws", "iwls_fit", "kde",
    "load", "load_bundled", "ml_bands", "read_csv", "run_posterior", "sample_weights",
    "summarize", "tabulate",
]
