"""harmonica: deviation from the harmonic mean-value property as a
robustness signal for black-box models.

The core quantity is gamma(x, r) = |f(x) - ball average of f|, computed on
discrete ball approximations (simplex vertices, their reflections, random
sphere points, signed one-hot displacements).  On top of it sit region and
field evaluation, a gamma-guided adversarial search, softmax stability
estimates, and the binned stability map.
"""

from .adversarial import (AdversarialTrace, SampleRecord, StabilityStats,
                          adversarial_search, batch_stability)
from .analysis import (GammaMap, SoftmaxSummary, approx_prob,
                       boundary_band_average, boundary_band_value,
                       build_gamma_map, lookup_stability, predicted_stability,
                       softmax_prob, summarize_logits)
from .errors import (BackendError, ConfigError, EmptyBallError,
                     EvaluationError, HarmonicaError, ModelOutputError)
from .estimators import AnharmonicityScorer, StabilityMapEstimator
from .gamma import (GammaField, GammaResult, GridSampling, MonteCarloSampling,
                    PointSetSampling, RegionSpec, gamma_field, gamma_point,
                    gamma_region, grid_region, radius_sweep)
from .geometry import (BallSpec, SimplexBasis, ball_points, coverage_metrics,
                       one_hot_alignment, rodrigues_rotation, simplex_vertices)
from .images import load_grayscale_image, read_pgm, rescale_bilinear, write_pgm
from .models import (Domain, MlpModel, Model, OutputProjection, builtin,
                     class_probability, load_mlp, pixel_domain,
                     predicted_label, project)
from .protocol import HttpModel, SubprocessModel, connect_external

__version__ = "0.1.0"

__all__ = [
    "AdversarialTrace", "AnharmonicityScorer", "BackendError", "BallSpec",
    "ConfigError", "Domain", "EmptyBallError", "EvaluationError", "GammaField",
    "GammaMap", "GammaResult", "GridSampling", "HarmonicaError", "HttpModel",
    "MlpModel", "Model", "MonteCarloSampling", "ModelOutputError",
    "OutputProjection", "PointSetSampling", "RegionSpec", "SampleRecord",
    "SimplexBasis", "SoftmaxSummary", "StabilityMapEstimator", "StabilityStats",
    "SubprocessModel", "adversarial_search", "approx_prob", "ball_points",
    "batch_stability", "boundary_band_average", "boundary_band_value",
    "build_gamma_map", "builtin", "class_probability", "connect_external",
    "coverage_metrics", "gamma_field", "gamma_point", "gamma_region",
    "grid_region", "load_grayscale_image", "load_mlp", "lookup_stability",
    "one_hot_alignment", "pixel_domain", "predicted_label",
    "predicted_stability", "project", "radius_sweep", "read_pgm",
    "rescale_bilinear", "rodrigues_rotation", "simplex_vertices",
    "softmax_prob", "summarize_logits", "write_pgm",
]
