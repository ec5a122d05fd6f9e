"""scikit-learn compatible wrappers so the metric drops into pipelines.

AnharmonicityScorer turns a black-box model handle into a transformer whose
output feature is the per-row deviation metric; StabilityMapEstimator fits
the binned stability map and predicts stability fractions for new
(probability, gamma) pairs.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .analysis import build_gamma_map, lookup_stability
from .gamma import gamma_point
from .geometry import BallSpec
from .models import OutputProjection


class AnharmonicityScorer(BaseEstimator, TransformerMixin):
    """Score samples by their local deviation from the mean-value property.

    Parameters mirror BallSpec plus the output projection.  ``model`` is any
    harmonica model handle (builtin, MLP, subprocess, HTTP).  fit only
    validates shapes and records the training-set mean as a reference level;
    there is nothing to train, the wrapped model stays frozen.
    """

    def __init__(self, model=None, scheme="simplex", radius=0.1,
                 sample_fraction=1.0, seed=0, circle_points=64,
                 projection="scalar", component=0):
        self.model = model
        self.scheme = scheme
        self.radius = radius
        self.sample_fraction = sample_fraction
        self.seed = seed
        self.circle_points = circle_points
        self.projection = projection
        self.component = component

    def _spec(self):
        return BallSpec(scheme=self.scheme, radius=self.radius,
                        sample_fraction=self.sample_fraction, seed=self.seed,
                        circle_points=self.circle_points)

    def _proj(self):
        return OutputProjection(self.projection, self.component)

    def _validate(self, X):
        X = check_array(X, dtype=float)
        if self.model is None:
            raise ValueError("AnharmonicityScorer needs a model handle")
        if X.shape[1] != self.model.input_dim:
            raise ValueError(f"X has {X.shape[1]} features but the model "
                             f"expects {self.model.input_dim}")
        return X

    def fit(self, X, y=None):
        X = self._validate(X)
        self.n_features_in_ = X.shape[1]
        scores = self.score_samples(X)
        self.mean_gamma_ = float(scores.mean())
        self.stderr_ = (float(scores.std(ddof=1) / np.sqrt(scores.size))
                        if scores.size > 1 else 0.0)
        return self

    def score_samples(self, X):
        X = self._validate(X)
        spec, proj = self._spec(), self._proj()
        return np.array([gamma_point(self.model, x, spec, proj).gamma
                         for x in X])

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        return self.score_samples(X).reshape(-1, 1)


class StabilityMapEstimator(BaseEstimator):
    """Fit the binned (probability, gamma) -> stability-fraction surface.

    X columns are (class probability, gamma); y is the boolean stability
    outcome per sample.  predict returns the fraction of the cell each query
    falls into, NaN for empty cells unless nearest_fallback is set.
    """

    def __init__(self, prob_bins=10, gamma_bins=10, nearest_fallback=False):
        self.prob_bins = prob_bins
        self.gamma_bins = gamma_bins
        self.nearest_fallback = nearest_fallback

    def fit(self, X, y):
        X = check_array(X, dtype=float)
        if X.shape[1] != 2:
            raise ValueError("X must have exactly the two columns "
                             "(probability, gamma)")
        y = np.asarray(y).astype(bool)
        if y.shape[0] != X.shape[0]:
            raise ValueError("y length does not match X")
        prob_edges = np.linspace(0.0, 1.0, int(self.prob_bins) + 1)
        top = float(np.percentile(X[:, 1], 99))
        if top <= 0:
            top = max(float(X[:, 1].max()), 1e-12)
        gamma_edges = np.linspace(0.0, top, int(self.gamma_bins) + 1)
        self.map_ = build_gamma_map(
            [(p, g, s) for (p, g), s in zip(X, y)], prob_edges, gamma_edges)
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "map_")
        X = check_array(X, dtype=float)
        out = np.empty(X.shape[0])
        for i, (p, g) in enumerate(X):
            frac = lookup_stability(self.map_, p, g,
                                    nearest_nonempty=self.nearest_fallback)
            out[i] = np.nan if frac is None else frac
        return out
