"""Black-box function handles: built-in oracles, feedforward nets, domains.

Every model maps an n-vector to an m-vector and is treated as deterministic.
Handles carry their dimensions and an optional per-coordinate domain; inputs
to quantized domains (pixels) are rounded then clamped before evaluation.
"""

import json

import numpy as np

from .errors import ConfigError, ModelOutputError

BUILTIN_NAMES = ("f1", "f2", "f3", "f4", "linear", "constant", "step2d", "curve2d")


class Domain:
    """Per-coordinate bounds, optionally on an integer lattice."""

    def __init__(self, lower=None, upper=None, quantized=False):
        self.lower = None if lower is None else np.asarray(lower, dtype=float)
        self.upper = None if upper is None else np.asarray(upper, dtype=float)
        self.quantized = bool(quantized)

    def prepare(self, X):
        """Round-then-clamp quantized inputs; reject out-of-bounds otherwise."""
        if self.quantized:
            X = np.rint(X)
            if self.lower is not None or self.upper is not None:
                X = np.clip(X, self.lower, self.upper)
            return X
        if not self.contains(X).all():
            raise ValueError("input outside the model's declared domain")
        return X

    def contains(self, X):
        ok = np.ones(X.shape[:-1], dtype=bool)
        if self.lower is not None:
            ok &= (X >= self.lower).all(axis=-1)
        if self.upper is not None:
            ok &= (X <= self.upper).all(axis=-1)
        return ok

    def clamp(self, X):
        return np.clip(X, self.lower, self.upper)


def pixel_domain():
    """The grayscale image lattice: integers 0..255 in every coordinate."""
    return Domain(lower=0.0, upper=255.0, quantized=True)


class Model:
    """Base handle: subclasses set dims and implement _eval_batch.

    ``max_concurrency`` bounds how many threads may call eval at once
    (None = unbounded).
    """

    backend = "builtin"
    max_concurrency = None

    def __init__(self, input_dim, output_dim, domain=None):
        self.input_dim = int(input_dim)
        self.output_dim = int(output_dim)
        self.domain = domain

    def _eval_batch(self, X):
        raise NotImplementedError

    def eval_batch(self, X):
        """Evaluate a (k, n) batch into a (k, m) array of finite reals."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(
                f"expected inputs of dimension {self.input_dim}, got shape {X.shape}")
        if self.domain is not None:
            X = self.domain.prepare(X)
        out = np.asarray(self._eval_batch(X), dtype=float)
        if out.shape != (X.shape[0], self.output_dim):
            raise ModelOutputError(
                f"model returned shape {out.shape}, expected "
                f"({X.shape[0]}, {self.output_dim})")
        if not np.isfinite(out).all():
            bad = int(np.argwhere(~np.isfinite(out).all(axis=1))[0][0])
            err = ModelOutputError(f"model produced a non-finite output (batch row {bad})")
            err.row = bad
            raise err
        return out

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ValueError("eval expects a single vector; use eval_batch for batches")
        return self.eval_batch(x[None, :])[0]

    def with_domain(self, domain):
        """Shallow copy of this handle with a different input domain."""
        import copy
        clone = copy.copy(self)
        clone.domain = domain
        return clone


class BuiltinModel(Model):
    """Wraps a vectorized callable (k, n) -> (k, m)."""

    backend = "builtin"

    def __init__(self, fn, input_dim, output_dim, name="custom", params=None, domain=None):
        super().__init__(input_dim, output_dim, domain)
        self._fn = fn
        self.name = name
        self.params = dict(params or {})

    def _eval_batch(self, X):
        return self._fn(X)


def _as_column(v):
    return np.asarray(v, dtype=float).reshape(-1, 1)


def builtin(name, n, **params):
    """Construct one of the built-in analytic models.

    f1 = sum_i (-1)^i x_i^2 (harmonic for even n); f2 = sum_i x_i^2;
    f3 = prod over pairs sin(x_{2k}) * exp(x_{2k+1}) (harmonic);
    f4 = exp(sum_i x_i); linear = a.x + b; constant = c;
    step2d = 1[x_1 > boundary_level]; curve2d = 1[x_1 > boundary_level +
    amplitude * sin(omega * x_0)].
    """
    n = int(n)
    if n < 1:
        raise ValueError("model dimension must be positive")
    if name not in BUILTIN_NAMES:
        raise ConfigError(f"unknown builtin {name!r}; expected one of {BUILTIN_NAMES}")

    if name == "f1":
        if n % 2:
            raise ValueError("f1 needs an even dimension (signs must cancel in pairs)")
        signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        fn = lambda X: _as_column((X ** 2) @ signs)
    elif name == "f2":
        fn = lambda X: _as_column(np.sum(X ** 2, axis=1))
    elif name == "f3":
        if n % 2:
            raise ValueError("f3 needs an even dimension (sin/exp factors pair up)")
        fn = lambda X: _as_column(
            np.prod(np.sin(X[:, 0::2]), axis=1) * np.exp(np.sum(X[:, 1::2], axis=1)))
    elif name == "f4":
        fn = lambda X: _as_column(np.exp(np.sum(X, axis=1)))
    elif name == "linear":
        a = params.get("a", np.ones(n))
        a = np.full(n, float(a)) if np.isscalar(a) else np.asarray(a, dtype=float)
        if a.shape != (n,):
            raise ValueError(f"linear coefficient vector must have length {n}")
        b = float(params.get("b", 0.0))
        fn = lambda X: _as_column(X @ a + b)
    elif name == "constant":
        c = float(params.get("c", 1.0))
        fn = lambda X: np.full((X.shape[0], 1), c)
    elif name == "step2d":
        if n != 2:
            raise ValueError("step2d is a 2-D model")
        level = float(params.get("boundary_level", 0.5))
        fn = lambda X: _as_column((X[:, 1] > level).astype(float))
    elif name == "curve2d":
        if n != 2:
            raise ValueError("curve2d is a 2-D model")
        level = float(params.get("boundary_level", 0.5))
        amp = float(params.get("amplitude", 0.0))
        omega = float(params.get("omega", 1.0))
        fn = lambda X: _as_column(
            (X[:, 1] > level + amp * np.sin(omega * X[:, 0])).astype(float))

    return BuiltinModel(fn, n, 1, name=name, params=params)


def curve_arc_length(amplitude, omega, x0, x1, steps=20000):
    """Arc length of y = amplitude * sin(omega x) over [x0, x1] (trapezoid)."""
    xs = np.linspace(x0, x1, steps)
    integrand = np.sqrt(1.0 + (amplitude * omega * np.cos(omega * xs)) ** 2)
    return float(np.trapezoid(integrand, xs))


_ACTIVATIONS = {
    "identity": lambda z: z,
    "relu": lambda z: np.maximum(z, 0.0),
    "tanh": np.tanh,
    "logistic": lambda z: 1.0 / (1.0 + np.exp(-z)),
}


class MlpModel(Model):
    """Feedforward net evaluated from explicit weights; no training here."""

    backend = "mlp"

    def __init__(self, layers, domain=None):
        # layers: list of (W (out, in), b (out,), activation name)
        if not layers:
            raise ValueError("an MLP needs at least one layer")
        for i, (W, b, act) in enumerate(layers):
            if act not in _ACTIVATIONS:
                raise ValueError(f"layer {i}: unknown activation {act!r}")
            if W.shape[0] != b.shape[0]:
                raise ValueError(f"layer {i}: bias length {b.shape[0]} does not "
                                 f"match {W.shape[0]} output rows")
        for i in range(1, len(layers)):
            prev_out = layers[i - 1][0].shape[0]
            cur_in = layers[i][0].shape[1]
            if prev_out != cur_in:
                raise ValueError(
                    f"layer dimension chain broken: layer {i - 1} outputs {prev_out} "
                    f"but layer {i} expects {cur_in} inputs")
        self.layers = layers
        super().__init__(layers[0][0].shape[1], layers[-1][0].shape[0], domain)

    def _eval_batch(self, X):
        out = X
        for W, b, act in self.layers:
            out = _ACTIVATIONS[act](out @ W.T + b)
        return out


def load_mlp(path):
    """Read an MLP from its JSON weights file.

    Schema: {"layers": [{"rows": r, "cols": c, "weights": [r*c row-major],
    "bias": [r], "activation": "relu"}, ...]}.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read MLP file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc

    raw = doc.get("layers")
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{path}: expected a non-empty 'layers' list")
    layers = []
    for i, spec in enumerate(raw):
        try:
            rows, cols = int(spec["rows"]), int(spec["cols"])
            weights = np.asarray(spec["weights"], dtype=float)
            bias = np.asarray(spec["bias"], dtype=float)
            act = str(spec.get("activation", "identity")).lower()
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: layer {i} is malformed ({exc})") from exc
        if weights.shape != (rows * cols,):
            raise ConfigError(f"{path}: layer {i} declares {rows}x{cols} but "
                              f"carries {weights.size} weights")
        if bias.shape != (rows,):
            raise ConfigError(f"{path}: layer {i} bias has length {bias.size}, "
                              f"expected {rows}")
        if act not in _ACTIVATIONS:
            raise ConfigError(f"{path}: layer {i} has unknown activation {act!r}")
        layers.append((weights.reshape(rows, cols), bias, act))
    try:
        return MlpModel(layers)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


PROJECTION_MODES = ("scalar", "component", "class-logit", "norm")


class OutputProjection:
    """Reduce an m-vector model output to the scalar gamma operates on.

    ``class-logit`` picks the component that is the argmax of the model
    output at a trajectory's original point (the anchor) and keeps using
    that component afterwards.
    """

    def __init__(self, mode="scalar", index=0):
        if mode not in PROJECTION_MODES:
            raise ValueError(f"unknown projection mode {mode!r}")
        self.mode = mode
        self.index = int(index)

    def resolve(self, anchor):
        """Bind class-logit to a concrete component using the anchor output."""
        if self.mode != "class-logit":
            return self
        if anchor is None:
            raise ValueError("class-logit projection needs the model output "
                             "at the original point as anchor")
        return OutputProjection("component", int(np.argmax(anchor)))

    def apply_batch(self, outputs, anchor=None):
        outputs = np.atleast_2d(np.asarray(outputs, dtype=float))
        m = outputs.shape[1]
        mode, index = self.mode, self.index
        if mode == "class-logit":
            resolved = self.resolve(anchor)
            mode, index = resolved.mode, resolved.index
        if mode == "scalar":
            if m != 1:
                raise ValueError("scalar projection requires a 1-D model output; "
                                 "use component/class-logit/norm instead")
            return outputs[:, 0]
        if mode == "component":
            if not 0 <= index < m:
                raise ValueError(f"component index {index} out of range for "
                                 f"output dimension {m}")
            return outputs[:, index]
        return np.linalg.norm(outputs, axis=1)

    def __repr__(self):
        if self.mode == "component":
            return f"OutputProjection('component', {self.index})"
        return f"OutputProjection({self.mode!r})"


def project(output, projection, anchor=None):
    """Scalar projection of a single output vector."""
    return float(projection.apply_batch(np.asarray(output)[None, :], anchor)[0])


def predicted_label(output, threshold=0.5):
    """Class label of one model output: argmax for m >= 2, output > threshold
    for scalar models."""
    output = np.asarray(output, dtype=float)
    if output.shape[-1] == 1:
        return int(output[..., 0] > threshold)
    return int(np.argmax(output))


def class_probability(output, label):
    """Softmax probability of ``label`` for m >= 2; for scalar models the
    output is read as P(class 1), clamped to [0, 1]."""
    output = np.asarray(output, dtype=float)
    if output.shape[-1] == 1:
        p1 = min(max(float(output[..., 0]), 0.0), 1.0)
        return p1 if label == 1 else 1.0 - p1
    z = output - np.max(output)
    ez = np.exp(z)
    return float(ez[label] / ez.sum())
