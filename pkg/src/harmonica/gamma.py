"""Deviation from the mean-value property: at a point, over a region, as a
field on a grid, and swept across radii.

The quantity computed everywhere below is

    gamma(x, r) = | f(x) - mean over ball points of f |

with the model output reduced to a scalar by an OutputProjection first.
A gamma of zero is what a harmonic function would produce for any centered
ball; the size of gamma measures local instability of the model.
"""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyBallError, EvaluationError, HarmonicaError
from .geometry import ball_points
from .models import OutputProjection


def derive_seed(*parts):
    """Deterministic 63-bit seed from a tuple of integers."""
    ss = np.random.SeedSequence(entropy=[int(p) & 0x7FFFFFFFFFFFFFFF for p in parts])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class GammaResult:
    """gamma >= 0; ball_count is the number of model evaluations that went
    into the ball average; stderr is 0 for exhaustive deterministic balls
    (the discrete ball is the estimator) and the standard error of the ball
    mean for sampled schemes."""

    gamma: float
    ball_count: int
    stderr: float


@dataclass(frozen=True)
class GridSampling:
    points_per_dim: tuple  # one count per dimension, or a single int for all

    def counts(self, ndim):
        ppd = self.points_per_dim
        if np.isscalar(ppd):
            ppd = (int(ppd),) * ndim
        if len(ppd) != ndim:
            raise ValueError(f"grid has {len(ppd)} counts for {ndim} dimensions")
        if any(c < 1 for c in ppd):
            raise ValueError("grid counts must be >= 1")
        return tuple(int(c) for c in ppd)


@dataclass(frozen=True)
class MonteCarloSampling:
    count: int
    seed: int = 0


@dataclass(frozen=True)
class PointSetSampling:
    points: object  # (k, n) array-like

    @staticmethod
    def of(points):
        return PointSetSampling(points=np.array(points, dtype=float))


@dataclass(frozen=True)
class RegionSpec:
    """A boxed region plus how to sample points from it."""

    bounds: tuple  # ((lo, hi), ...) per dimension
    sampling: object

    def __post_init__(self):
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"region bound [{lo}, {hi}] is empty")

    @property
    def ndim(self):
        return len(self.bounds)


def region_points(region):
    """Materialize the region's sample points as a (k, n) array, row-major
    for grids (last dimension varies fastest)."""
    d = region.ndim
    s = region.sampling
    if isinstance(s, GridSampling):
        counts = s.counts(d)
        axes = [np.linspace(lo, hi, c) for (lo, hi), c in zip(region.bounds, counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)
    if isinstance(s, MonteCarloSampling):
        if s.count < 1:
            raise ValueError("Monte Carlo sampling needs count >= 1")
        rng = np.random.default_rng(s.seed)
        lo = np.array([b[0] for b in region.bounds])
        hi = np.array([b[1] for b in region.bounds])
        return lo + (hi - lo) * rng.random((s.count, d))
    if isinstance(s, PointSetSampling):
        pts = np.asarray(s.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != d:
            raise ValueError(f"point set of shape {pts.shape} does not match "
                             f"a {d}-dimensional region")
        return pts
    raise ValueError(f"unknown sampling spec {type(s).__name__}")


def grid_region(bounds, points_per_dim):
    return RegionSpec(tuple(tuple(b) for b in bounds), GridSampling(points_per_dim))


def _default_projection(model):
    return OutputProjection("scalar" if model.output_dim == 1 else "class-logit")


def _usable_ball(model, ball, out_of_domain):
    """Apply the out-of-domain policy to ball points before evaluation."""
    dom = model.domain
    if dom is None:
        return ball
    policy = out_of_domain
    if policy == "auto":
        policy = "clamp" if dom.quantized else "skip"
    if policy == "clamp":
        # Quantized domains re-snap inside eval; explicit clamp covers the rest.
        return dom.clamp(ball) if not dom.quantized else ball
    kept = ball[dom.contains(ball)]
    if kept.shape[0] == 0:
        raise EmptyBallError("every ball point falls outside the model domain")
    return kept


def gamma_point(model, x, spec, projection=None, out_of_domain="auto"):
    """Deviation between f at x and the ball average of f, per Eq-style
    definition above.

    The class-logit projection is anchored at x itself.  Model failures are
    re-raised as EvaluationError with the offending ball point attached when
    it can be identified.
    """
    x = np.asarray(x, dtype=float)
    projection = projection or _default_projection(model)
    ball = ball_points(x, spec)
    if ball.shape[1] != model.input_dim:
        raise ValueError(f"point of dimension {ball.shape[1]} does not match "
                         f"model input dimension {model.input_dim}")
    ball = _usable_ball(model, ball, out_of_domain)
    batch = np.vstack([x[None, :], ball])
    try:
        outs = model.eval_batch(batch)
    except HarmonicaError as exc:
        row = getattr(exc, "row", None)
        point = None if row is None or row == 0 else batch[row]
        raise EvaluationError(f"model evaluation failed on the ball around "
                              f"{x.tolist()}: {exc}", point=point) from exc
    values = projection.apply_batch(outs, anchor=outs[0])
    center, ball_vals = values[0], values[1:]
    gamma = float(abs(center - ball_vals.mean()))
    if spec.sampled and ball_vals.size >= 2:
        stderr = float(ball_vals.std(ddof=1) / np.sqrt(ball_vals.size))
    else:
        stderr = 0.0
    return GammaResult(gamma=gamma, ball_count=int(ball_vals.size), stderr=stderr)


@dataclass(frozen=True)
class RegionResult:
    mean_gamma: float
    stderr: float
    count: int
    failures: tuple  # (point index, message) pairs kept in lenient mode
    per_point: object  # list of (index, point, GammaResult) or None


def _effective_jobs(model, jobs):
    jobs = max(1, int(jobs))
    cap = model.max_concurrency
    return min(jobs, cap) if cap else jobs


def gamma_region(model, region, spec, projection=None, jobs=1, lenient=False,
                 collect_points=False, out_of_domain="auto"):
    """Mean gamma over the region's sample points.

    The reduction runs in point-index order whatever the worker count, so
    results are bitwise reproducible for fixed seeds.  In strict mode
    (default) the first failing point aborts; in lenient mode failures are
    skipped and counted.
    """
    pts = region_points(region)
    if pts.shape[1] != model.input_dim:
        raise ValueError(f"region dimension {pts.shape[1]} does not match "
                         f"model input dimension {model.input_dim}")
    projection = projection or _default_projection(model)

    def one(i):
        try:
            return i, gamma_point(model, pts[i], spec, projection, out_of_domain), None
        except HarmonicaError as exc:
            return i, None, exc

    n_jobs = _effective_jobs(model, jobs)
    gammas, failures, per_point = [], [], [] if collect_points else None
    pool = ThreadPoolExecutor(max_workers=n_jobs) if n_jobs > 1 else None
    try:
        if pool is None:
            results = map(one, range(pts.shape[0]))
        else:
            results = pool.map(one, range(pts.shape[0]), chunksize=64)
        for i, res, exc in results:
            if exc is not None:
                if not lenient:
                    raise EvaluationError(f"gamma failed at region point {i} "
                                          f"{pts[i].tolist()}: {exc}",
                                          point=getattr(exc, "point", None)) from exc
                failures.append((i, str(exc)))
                continue
            gammas.append(res.gamma)
            if collect_points:
                per_point.append((i, pts[i], res))
    finally:
        if pool is not None:
            pool.shutdown(wait=False, cancel_futures=True)

    if not gammas:
        raise EmptyBallError("no region point produced a gamma value")
    arr = np.asarray(gammas)
    stderr = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size >= 2 else 0.0
    return RegionResult(mean_gamma=float(arr.mean()), stderr=stderr,
                        count=int(arr.size), failures=tuple(failures),
                        per_point=per_point)


@dataclass(frozen=True)
class GammaField:
    """Per-node gamma on a grid region, row-major node order."""

    region: RegionSpec
    values: np.ndarray

    @property
    def grid_shape(self):
        return self.region.sampling.counts(self.region.ndim)


def gamma_field(model, region, spec, projection=None, jobs=1, lenient=False,
                out_of_domain="auto"):
    """Gamma at every node of a grid region."""
    if not isinstance(region.sampling, GridSampling):
        raise ValueError("gamma_field needs a grid-sampled region")
    res = gamma_region(model, region, spec, projection, jobs=jobs,
                       lenient=lenient, collect_points=True,
                       out_of_domain=out_of_domain)
    n_nodes = int(np.prod(region.sampling.counts(region.ndim)))
    values = np.full(n_nodes, np.nan)
    for i, _pt, r in res.per_point:
        values[i] = r.gamma
    return GammaField(region=region, values=values)


def radius_sweep(model, region, radii, spec, projection=None, jobs=1,
                 lenient=False, out_of_domain="auto"):
    """gamma_region at each radius, sharing one set of region points so the
    per-radius means are variance-paired.

    Returns a list of (radius, mean_gamma, stderr) rows in input order.
    """
    radii = [float(r) for r in radii]
    if not radii:
        raise ValueError("radius sweep needs at least one radius")
    if any(r <= 0 for r in radii):
        raise ValueError("all sweep radii must be positive")
    pts = region_points(region)
    shared = RegionSpec(region.bounds, PointSetSampling.of(pts))
    rows = []
    for r in radii:
        res = gamma_region(model, shared, replace(spec, radius=r), projection,
                           jobs=jobs, lenient=lenient, out_of_domain=out_of_domain)
        rows.append((r, res.mean_gamma, res.stderr))
    return rows


def _fmt(v):
    return repr(float(v))


def write_field_csv(field, path):
    """Field nodes as dim0,dim1,...,gamma rows (plot-ready for 2-D contours)."""
    pts = region_points(field.region)
    d = pts.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"dim{i}" for i in range(d)] + ["gamma"])
        for row, g in zip(pts, field.values):
            w.writerow([_fmt(c) for c in row] + [_fmt(g)])


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["radius", "mean_gamma", "stderr"])
        for r, mean, err in rows:
            w.writerow([_fmt(r), _fmt(mean), _fmt(err)])


def write_per_point_csv(result, path, ndim):
    """Per-point dump of a collected region run."""
    if result.per_point is None:
        raise ValueError("region result was computed without collect_points")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["idx"] + [f"dim{i}" for i in range(ndim)]
                   + ["gamma", "stderr", "ball_count"])
        for i, pt, res in result.per_point:
            w.writerow([i] + [_fmt(c) for c in pt]
                       + [_fmt(res.gamma), _fmt(res.stderr), res.ball_count])
