"""Discrete approximations of the n-ball and their space-covering diagnostics.

A "ball" here is a finite set of points at Euclidean distance exactly r from
a center.  Supported schemes:

* ``simplex``            n+1 vertices of the regular n-simplex
* ``simplex-anti``       the simplex plus its reflection, 2(n+1) points
* ``random``             n points uniform on the sphere, seeded
* ``hypercube``          2n signed one-hot displacements
* ``hypercube-sampled``  a seeded subset of the hypercube set
* ``circle``             k equally spaced points on the circle (2-D only)

All functions are pure; identical arguments give identical outputs no matter
how many threads call them.
"""

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .errors import EmptyBallError

SCHEMES = ("simplex", "simplex-anti", "random", "hypercube",
           "hypercube-sampled", "circle")

# Schemes whose point set is a random sample of a larger ideal ball, as
# opposed to an exhaustive deterministic design.
SAMPLED_SCHEMES = ("random", "hypercube-sampled")

# Schemes where every displacement touches exactly one coordinate.
ONE_HOT_SCHEMES = ("hypercube", "hypercube-sampled")


@dataclass(frozen=True)
class BallSpec:
    """How to approximate the ball B(x, r) with finitely many points.

    ``sample_fraction`` only applies to ``hypercube-sampled``; ``seed`` to the
    seeded schemes; ``circle_points`` to ``circle``.
    """

    scheme: str
    radius: float
    sample_fraction: float = 1.0
    seed: int = 0
    circle_points: int = 64

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown ball scheme {self.scheme!r}; "
                             f"expected one of {SCHEMES}")
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        if not 0 < self.sample_fraction <= 1:
            raise ValueError("sample_fraction must be in (0, 1], got "
                             f"{self.sample_fraction}")
        if self.circle_points < 2:
            raise ValueError("circle_points must be at least 2")

    @property
    def sampled(self):
        return self.scheme in SAMPLED_SCHEMES

    @property
    def one_hot(self):
        return self.scheme in ONE_HOT_SCHEMES

    def reseeded(self, seed):
        """Same geometry, different random stream."""
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class SimplexBasis:
    """Unit vertices of the regular n-simplex centered at the origin.

    vertices has shape (n+1, n); rows sum to zero and pairwise dot products
    equal -1/n.
    """

    dimension: int
    vertices: np.ndarray


def rodrigues_rotation(n1, n2, theta):
    """Rotation by theta in the plane spanned by orthonormal vectors n1, n2.

    R = I + (n2 n1^T - n1 n2^T) sin(theta) + (n1 n1^T + n2 n2^T)(cos(theta) - 1)

    R maps n1 to cos(theta) n1 + sin(theta) n2 and fixes the orthogonal
    complement of the plane.
    """
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    if n1.shape != n2.shape or n1.ndim != 1:
        raise ValueError("n1 and n2 must be vectors of equal dimension")
    if abs(np.linalg.norm(n1) - 1.0) > 1e-10 or abs(np.linalg.norm(n2) - 1.0) > 1e-10:
        raise ValueError("n1 and n2 must be unit vectors (within 1e-10)")
    if abs(float(n1 @ n2)) > 1e-10:
        raise ValueError("n1 and n2 must be orthogonal (within 1e-10)")
    eye = np.eye(n1.shape[0])
    skew = np.outer(n2, n1) - np.outer(n1, n2)
    proj = np.outer(n1, n1) + np.outer(n2, n2)
    return eye + skew * np.sin(theta) + proj * (np.cos(theta) - 1.0)


def simplex_vertices(n, one_hot_approx=False):
    """Vertices of the regular n-simplex via the embed-center-rotate route.

    Start from the n+1 standard basis vectors of R^(n+1), subtract the group
    mean, rotate the hyperplane normal (1,...,1)/sqrt(n+1) onto the last axis
    (cos(theta) = 1/sqrt(n+1)), drop the now-zero last coordinate and
    normalize.  The rotation is applied through its rank-2 structure, so the
    cost is O(n^2) rather than a dense matrix product.

    With ``one_hot_approx=True`` and n >= 4096 the exact construction is
    replaced by its large-n limit: the n positive one-hot vectors plus the
    normalized all-negative corner.  Off by default.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"simplex dimension must be >= 1, got {n}")

    if one_hot_approx and n >= 4096:
        verts = np.zeros((n + 1, n))
        idx = np.arange(n)
        verts[idx, idx] = 1.0
        verts[n, :] = -1.0 / np.sqrt(n)
        return SimplexBasis(dimension=n, vertices=verts)

    m = n + 1
    # Centered embedded vertices: V[i] = e_i - (1/m) * ones, shape (m, m).
    verts = np.full((m, m), -1.0 / m)
    np.fill_diagonal(verts, 1.0 - 1.0 / m)

    # Rotation G taking u = ones/sqrt(m) onto e_last: G = R(w, e_last, theta)
    # with w = (1,..,1,0)/sqrt(n) and cos(theta) = 1/sqrt(m).  Applied as a
    # rank-2 update: G v = v + (e (w.v) - w (e.v)) sin + (w (w.v) + e (e.v)) (cos - 1).
    cos_t = 1.0 / np.sqrt(m)
    sin_t = np.sqrt(n / m)
    w = np.zeros(m)
    w[:n] = 1.0 / np.sqrt(n)
    wv = verts @ w                      # (m,)
    ev = verts[:, -1].copy()            # dot with e_last
    verts[:, -1] += wv * sin_t + ev * (cos_t - 1.0)
    verts[:, :n] += np.outer(-ev * sin_t + wv * (cos_t - 1.0), w[:n])

    last = np.max(np.abs(verts[:, -1]))
    if last > 1e-9 * m:
        raise AssertionError(f"rotation failed to zero the auxiliary axis ({last})")
    verts = verts[:, :n]
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    return SimplexBasis(dimension=n, vertices=verts)


@lru_cache(maxsize=8)
def _simplex_units(n):
    return simplex_vertices(n).vertices


def _sphere_point(seed, index, n):
    # Counter-based stream: point i reads from a disjoint 2^128-aligned block,
    # so per-point draws are independent of generation order.
    rng = np.random.Generator(np.random.Philox(counter=index << 128, key=seed))
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def ball_points(center, spec):
    """Points at distance exactly spec.radius from center, per spec.scheme.

    Returns an array of shape (k, n).  Order is deterministic given the spec:
    simplex vertices in construction order (reflections appended), hypercube
    displacements as +e_0..+e_{n-1} then -e_0..-e_{n-1} (sampled subsets keep
    that order), circle points counterclockwise from angle 0.
    """
    center = np.asarray(center, dtype=float)
    if center.ndim != 1 or center.shape[0] < 1:
        raise ValueError("center must be a vector of dimension >= 1")
    n = center.shape[0]
    r = spec.radius

    if spec.scheme == "simplex":
        units = _simplex_units(n)
    elif spec.scheme == "simplex-anti":
        base = _simplex_units(n)
        units = np.vstack([base, -base])
    elif spec.scheme == "hypercube":
        units = np.vstack([np.eye(n), -np.eye(n)])
    elif spec.scheme == "hypercube-sampled":
        total = 2 * n
        k = int(np.ceil(spec.sample_fraction * total))
        if k < 1:
            raise EmptyBallError("sample_fraction yields an empty ball")
        rng = np.random.Generator(np.random.Philox(key=spec.seed))
        idx = np.sort(rng.choice(total, size=k, replace=False))
        units = np.zeros((k, n))
        coord = idx % n
        sign = np.where(idx < n, 1.0, -1.0)
        units[np.arange(k), coord] = sign
    elif spec.scheme == "random":
        units = np.stack([_sphere_point(spec.seed, i, n) for i in range(n)])
    elif spec.scheme == "circle":
        if n != 2:
            raise ValueError("the circle scheme is defined for 2-D inputs only")
        ang = 2.0 * np.pi * np.arange(spec.circle_points) / spec.circle_points
        units = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:  # pragma: no cover - rejected by BallSpec
        raise ValueError(f"unknown scheme {spec.scheme!r}")

    return center[None, :] + r * units


def coverage_metrics(points, center):
    """Centrality and isotropy of a ball approximation.

    centrality: Euclidean norm of the sum of displacement vectors.
    isotropy: population standard deviation of the angles each displacement
    makes with the first basis vector.
    """
    points = np.asarray(points, dtype=float)
    center = np.asarray(center, dtype=float)
    if points.shape[0] < 2:
        raise ValueError("coverage metrics need at least 2 points")
    disp = points - center[None, :]
    centrality = float(np.linalg.norm(disp.sum(axis=0)))
    norms = np.linalg.norm(disp, axis=1)
    cosines = np.clip(disp[:, 0] / norms, -1.0, 1.0)
    angles = np.arccos(cosines)
    isotropy = float(np.std(angles))
    return centrality, isotropy


def one_hot_alignment(vertices):
    """Cosine of each unit vertex to its nearest signed one-hot vector.

    For a unit vector that is simply max(|v_i|).  For the simplex all vertices
    but one approach 1 as n grows; the remaining vertex is the normalized
    all-negative corner of the hypercube, whose one-hot cosine is 1/sqrt(n).
    """
    vertices = np.asarray(vertices, dtype=float)
    return np.max(np.abs(vertices), axis=1)
