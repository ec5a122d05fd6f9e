import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmonica.errors import EmptyBallError
from harmonica.geometry import (BallSpec, ball_points, coverage_metrics,
                                one_hot_alignment, rodrigues_rotation,
                                simplex_vertices)


class TestSimplexVertices:
    @pytest.mark.parametrize("n", [1, 2, 3, 7, 10, 33, 100])
    def test_basis_invariants(self, n):
        basis = simplex_vertices(n)
        V = basis.vertices
        tol = 1e-12 * max(n, 1)
        assert V.shape == (n + 1, n)
        assert np.max(np.abs(np.linalg.norm(V, axis=1) - 1.0)) < tol
        assert np.max(np.abs(V.sum(axis=0))) < tol
        gram = V @ V.T
        iu = np.triu_indices(n + 1, k=1)
        assert np.max(np.abs(gram[iu] + 1.0 / n)) < tol

    def test_n1_is_plus_minus_one(self):
        V = simplex_vertices(1).vertices
        assert np.allclose(sorted(V.ravel()), [-1.0, 1.0])

    def test_n2_is_equilateral_triangle(self):
        V = simplex_vertices(2).vertices
        gram = V @ V.T
        for i in range(3):
            for j in range(i + 1, 3):
                assert gram[i, j] == pytest.approx(-0.5, abs=1e-12)

    def test_zero_dimension_rejected(self):
        with pytest.raises(ValueError):
            simplex_vertices(0)

    def test_high_n_converges_to_hypercube_vertices(self):
        # All but one vertex align with a signed one-hot direction; the
        # remaining vertex is exactly the normalized all-negative corner,
        # which is a hypercube vertex but not a one-hot one.
        n = 10000
        V = simplex_vertices(n).vertices
        align = np.sort(one_hot_alignment(V))
        assert np.all(align[1:] > 0.999)
        assert align[0] == pytest.approx(1.0 / np.sqrt(n), rel=1e-9)
        corner = -np.ones(n) / np.sqrt(n)
        diag = V[np.argmin(one_hot_alignment(V))]
        assert float(diag @ corner) == pytest.approx(1.0, abs=1e-9)

    def test_alignment_improves_monotonically_with_n(self):
        # Worst one-hot alignment over the axis-like vertices (the corner
        # vertex excluded) improves monotonically on a sampled grid of n.
        diffs = []
        for n in (4, 8, 16, 32, 64, 128, 256):
            align = np.sort(one_hot_alignment(simplex_vertices(n).vertices))
            diffs.append(1.0 - align[1])  # align[0] is the corner vertex
        assert all(a > b for a, b in zip(diffs, diffs[1:]))

    def test_one_hot_approx_flag(self):
        V = simplex_vertices(5000, one_hot_approx=True).vertices
        assert V.shape == (5001, 5000)
        assert np.count_nonzero(V[0]) == 1
        assert np.allclose(np.linalg.norm(V, axis=1), 1.0)


class TestRodriguesRotation:
    def test_theta_zero_is_identity(self):
        R = rodrigues_rotation([1, 0, 0], [0, 1, 0], 0.0)
        assert np.allclose(R, np.eye(3), atol=1e-15)

    def test_planar_quarter_turn(self):
        R = rodrigues_rotation([1.0, 0.0], [0.0, 1.0], np.pi / 2)
        assert np.allclose(R @ [1.0, 0.0], [0.0, 1.0], atol=1e-12)

    def test_orthogonality_random_pair(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal(5)
        a /= np.linalg.norm(a)
        b = rng.standard_normal(5)
        b -= (b @ a) * a
        b /= np.linalg.norm(b)
        R = rodrigues_rotation(a, b, 0.7)
        assert np.max(np.abs(R.T @ R - np.eye(5))) < 1e-10

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            rodrigues_rotation([1, 0], [1, 0], 0.3)
        with pytest.raises(ValueError):
            rodrigues_rotation([2, 0], [0, 1], 0.3)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 8), st.floats(-3.0, 3.0), st.integers(0, 2 ** 31))
    def test_orthogonality_property(self, dim, theta, seed):
        rng = np.random.default_rng(seed)
        q, _ = np.linalg.qr(rng.standard_normal((dim, 2)))
        R = rodrigues_rotation(q[:, 0], q[:, 1], theta)
        assert np.max(np.abs(R.T @ R - np.eye(dim))) < 1e-10


class TestBallPoints:
    def test_simplex_triangle(self):
        pts = ball_points(np.zeros(2), BallSpec("simplex", 1.0))
        assert pts.shape == (3, 2)
        d = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        sides = d[np.triu_indices(3, k=1)]
        assert np.allclose(sides, sides[0])
        assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)

    def test_anti_simplex_mean_is_center(self):
        center = np.array([1.0, 2.0, 3.0])
        pts = ball_points(center, BallSpec("simplex-anti", 0.5))
        assert pts.shape == (8, 2 + 1)
        assert np.max(np.abs(pts.mean(axis=0) - center)) < 1e-12

    @pytest.mark.parametrize("scheme,count", [
        ("simplex", 7), ("simplex-anti", 14), ("random", 6),
        ("hypercube", 12), ("circle", None),
    ])
    def test_radius_exact(self, scheme, count):
        n = 2 if scheme == "circle" else 6
        center = np.arange(n, dtype=float)
        pts = ball_points(center, BallSpec(scheme, 0.3, seed=4))
        if count is not None:
            assert pts.shape[0] == count
        radii = np.linalg.norm(pts - center, axis=1)
        assert np.max(np.abs(radii - 0.3)) < 0.3 * 1e-12

    def test_hypercube_sampled_subset(self):
        center = np.zeros(10000)
        pts = ball_points(center, BallSpec("hypercube-sampled", 100.0,
                                           sample_fraction=0.001, seed=11))
        assert pts.shape == (20, 10000)
        # every point touches exactly one coordinate, by +-r
        nz = np.count_nonzero(pts, axis=1)
        assert set(nz) == {1}
        assert set(np.abs(pts).max(axis=1)) == {100.0}

    def test_hypercube_sampled_order_is_canonical(self):
        pts = ball_points(np.zeros(4), BallSpec("hypercube-sampled", 1.0,
                                                sample_fraction=0.9, seed=2))
        full = ball_points(np.zeros(4), BallSpec("hypercube", 1.0))
        idx = [np.flatnonzero((full == p).all(axis=1))[0] for p in pts]
        assert idx == sorted(idx)

    def test_seed_reproducibility_across_threads(self):
        from concurrent.futures import ThreadPoolExecutor
        spec = BallSpec("random", 0.2, seed=33)
        center = np.linspace(0, 1, 8)
        with ThreadPoolExecutor(max_workers=4) as pool:
            results = list(pool.map(lambda _: ball_points(center, spec), range(8)))
        for r in results[1:]:
            assert np.array_equal(results[0], r)

    def test_different_seeds_differ(self):
        a = ball_points(np.zeros(5), BallSpec("random", 1.0, seed=1))
        b = ball_points(np.zeros(5), BallSpec("random", 1.0, seed=2))
        assert not np.array_equal(a, b)

    def test_circle_rejects_other_dims(self):
        with pytest.raises(ValueError):
            ball_points(np.zeros(3), BallSpec("circle", 1.0))

    def test_bad_specs_rejected(self):
        with pytest.raises(ValueError):
            BallSpec("simplex", 0.0)
        with pytest.raises(ValueError):
            BallSpec("nope", 1.0)
        with pytest.raises(ValueError):
            BallSpec("hypercube-sampled", 1.0, sample_fraction=0.0)


class TestCoverageMetrics:
    @pytest.mark.parametrize("scheme", ["simplex", "simplex-anti", "hypercube"])
    def test_symmetric_schemes_centered(self, scheme):
        for n in (2, 5, 17, 64):
            center = np.zeros(n)
            pts = ball_points(center, BallSpec(scheme, 1.0))
            centrality, _ = coverage_metrics(pts, center)
            assert centrality < 1e-10

    def test_two_point_example(self):
        center = np.zeros(3)
        pts = np.array([[0.5, 0, 0], [-0.5, 0, 0]])
        centrality, isotropy = coverage_metrics(pts, center)
        assert centrality == pytest.approx(0.0, abs=1e-15)
        # angles to e0 are {0, pi}; population std is pi/2
        assert isotropy == pytest.approx(np.pi / 2, abs=1e-12)

    def test_random_centrality_grows_like_sqrt_n(self):
        dims = [2, 4, 8, 16, 32, 64, 128, 256]
        means = []
        for n in dims:
            cs = []
            for seed in range(30):
                pts = ball_points(np.zeros(n), BallSpec("random", 1.0, seed=seed))
                cs.append(coverage_metrics(pts, np.zeros(n))[0])
            means.append(np.mean(cs))
        slope = np.polyfit(np.log(dims), np.log(means), 1)[0]
        assert 0.4 < slope < 0.6

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            coverage_metrics(np.ones((1, 3)), np.zeros(3))

    def test_empty_ball_error_type(self):
        assert issubclass(EmptyBallError, Exception)
