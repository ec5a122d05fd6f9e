import numpy as np
import pytest

from harmonica.errors import ConfigError
from harmonica.images import (load_grayscale_image, read_pgm, rescale_bilinear,
                              vector_to_image, write_pgm)


def write_p2(path, img, maxval=255):
    img = np.asarray(img, dtype=int)
    h, w = img.shape
    body = "\n".join(" ".join(str(v) for v in row) for row in img)
    path.write_text(f"P2\n# comment\n{w} {h}\n{maxval}\n{body}\n")


class TestPgmIO:
    def test_p2_roundtrip(self, tmp_path):
        img = np.arange(12).reshape(3, 4) * 20
        p = tmp_path / "a.pgm"
        write_p2(p, img)
        assert np.array_equal(read_pgm(p), img)

    def test_p5_roundtrip(self, tmp_path):
        img = (np.arange(30).reshape(5, 6) * 8 % 256).astype(float)
        p = tmp_path / "b.pgm"
        write_pgm(p, img)
        assert np.array_equal(read_pgm(p), img)

    def test_unsupported_magic(self, tmp_path):
        p = tmp_path / "c.ppm"
        p.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
        with pytest.raises(ConfigError, match="P6"):
            read_pgm(p)

    def test_maxval_over_255(self, tmp_path):
        p = tmp_path / "d.pgm"
        p.write_text("P2\n1 1\n65535\n1000\n")
        with pytest.raises(ConfigError, match="maxval"):
            read_pgm(p)

    def test_zero_dimensions(self, tmp_path):
        p = tmp_path / "e.pgm"
        p.write_text("P2\n0 3\n255\n")
        with pytest.raises(ConfigError, match="zero"):
            read_pgm(p)

    def test_truncated_raster(self, tmp_path):
        p = tmp_path / "f.pgm"
        p.write_bytes(b"P5\n4 4\n255\n" + bytes(7))
        with pytest.raises(ConfigError, match="truncated"):
            read_pgm(p)


class TestRescale:
    def test_identity_rescale(self, tmp_path):
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, size=(100, 100)).astype(float)
        p = tmp_path / "g.pgm"
        write_pgm(p, img)
        vec = load_grayscale_image(p, 100, 100)
        assert vec.shape == (10000,)
        assert np.array_equal(vec, img.ravel())

    def test_constant_field_stays_constant(self, tmp_path):
        p = tmp_path / "h.pgm"
        write_pgm(p, np.full((2, 2), 128.0))
        vec = load_grayscale_image(p, 4, 4)
        assert np.array_equal(vec, np.full(16, 128.0))

    def test_gradient_two_to_four(self, tmp_path):
        # 2x1 image [0, 255] upsampled along x with corner alignment:
        # samples at src positions 0, 1/3, 2/3, 1 -> 0, 85, 170, 255.
        p = tmp_path / "i.pgm"
        write_pgm(p, np.array([[0.0, 255.0]]))
        vec = load_grayscale_image(p, 4, 1)
        assert np.all(np.diff(vec) >= 0)
        assert vec[0] == 0.0 and vec[-1] == 255.0
        assert np.array_equal(vec, [0.0, 85.0, 170.0, 255.0])

    def test_downscale_range(self):
        img = np.linspace(0, 255, 64).reshape(8, 8)
        out = rescale_bilinear(img, 3, 3)
        assert out.shape == (3, 3)
        assert out.min() >= 0 and out.max() <= 255

    def test_values_are_integers(self, tmp_path):
        rng = np.random.default_rng(9)
        p = tmp_path / "j.pgm"
        write_pgm(p, rng.integers(0, 256, size=(7, 5)).astype(float))
        vec = load_grayscale_image(p, 11, 13)
        assert np.array_equal(vec, np.rint(vec))
        assert vec.min() >= 0 and vec.max() <= 255

    def test_vector_to_image_inverse(self):
        img = np.arange(6, dtype=float).reshape(2, 3)
        assert np.array_equal(vector_to_image(img.ravel(), 3, 2), img)
        with pytest.raises(ValueError):
            vector_to_image(np.zeros(5), 2, 2)
