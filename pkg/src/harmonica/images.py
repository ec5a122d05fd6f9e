"""Grayscale PGM ingestion: parse, bilinear rescale, flatten to a vector.

Only P2 (ASCII) and P5 (binary) files with maxval <= 255 are accepted; that
is the whole image surface of the package, color stays out of scope.
"""

import numpy as np

from .errors import ConfigError


def read_pgm(path):
    """Parse a P2/P5 PGM into a (height, width) float array of 0..255."""
    with open(path, "rb") as fh:
        data = fh.read()

    # Header: magic, width, height, maxval, separated by whitespace/comments.
    tokens = []
    pos = 0
    while len(tokens) < 4 and pos < len(data):
        chunk = data[pos:pos + 1]
        if chunk == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
            continue
        if chunk.isspace():
            pos += 1
            continue
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if len(tokens) < 4:
        raise ConfigError(f"{path}: truncated PGM header")

    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise ConfigError(f"{path}: unsupported format {magic!r}, expected P2 or P5")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise ConfigError(f"{path}: non-numeric PGM header fields") from None
    if width <= 0 or height <= 0:
        raise ConfigError(f"{path}: zero-sized image ({width}x{height})")
    if not 0 < maxval <= 255:
        raise ConfigError(f"{path}: maxval {maxval} out of supported range (1..255)")

    pos += 1  # single whitespace after maxval
    if magic == b"P5":
        raster = data[pos:pos + width * height]
        if len(raster) < width * height:
            raise ConfigError(f"{path}: truncated P5 raster")
        img = np.frombuffer(raster, dtype=np.uint8).astype(float)
    else:
        try:
            values = [int(t) for t in data[pos:].split()]
        except ValueError:
            raise ConfigError(f"{path}: non-numeric P2 raster") from None
        if len(values) < width * height:
            raise ConfigError(f"{path}: truncated P2 raster")
        img = np.asarray(values[: width * height], dtype=float)
    if img.max(initial=0) > maxval:
        raise ConfigError(f"{path}: raster value exceeds declared maxval")
    return img.reshape(height, width)


def write_pgm(path, image):
    """Write a (height, width) array as a binary P5 file (values 0..255)."""
    image = np.rint(np.clip(np.asarray(image, dtype=float), 0, 255)).astype(np.uint8)
    if image.ndim != 2:
        raise ValueError("write_pgm expects a 2-D image")
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def rescale_bilinear(image, target_w, target_h):
    """Bilinear resample with corner alignment, so corner pixels map exactly.

    A size-1 target axis samples the source center.
    """
    image = np.asarray(image, dtype=float)
    src_h, src_w = image.shape
    if target_w < 1 or target_h < 1:
        raise ValueError("target dimensions must be positive")

    def coords(target, source):
        if target == 1:
            return np.full(1, (source - 1) / 2.0)
        return np.arange(target) * (source - 1) / (target - 1)

    ys, xs = coords(target_h, src_h), coords(target_w, src_w)
    y0 = np.clip(np.floor(ys).astype(int), 0, src_h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, src_w - 1)
    y1, x1 = np.minimum(y0 + 1, src_h - 1), np.minimum(x0 + 1, src_w - 1)
    wy, wx = ys - y0, xs - x0

    top = image[y0][:, x0] * (1 - wx) + image[y0][:, x1] * wx
    bot = image[y1][:, x0] * (1 - wx) + image[y1][:, x1] * wx
    return top * (1 - wy[:, None]) + bot * wy[:, None]


def load_grayscale_image(path, target_w, target_h):
    """PGM file to a row-major vector of length target_w * target_h.

    Rescales with bilinear interpolation, then rounds to integers in 0..255
    (stored as floats so they feed straight into a model).
    """
    img = read_pgm(path)
    resized = rescale_bilinear(img, int(target_w), int(target_h))
    return np.clip(np.rint(resized), 0, 255).ravel()


def vector_to_image(vec, width, height):
    """Inverse of the flattening done by load_grayscale_image."""
    vec = np.asarray(vec, dtype=float)
    if vec.size != width * height:
        raise ValueError(f"vector of length {vec.size} does not match "
                         f"{width}x{height}")
    return vec.reshape(height, width)
