import numpy as np
import pytest

from dkf.image import PlanarImage, chroma_dims


def _plane(width, height, fn):
    xs = np.arange(width)[None, :].astype(np.float64)
    ys = np.arange(height)[:, None].astype(np.float64)
    vals = np.broadcast_to(np.asarray(fn(xs, ys), dtype=np.float64), (height, width))
    return np.clip(vals, 0, 255).astype(np.uint8)


def _smooth_noise(rng, width, height, sigma, cell=4):
    small = rng.standard_normal((height // cell + 1, width // cell + 1))
    up = np.repeat(np.repeat(small, cell, axis=0), cell, axis=1)[:height, :width]
    return sigma * up


def make_corpus(width=192, height=128):
    """Deterministic synthetic still-image corpus (12 images, 4:2:0).

    Mixes gradients, hard edges at several angles, periodic texture and
    band-limited noise so the RD sweep spans the low/medium/high rate bands
    and the deringing filter has real edges to work on.
    """
    rng = np.random.default_rng(20160701)
    images = []

    def add(name, luma_fn, cb_fn=None, cr_fn=None):
        y = _plane(width, height, luma_fn)
        cw, ch = chroma_dims(width, height, "420")
        cb = _plane(cw, ch, cb_fn) if cb_fn else np.full((ch, cw), 128, np.uint8)
        cr = _plane(cw, ch, cr_fn) if cr_fn else np.full((ch, cw), 128, np.uint8)
        images.append((name, PlanarImage(width, height, "420", (y, cb, cr))))

    add("gradient", lambda x, y: x * 200 / width + y * 55 / height + 10,
        lambda x, y: 100 + x * 56 / x.max(), lambda x, y: 160 - y * 48 / y.max())
    add("radial", lambda x, y: 255 * np.exp(-(((x - width / 2) ** 2 + (y - height / 2) ** 2) / (width * height / 8))))
    add("vstep", lambda x, y: 60 + 140 * (x > width / 2), lambda x, y: 110 + 40 * (x > width / 2))
    add("diag_edge", lambda x, y: 50 + 160 * (x + y * 1.5 > width), lambda x, y: 128 + 24 * (x > y))
    add("bars", lambda x, y: 128 + 110 * np.sign(np.sin(x / 6.0)))
    add("sinus", lambda x, y: 128 + 70 * np.sin(x / 11.0) * np.cos(y / 13.0))
    add("box", lambda x, y: 40 + 180 * ((np.abs(x - width / 2) < width / 5) & (np.abs(y - height / 2) < height / 5)))
    add("texture", lambda x, y: 128 + _smooth_noise(rng, width, height, 46.0, cell=3))
    add("mixed_edge_tex",
        lambda x, y: 90 + 110 * (x > width / 2) + _smooth_noise(rng, width, height, 18.0))
    add("ramp_plus_edge",
        lambda x, y: x * 160 / width + 80 * (y > height / 2) + 10,
        lambda x, y: 128 + 30 * np.sin(x / 9.0))
    add("checker", lambda x, y: 128 + 90 * (((x // 8).astype(int) + (y // 8).astype(int)) % 2))
    add("soft_blobs",
        lambda x, y: 120
        + 70 * np.sin(x / 23.0 + 1.0) * np.sin(y / 17.0)
        + _smooth_noise(rng, width, height, 9.0, cell=8))
    return images


@pytest.fixture(scope="session")
def corpus():
    return make_corpus()
