"""Planar image container plus y4m (YUV4MPEG2) and PNG exchange.

Images are 8-bit Y/Cb/Cr planes at 4:2:0 or 4:4:4.  PNG input is converted
with the full-range BT.601 matrix and, for 4:2:0, a 2x2 box filter; chroma
siting is treated as centred (C420jpeg-style) throughout.  Only the first
y4m frame is read: this is a still-picture codec.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError, UnsupportedFormatError

SUBSAMPLINGS = ("420", "444")

# y4m colourspace tags accepted as 8-bit 4:2:0 with centred siting assumed
_C420_TAGS = ("420jpeg", "420mpeg2", "420paldv", "420")


def chroma_dims(width: int, height: int, subsampling: str) -> tuple[int, int]:
    if subsampling == "420":
        return (width + 1) // 2, (height + 1) // 2
    if subsampling == "444":
        return width, height
    raise ValueError(f"unknown subsampling {subsampling!r}")


@dataclass
class PlanarImage:
    """8-bit planar Y/Cb/Cr image; the unit of codec input and output."""

    width: int
    height: int
    subsampling: str
    planes: tuple[np.ndarray, np.ndarray, np.ndarray]
    bit_depth: int = 8

    def __post_init__(self):
        if self.bit_depth != 8:
            raise ValueError("only 8-bit images are supported")
        if self.subsampling not in SUBSAMPLINGS:
            raise ValueError(f"unknown subsampling {self.subsampling!r}")
        y, cb, cr = self.planes
        cw, ch = chroma_dims(self.width, self.height, self.subsampling)
        if y.shape != (self.height, self.width):
            raise ValueError(f"luma plane shape {y.shape} does not match geometry")
        for name, plane in (("cb", cb), ("cr", cr)):
            if plane.shape != (ch, cw):
                raise ValueError(f"{name} plane shape {plane.shape} does not match geometry")
        for plane in self.planes:
            if plane.dtype != np.uint8:
                raise ValueError("planes must be uint8")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PlanarImage)
            and self.width == other.width
            and self.height == other.height
            and self.subsampling == other.subsampling
            and all(np.array_equal(a, b) for a, b in zip(self.planes, other.planes))
        )

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    @classmethod
    def blank(cls, width: int, height: int, subsampling: str = "420", value: int = 128):
        cw, ch = chroma_dims(width, height, subsampling)
        return cls(
            width,
            height,
            subsampling,
            (
                np.full((height, width), value, dtype=np.uint8),
                np.full((ch, cw), 128, dtype=np.uint8),
                np.full((ch, cw), 128, dtype=np.uint8),
            ),
        )


# -- y4m ---------------------------------------------------------------------


def _parse_y4m_header(line: bytes) -> tuple[int, int, str]:
    try:
        fields = line.decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise ParseError(f"y4m header is not ASCII: {exc}") from None
    if not fields or fields[0] != "YUV4MPEG2":
        raise ParseError("y4m magic: expected 'YUV4MPEG2'")
    width = height = None
    subsampling = "420"  # y4m default colourspace is C420
    for field in fields[1:]:
        key, val = field[0], field[1:]
        if key == "W":
            if not val.isdigit() or int(val) <= 0:
                raise ParseError(f"y4m width: invalid value {val!r}")
            width = int(val)
        elif key == "H":
            if not val.isdigit() or int(val) <= 0:
                raise ParseError(f"y4m height: invalid value {val!r}")
            height = int(val)
        elif key == "C":
            if val in _C420_TAGS:
                subsampling = "420"
            elif val == "444":
                subsampling = "444"
            else:
                raise UnsupportedFormatError(f"y4m colourspace C{val} not supported")
        elif key in ("F", "I", "A", "X"):
            continue
        else:
            raise ParseError(f"y4m header: unknown field {field!r}")
    if width is None:
        raise ParseError("y4m width: missing W field")
    if height is None:
        raise ParseError("y4m height: missing H field")
    return width, height, subsampling


def read_y4m(path) -> PlanarImage:
    """Read the first frame of a y4m file as a :class:`PlanarImage`."""
    with open(path, "rb") as fh:
        header = fh.readline(4096)
        if not header:
            raise ParseError("y4m header: file is empty")
        if not header.endswith(b"\n"):
            raise ParseError("y4m header: missing newline")
        width, height, subsampling = _parse_y4m_header(header.rstrip(b"\n"))
        frame_line = fh.readline(4096)
        if not frame_line.startswith(b"FRAME"):
            raise ParseError("y4m frame marker: expected 'FRAME'")
        cw, ch = chroma_dims(width, height, subsampling)
        need = width * height + 2 * cw * ch
        data = fh.read(need)
        if len(data) != need:
            raise ParseError(
                f"y4m payload: expected {need} bytes, found {len(data)}"
            )
    buf = np.frombuffer(data, dtype=np.uint8)
    y = buf[: width * height].reshape(height, width)
    cb = buf[width * height : width * height + cw * ch].reshape(ch, cw)
    cr = buf[width * height + cw * ch :].reshape(ch, cw)
    return PlanarImage(width, height, subsampling, (y.copy(), cb.copy(), cr.copy()))


def write_y4m(img: PlanarImage, path) -> None:
    """Write a single-frame y4m; inverse of :func:`read_y4m`."""
    tag = "420jpeg" if img.subsampling == "420" else "444"
    header = f"YUV4MPEG2 W{img.width} H{img.height} F25:1 Ip A1:1 C{tag}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(b"FRAME\n")
        for plane in img.planes:
            fh.write(plane.tobytes())


# -- PNG via BT.601 full range -----------------------------------------------

_KR, _KG, _KB = 0.299, 0.587, 0.114


def rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    """Full-range BT.601 RGB -> YCbCr, float in, float out (no rounding)."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = _KR * r + _KG * g + _KB * b
    cb = 128.0 + (b - y) * (0.5 / (1.0 - _KB))
    cr = 128.0 + (r - y) * (0.5 / (1.0 - _KR))
    return np.stack([y, cb, cr], axis=-1)


def ycbcr_to_rgb(ycc: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_ycbcr`, float in, float out."""
    y, cb, cr = ycc[..., 0], ycc[..., 1], ycc[..., 2]
    r = y + (cr - 128.0) * (2.0 - 2.0 * _KR)
    b = y + (cb - 128.0) * (2.0 - 2.0 * _KB)
    g = (y - _KR * r - _KB * b) / _KG
    return np.stack([r, g, b], axis=-1)


def _quantize(plane: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(plane + 0.5), 0, 255).astype(np.uint8)


def read_png(path, subsampling: str = "420") -> PlanarImage:
    """Read an 8-bit PNG, converting to YCbCr planes.

    4:2:0 chroma comes from a 2x2 box average of the full-resolution chroma.
    """
    from PIL import Image

    with Image.open(path) as im:
        if im.mode == "P":
            raise UnsupportedFormatError("paletted PNG not supported")
        if im.mode in ("I", "I;16", "I;16B", "F", "RGBA", "LA"):
            raise UnsupportedFormatError(f"PNG mode {im.mode} not supported")
        if im.mode == "L":
            im = im.convert("RGB")
        if im.mode != "RGB":
            raise UnsupportedFormatError(f"PNG mode {im.mode} not supported")
        rgb = np.asarray(im, dtype=np.float64)
    ycc = rgb_to_ycbcr(rgb)
    height, width = ycc.shape[:2]
    y = _quantize(ycc[..., 0])
    cb_full = ycc[..., 1]
    cr_full = ycc[..., 2]
    if subsampling == "444":
        cb, cr = _quantize(cb_full), _quantize(cr_full)
    else:
        cb = _quantize(_box_down2(cb_full))
        cr = _quantize(_box_down2(cr_full))
    return PlanarImage(width, height, subsampling, (y, cb, cr))


def write_png(img: PlanarImage, path) -> None:
    """Write a :class:`PlanarImage` as an 8-bit RGB PNG."""
    from PIL import Image

    y = img.planes[0].astype(np.float64)
    if img.subsampling == "444":
        cb = img.planes[1].astype(np.float64)
        cr = img.planes[2].astype(np.float64)
    else:
        cb = _box_up2(img.planes[1].astype(np.float64), img.width, img.height)
        cr = _box_up2(img.planes[2].astype(np.float64), img.width, img.height)
    rgb = ycbcr_to_rgb(np.stack([y, cb, cr], axis=-1))
    Image.fromarray(np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8), "RGB").save(path)


def _box_down2(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    if h % 2 or w % 2:
        plane = np.pad(plane, ((0, h % 2), (0, w % 2)), mode="edge")
        h, w = plane.shape
    return (plane[0::2, 0::2] + plane[0::2, 1::2] + plane[1::2, 0::2] + plane[1::2, 1::2]) / 4.0


def _box_up2(plane: np.ndarray, width: int, height: int) -> np.ndarray:
    return np.repeat(np.repeat(plane, 2, axis=0), 2, axis=1)[:height, :width]
