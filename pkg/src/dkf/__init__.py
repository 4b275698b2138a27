"""dkf: a self-contained still-image codec and rate-distortion evaluation harness.

The codec combines lapped block transforms, recursive Haar DC coding,
frequency-domain intra prediction, chroma-from-luma prediction, gain-shape
(pyramid) vector quantization of coefficient bands, a multi-symbol adaptive
range coder, and a directional conditional-replacement deringing post-filter.
Bitstreams use the ``.dkf`` container documented in FORMAT.md.
"""

from .codec import EncoderConfig, decode_keyframe, encode_keyframe
from .image import PlanarImage, read_png, read_y4m, write_png, write_y4m

__version__ = "0.1.0"

__all__ = [
    "EncoderConfig",
    "PlanarImage",
    "decode_keyframe",
    "encode_keyframe",
    "read_png",
    "read_y4m",
    "write_png",
    "write_y4m",
]
