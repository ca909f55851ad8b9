"""24-bit RGB depth codec.

Depth is stored across the three 8-bit channels of an ordinary image:
the integer code 256^2*B + 256*G + R maps linearly onto [0, MAX_RANGE_M]
meters, so the full 24-bit range spans exactly the sensor's maximum range.
"""

import numpy as np

MAX_RANGE_M = 1000.0
_CODE_MAX = 256**3 - 1


def decode_depth(img):
    """Decode an H x W x 3 uint8 (R, G, B) image into metric depth.

    Returns an H x W float64 array in meters, in [0, MAX_RANGE_M].
    """
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected HxWx3 encoded depth image, got shape {img.shape}")
    if not np.issubdtype(img.dtype, np.integer):
        raise ValueError(f"encoded depth must be integer-typed, got {img.dtype}")
    if img.min() < 0 or img.max() > 255:
        raise ValueError("encoded depth channels must lie in [0, 255]")
    r = img[..., 0].astype(np.int64)
    g = img[..., 1].astype(np.int64)
    b = img[..., 2].astype(np.int64)
    code = 256 * 256 * b + 256 * g + r
    return code.astype(np.float64) / _CODE_MAX * MAX_RANGE_M


def encode_depth(depth):
    """Quantize metric depth (meters) to the 3-channel 8-bit encoding.

    Rounds to the nearest representable code; the quantization error of a
    decode(encode(d)) round trip is below MAX_RANGE_M / (256^3 - 1).
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.min() < 0 or depth.max() > MAX_RANGE_M:
        raise ValueError(f"depth values must lie in [0, {MAX_RANGE_M}] m")
    code = np.rint(depth / MAX_RANGE_M * _CODE_MAX).astype(np.int64)
    out = np.empty(depth.shape + (3,), dtype=np.uint8)
    out[..., 0] = code % 256
    out[..., 1] = (code // 256) % 256
    out[..., 2] = code // (256 * 256)
    return out


def save_depth_png(path, depth):
    from PIL import Image

    Image.fromarray(encode_depth(depth), mode="RGB").save(path)


def load_depth_png(path):
    from PIL import Image

    return decode_depth(np.asarray(Image.open(path).convert("RGB")))
