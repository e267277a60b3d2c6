"""Reading and writing frames: binary PGM (P5) and PNG via Pillow."""

import os

import numpy as np

from .errors import DataError


def read_image(path):
    """Load a frame as float64: grayscale ``(h, w)`` or RGB ``(h, w, 3)``."""
    ext = os.path.splitext(path)[1].lower()
    try:
        if ext == ".pgm":
            return _read_pgm(path)
        from PIL import Image

        with Image.open(path) as im:
            if im.mode in ("RGB", "RGBA"):
                arr = np.asarray(im.convert("RGB"), dtype=float)
            else:
                arr = np.asarray(im.convert("L"), dtype=float)
        return arr
    except DataError:
        raise
    except FileNotFoundError:
        raise DataError(f"cannot read {path}: file not found")
    except Exception as exc:  # Pillow raises a zoo of types for bad files
        raise DataError(f"cannot read {path}: {exc}")


def write_image(path, arr, data_range=255.0):
    """Quantize to 8 bits (clip + round) and write by extension."""
    arr = np.asarray(arr, dtype=float)
    q = np.rint(np.clip(arr, 0.0, data_range) * (255.0 / data_range))
    q = q.astype(np.uint8)
    ext = os.path.splitext(path)[1].lower()
    if ext == ".pgm":
        if q.ndim != 2:
            raise DataError(f"PGM holds grayscale only, got shape {arr.shape}")
        _write_pgm(path, q)
        return
    from PIL import Image

    if q.ndim == 2:
        Image.fromarray(q, mode="L").save(path)
    elif q.ndim == 3 and q.shape[2] == 3:
        Image.fromarray(q, mode="RGB").save(path)
    else:
        raise DataError(f"cannot write array of shape {arr.shape}")


def _read_pgm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    # header: magic, width, height, maxval — whitespace/comment separated
    tokens = []
    i = 0
    while len(tokens) < 4:
        if i >= len(data):
            raise DataError(f"cannot read {path}: truncated PGM header")
        c = data[i:i + 1]
        if c == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    if tokens[0] != b"P5":
        raise DataError(f"cannot read {path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise DataError(f"cannot read {path}: malformed PGM header")
    if maxval <= 0 or maxval > 255:
        raise DataError(f"cannot read {path}: unsupported maxval {maxval}")
    i += 1  # single whitespace byte after maxval
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=i)
    if pixels.size != w * h:
        raise DataError(f"cannot read {path}: truncated PGM payload")
    return pixels.reshape(h, w).astype(float)


def _write_pgm(path, q):
    h, w = q.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(q.tobytes())
