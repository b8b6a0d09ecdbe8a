"""Grayscale image I/O: binary PGM (P5, 8/16-bit) and 8-bit grayscale PNG.

Both codecs are self-contained (stdlib zlib/struct only) and lossless
for 8-bit data, so save -> load roundtrips bit-exactly.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

_PNG_SIG = b"\x89PNG\r\n\x1a\n"


class ImageFormatError(ValueError):
    pass


# -- PGM --------------------------------------------------------------------


def _read_pgm_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(buf):
        if buf[pos:pos + 1].isspace():
            pos += 1
        elif buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < len(buf) and not buf[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ImageFormatError(f"malformed PGM header at byte offset {start}")
    return buf[start:pos], pos


def load_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    magic, pos = _read_pgm_token(buf, 0)
    if magic != b"P5":
        raise ImageFormatError(f"not a binary PGM (magic {magic!r}) at byte offset 0")
    fields = []
    for _ in range(3):
        tok, pos = _read_pgm_token(buf, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise ImageFormatError(f"non-numeric PGM header field at byte offset {pos - len(tok)}")
    w, h, maxval = fields
    if w <= 0 or h <= 0 or not (0 < maxval < 65536):
        raise ImageFormatError(f"invalid PGM dimensions/maxval at byte offset {pos}")
    pos += 1  # single whitespace after maxval
    bytes_per = 1 if maxval < 256 else 2
    expected = w * h * bytes_per
    payload = buf[pos:pos + expected]
    if len(payload) != expected:
        raise ImageFormatError(
            f"truncated PGM payload: expected {expected} bytes, got {len(payload)}")
    dtype = np.uint8 if bytes_per == 1 else ">u2"
    return np.frombuffer(payload, dtype=dtype).reshape(h, w).astype(np.float32) / maxval


def save_pgm(img: np.ndarray, path, maxval: int = 255):
    arr = np.asarray(img, dtype=np.float64)
    quant = np.clip(np.rint(arr * maxval), 0, maxval)
    h, w = quant.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode()
    payload = quant.astype(np.uint8 if maxval < 256 else ">u2").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + payload)


# -- PNG (8-bit grayscale) --------------------------------------------------


def _png_chunk(tag: bytes, body: bytes) -> bytes:
    return (struct.pack(">I", len(body)) + tag + body
            + struct.pack(">I", zlib.crc32(tag + body)))


def save_png(img: np.ndarray, path):
    """Write a [0,1] float (or uint8) 2-D array as 8-bit grayscale PNG."""
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)
    h, w = arr.shape
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0)
    raw = b"".join(b"\x00" + arr[y].tobytes() for y in range(h))
    data = (_PNG_SIG + _png_chunk(b"IHDR", ihdr)
            + _png_chunk(b"IDAT", zlib.compress(raw, 9)) + _png_chunk(b"IEND", b""))
    with open(path, "wb") as fh:
        fh.write(data)


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    return b if pb <= pc else c


def load_png(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] != _PNG_SIG:
        raise ImageFormatError("not a PNG file (bad signature) at byte offset 0")
    pos = 8
    w = h = None
    idat = b""
    ended = False
    while pos + 8 <= len(buf):
        (length,) = struct.unpack(">I", buf[pos:pos + 4])
        tag = buf[pos + 4:pos + 8]
        body = buf[pos + 8:pos + 8 + length]
        if len(body) != length:
            raise ImageFormatError(
                f"truncated PNG chunk {tag!r}: expected {length} bytes, got {len(body)}")
        if tag == b"IHDR":
            w, h, depth, ctype, comp, filt, inter = struct.unpack(">IIBBBBB", body)
            if depth != 8 or ctype != 0 or inter != 0:
                raise ImageFormatError(
                    "only 8-bit non-interlaced grayscale PNG is supported")
        elif tag == b"IDAT":
            idat += body
        elif tag == b"IEND":
            ended = True
            break
        pos += 12 + length
    if w is None:
        raise ImageFormatError("PNG missing IHDR chunk")
    if not ended:
        raise ImageFormatError("truncated PNG: missing IEND chunk")
    raw = zlib.decompress(idat)
    expected = h * (w + 1)
    if len(raw) != expected:
        raise ImageFormatError(
            f"truncated PNG image data: expected {expected} bytes, got {len(raw)}")
    out = np.zeros((h, w), dtype=np.uint8)
    prev = np.zeros(w, dtype=np.uint8)
    for y in range(h):
        row = raw[y * (w + 1):(y + 1) * (w + 1)]
        ftype = row[0]
        line = np.frombuffer(row[1:], dtype=np.uint8).astype(np.int64)
        pv = prev.astype(np.int64)
        if ftype == 0:
            cur = line
        elif ftype == 1:
            cur = line
            for x in range(1, w):
                cur[x] = (cur[x] + cur[x - 1]) & 0xFF
        elif ftype == 2:
            cur = (line + pv) & 0xFF
        elif ftype == 3:
            cur = line
            cur[0] = (cur[0] + pv[0] // 2) & 0xFF
            for x in range(1, w):
                cur[x] = (cur[x] + (cur[x - 1] + pv[x]) // 2) & 0xFF
        elif ftype == 4:
            cur = line
            cur[0] = (cur[0] + _paeth(0, int(pv[0]), 0)) & 0xFF
            for x in range(1, w):
                cur[x] = (cur[x] + _paeth(int(cur[x - 1]), int(pv[x]),
                                          int(pv[x - 1]))) & 0xFF
        else:
            raise ImageFormatError(f"unknown PNG filter type {ftype} on row {y}")
        out[y] = cur.astype(np.uint8)
        prev = out[y]
    return out.astype(np.float32) / 255.0


# -- dispatch ---------------------------------------------------------------


def load_image(path) -> np.ndarray:
    """Load a grayscale image as a [0,1] float32 array (H, W)."""
    p = str(path)
    if p.lower().endswith(".pgm"):
        return load_pgm(p)
    if p.lower().endswith(".png"):
        return load_png(p)
    raise ImageFormatError(f"unsupported image extension: {p}")


def save_image(img: np.ndarray, path):
    p = str(path)
    if p.lower().endswith(".pgm"):
        save_pgm(img, p)
    elif p.lower().endswith(".png"):
        save_png(img, p)
    else:
        raise ImageFormatError(f"unsupported image extension: {p}")


def save_heatmap(prob_map: np.ndarray, path):
    """Quantize a [0,1] probability map to 256 gray levels and save it."""
    arr = np.clip(np.asarray(prob_map, dtype=np.float64), 0.0, 1.0)
    save_image(arr, path)
