"""Artifact readers and writers: binary PGM images, CSV tables, JSON.

All writers are deterministic: fixed float formatting, sorted JSON
keys, no timestamps. PGM headers carry the metadata needed to invert
the integer quantization (origin, cell size, z range).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FLOAT_FMT = "{:.6f}"


def fmt(value: float) -> str:
    return FLOAT_FMT.format(float(value))


def write_pgm(path, data: np.ndarray, maxval: int, comments: list[str] | None = None) -> None:
    """Write a binary (P5) PGM; 16-bit data is stored big-endian."""
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError("PGM data must be 2-D")
    header = ["P5"]
    for c in comments or []:
        header.append(f"# {c}")
    header.append(f"{data.shape[1]} {data.shape[0]}")
    header.append(str(maxval))
    raw = data.astype(">u2" if maxval > 255 else "u1").tobytes()
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(raw)


def read_pgm(path) -> tuple[np.ndarray, list[str]]:
    """Read a binary (P5) PGM, returning the image and header comments."""
    with open(path, "rb") as f:
        blob = f.read()
    if not blob.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    comments: list[str] = []
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            end = blob.index(b"\n", pos)
            comments.append(blob[pos + 1 : end].decode("ascii").strip())
            pos = end + 1
            continue
        end = pos
        while end < len(blob) and not blob[end : end + 1].isspace():
            end += 1
        tokens.append(blob[pos:end])
        pos = end
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = (int(t) for t in tokens)
    dtype = ">u2" if maxval > 255 else "u1"
    count = width * height
    img = np.frombuffer(blob, dtype=dtype, count=count, offset=pos).reshape(height, width)
    return img.astype(np.uint16 if maxval > 255 else np.uint8), comments


def _quantize(values: np.ndarray, lo: float, hi: float, maxval: int) -> np.ndarray:
    span = hi - lo
    if span <= 0:
        return np.zeros(values.shape, dtype=np.uint32)
    q = np.rint((values - lo) / span * maxval)
    return np.clip(q, 0, maxval).astype(np.uint32)


def write_heightfield_pgm(path, hf) -> None:
    lo = float(hf.heights.min())
    hi = float(hf.heights.max())
    comments = [
        f"origin_mm {fmt(hf.origin[0])} {fmt(hf.origin[1])}",
        f"cell_size_mm {fmt(hf.cell_size)}",
        f"nominal_surface_mm {fmt(hf.nominal_surface)}",
        f"z_range_mm {fmt(lo)} {fmt(hi)}",
    ]
    write_pgm(path, _quantize(hf.heights, lo, hi, 65535), 65535, comments)


def write_heightfield_csv(path, hf) -> None:
    xs = hf.x_of(np.arange(hf.nx))
    with open(path, "w", newline="\n") as f:
        f.write("x_mm,y_mm,z_mm\n")
        for iy in range(hf.ny):
            y = hf.y_of(iy)
            row = hf.heights[iy]
            for ix in range(hf.nx):
                f.write(f"{fmt(xs[ix])},{fmt(y)},{fmt(row[ix])}\n")


def write_depth_pgm(path, depth_image) -> None:
    d = depth_image.depth_mm
    valid = depth_image.valid
    lo = float(d[valid].min()) if valid.any() else 0.0
    hi = float(d[valid].max()) if valid.any() else 0.0
    comments = [f"depth_range_mm {fmt(lo)} {fmt(hi)}", "invalid_value 0"]
    q = np.zeros(d.shape, dtype=np.uint32)
    if valid.any():
        # reserve 0 for invalid pixels, map valid depths to 1..65535
        q[valid] = _quantize(d[valid], lo, hi, 65534) + 1
    write_pgm(path, q, 65535, comments)


def write_mask_pgm(path, flags: np.ndarray) -> None:
    write_pgm(path, np.where(flags, 255, 0).astype(np.uint8), 255)


def write_profile_csv(path, profile) -> None:
    with open(path, "w", newline="\n") as f:
        f.write("x_mm,z_mm\n")
        for x, z in zip(profile.x, profile.z):
            f.write(f"{fmt(x)},{fmt(z)}\n")


def write_json(path, obj: dict) -> None:
    with open(path, "w", newline="\n") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path) -> dict:
    with open(path) as f:
        return json.load(f)


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
