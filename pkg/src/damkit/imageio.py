"""On-disk formats for fixtures: P6 PPM images and RLE-encoded masks.

Masks are stored as JSON ``{"width", "height", "counts"}`` where counts is an
uncompressed run-length encoding in COCO style: column-major scan order,
alternating runs of zeros and ones, always starting with the zero run.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geometry import Image, RegionMask


def save_mask_rle(mask: RegionMask, path) -> None:
    flat = mask.data.flatten(order="F")
    counts: list[int] = []
    run_val = False
    run_len = 0
    for v in flat:
        if v == run_val:
            run_len += 1
        else:
            counts.append(run_len)
            run_val = bool(v)
            run_len = 1
    counts.append(run_len)
    payload = {"width": mask.width, "height": mask.height, "counts": counts}
    Path(path).write_text(json.dumps(payload))


def load_mask_rle(path) -> RegionMask:
    payload = json.loads(Path(path).read_text())
    w, h = int(payload["width"]), int(payload["height"])
    counts = payload["counts"]
    if sum(counts) != w * h:
        raise ValueError(f"RLE counts sum {sum(counts)} != {w}x{h} in {path}")
    flat = np.zeros(w * h, dtype=bool)
    ofs = 0
    val = False
    for c in counts:
        if val:
            flat[ofs:ofs + c] = True
        ofs += c
        val = not val
    return RegionMask(flat.reshape((h, w), order="F"))


def save_ppm(image: Image, path) -> None:
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    body = np.round(image.data * 255.0).astype(np.uint8).tobytes()
    Path(path).write_bytes(header + body)


def load_ppm(path) -> Image:
    raw = Path(path).read_bytes()
    fields: list[bytes] = []
    ofs = 0
    # Header is 4 whitespace-separated fields: magic, width, height, maxval.
    while len(fields) < 4:
        while ofs < len(raw) and raw[ofs:ofs + 1].isspace():
            ofs += 1
        if raw[ofs:ofs + 1] == b"#":
            while ofs < len(raw) and raw[ofs] != 0x0A:
                ofs += 1
            continue
        start = ofs
        while ofs < len(raw) and not raw[ofs:ofs + 1].isspace():
            ofs += 1
        fields.append(raw[start:ofs])
    ofs += 1  # single whitespace byte after maxval
    if fields[0] != b"P6":
        raise ValueError(f"not a P6 PPM: {path}")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ValueError(f"only maxval 255 supported, got {maxval} in {path}")
    data = np.frombuffer(raw[ofs:ofs + w * h * 3], dtype=np.uint8)
    if data.size != w * h * 3:
        raise ValueError(f"truncated PPM payload in {path}")
    return Image(data.reshape((h, w, 3)).astype(np.float64) / 255.0)
