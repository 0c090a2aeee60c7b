"""The 19-class urban label set, its category grouping and colour palette."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from .errors import FormatError

NUM_CLASSES = 19
IGNORE_LABEL = 255
ROAD = 0
SKY = 10

# class id -> category id: flat, construction, object, nature, sky, human, vehicle
CATEGORY_MAP = np.array([0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 4, 5, 5, 6, 6, 6, 6, 6, 6])
CATEGORY_NAMES = ("flat", "construction", "object", "nature", "sky", "human", "vehicle")


def parse_palette(text: str, source: str = "<palette>") -> dict[int, tuple[tuple[int, int, int], str]]:
    """Parse ``class_id r g b name`` lines; ``#`` starts a comment."""
    palette = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 4:
            raise FormatError(f"{source}:{lineno}: expected 'class_id r g b [name]', got {raw!r}")
        try:
            cid, r, g, b = (int(x) for x in parts[:4])
        except ValueError as exc:
            raise FormatError(f"{source}:{lineno}: non-integer field in {raw!r}") from exc
        if not all(0 <= c <= 255 for c in (r, g, b)):
            raise FormatError(f"{source}:{lineno}: colour components must lie in [0, 255]")
        palette[cid] = ((r, g, b), " ".join(parts[4:]) or str(cid))
    return palette


def load_palette(path: str | Path | None = None) -> dict[int, tuple[tuple[int, int, int], str]]:
    """Load a palette file, or the bundled 19-class one when ``path`` is None."""
    if path is None:
        text = resources.files("polymap").joinpath("data/cityscapes_palette.txt").read_text()
        return parse_palette(text, "cityscapes_palette.txt")
    return parse_palette(Path(path).read_text(), str(path))


def palette_colors(palette) -> dict[int, tuple[int, int, int]]:
    return {cid: rgb for cid, (rgb, _) in palette.items()}
