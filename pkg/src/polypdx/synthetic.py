"""Synthetic slides painted in solid-color blocks.

Block rasters synthesize pixels on demand, so arbitrarily large slides
cost only their block map in memory. Painting whole windows with the
reference palette makes the expected per-window label, and therefore the
expected slide diagnosis, known by construction; the random generator
records that intent alongside the raster.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .labels import LABEL_COLORS, Diagnosis, PolypLabel
from .wsi import DEFAULT_MICRONS_PER_PIXEL, DEFAULT_SIDE_PX, SlideRaster

# Pale gray reads as tissue (min channel below the 230 whiteness cut) but
# sits nearest the white NORM reference color, so it exercises the
# NORM-classified-then-excluded path without being filtered as background.
NORM_TISSUE_COLOR = (225, 225, 225)
BACKGROUND_COLOR = LABEL_COLORS[PolypLabel.NORM]

BLOCK_PALETTE: dict[str, tuple[int, int, int]] = {
    "TA": LABEL_COLORS[PolypLabel.TA],
    "TVA": LABEL_COLORS[PolypLabel.TVA],
    "HP": LABEL_COLORS[PolypLabel.HP],
    "SSA": LABEL_COLORS[PolypLabel.SSA],
    "NORM": NORM_TISSUE_COLOR,
    "BACKGROUND": BACKGROUND_COLOR,
}


class BlockRaster(SlideRaster):
    """Slide whose pixels are a block map expanded ``block_px`` times."""

    def __init__(self, slide_id: str, block_colors: np.ndarray, block_px: int = DEFAULT_SIDE_PX,
                 microns_per_pixel: float = DEFAULT_MICRONS_PER_PIXEL) -> None:
        block_colors = np.ascontiguousarray(block_colors, dtype=np.uint8)
        if block_colors.ndim != 3 or block_colors.shape[2] != 3:
            raise ValueError(f"block map must be (rows, cols, 3), got {block_colors.shape}")
        if block_px < 1:
            raise ValueError(f"block_px must be positive, got {block_px}")
        rows, cols = block_colors.shape[:2]
        super().__init__(slide_id, cols * block_px, rows * block_px, microns_per_pixel)
        self._blocks = block_colors
        self._blocks.flags.writeable = False
        self.block_px = block_px

    def read_region(self, x: int, y: int, width: int, height: int) -> np.ndarray:
        self._check_region(x, y, width, height)
        b = self.block_px
        row0, row1 = y // b, (y + height - 1) // b
        col0, col1 = x // b, (x + width - 1) // b
        sub = self._blocks[row0:row1 + 1, col0:col1 + 1]
        expanded = np.repeat(np.repeat(sub, b, axis=0), b, axis=1)
        oy, ox = y - row0 * b, x - col0 * b
        return expanded[oy:oy + height, ox:ox + width]


@dataclass(frozen=True)
class SyntheticSlide:
    """A generated slide plus the ground truth it was painted to encode."""

    raster: BlockRaster
    diagnosis: Diagnosis
    block_labels: np.ndarray  # (rows, cols) of BLOCK_PALETTE keys


def _compose_blocks(rng: np.random.Generator, rows: int, cols: int,
                    tissue_counts: dict[str, int]) -> np.ndarray:
    """Scatter the requested tissue blocks over a background grid."""
    total = rows * cols
    labels = np.array(["BACKGROUND"] * total, dtype=object)
    cells = rng.permutation(total)
    pos = 0
    for name, count in tissue_counts.items():
        labels[cells[pos:pos + count]] = name
        pos += count
    return labels.reshape(rows, cols)


def random_slide(rng: np.random.Generator, slide_id: str,
                 block_px: int = DEFAULT_SIDE_PX,
                 microns_per_pixel: float = DEFAULT_MICRONS_PER_PIXEL) -> SyntheticSlide:
    """Generate a slide with a randomly chosen, margin-safe diagnosis.

    Block counts are drawn so every decision fraction sits well away from
    the 30% villous and 1.5% sessile-serrated thresholds, making the
    intended diagnosis unambiguous for any correct implementation.
    """
    diagnosis = Diagnosis(str(rng.choice([d.value for d in Diagnosis])))
    polyp_total = int(rng.integers(8, 25))

    if diagnosis in (Diagnosis.TA, Diagnosis.TVA):
        # Adenomatous majority; minority serrated blocks are allowed but
        # kept strictly below the adenomatous count.
        minority = int(rng.integers(0, max(1, polyp_total // 3)))
        adeno = polyp_total - minority
        if diagnosis is Diagnosis.TVA:
            tva = int(rng.integers(int(np.ceil(0.45 * polyp_total)), adeno + 1))
        else:
            tva = int(rng.integers(0, int(0.15 * polyp_total) + 1))
        counts = {
            "TA": adeno - tva,
            "TVA": tva,
            "HP": minority,
            "SSA": 0,
        }
    else:
        minority = int(rng.integers(0, max(1, polyp_total // 3)))
        serrated = polyp_total - minority
        if diagnosis is Diagnosis.SSA:
            ssa = int(rng.integers(int(np.ceil(0.10 * polyp_total)), serrated + 1))
        else:
            ssa = 0
        counts = {
            "TA": minority,
            "TVA": 0,
            "HP": serrated - ssa,
            "SSA": ssa,
        }

    counts["NORM"] = int(rng.integers(0, 5))
    tissue_blocks = sum(counts.values())
    # Leave room for background so the tissue filter has work to do.
    total_blocks = tissue_blocks + int(rng.integers(2, 12))
    cols = int(rng.integers(3, 8))
    rows = (total_blocks + cols - 1) // cols

    block_labels = _compose_blocks(rng, rows, cols, counts)
    block_colors = np.empty((rows, cols, 3), dtype=np.uint8)
    for name, color in BLOCK_PALETTE.items():
        block_colors[block_labels == name] = color

    raster = BlockRaster(slide_id, block_colors, block_px=block_px,
                         microns_per_pixel=microns_per_pixel)
    return SyntheticSlide(raster, diagnosis, block_labels)


def write_png(raster: SlideRaster, path: str | Path) -> Path:
    """Write a full raster to a PNG file (small slides only)."""
    path = Path(path)
    pixels = raster.read_region(0, 0, raster.width_px, raster.height_px)
    Image.fromarray(pixels, mode="RGB").save(path, format="PNG")
    return path
