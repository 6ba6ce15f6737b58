"""Slide rasters, sliding-window tiling, and tissue filtering.

A slide raster is any RGB pixel source with physical-resolution metadata.
Patches are fixed-size square windows laid out on a regular grid; windows
that would extend past the right or bottom edge are dropped, since the
downstream classifier requires fixed-size inputs.

Supported inputs: PNG/JPEG/single-resolution TIFF files, and a tiled
directory holding one image per pre-cut tile (``tile_{row}_{col}.png``).
Either form may carry a JSON sidecar with ``slide_id``,
``microns_per_pixel`` and an integer ``downsample`` applied at load time.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np
from PIL import Image

from .errors import ManifestError, SlideTooSmall, WindowOutOfBounds

DEFAULT_MICRONS_PER_PIXEL = 0.25
DEFAULT_SIDE_PX = 224

_RASTER_SUFFIXES = {".png", ".jpg", ".jpeg", ".tif", ".tiff"}


@dataclass(frozen=True)
class PatchWindow:
    """Top-left corner and side of one square patch, in slide pixels."""

    x: int
    y: int
    side_px: int = DEFAULT_SIDE_PX

    def __post_init__(self) -> None:
        if self.x < 0 or self.y < 0:
            raise ValueError(f"window origin must be non-negative, got ({self.x}, {self.y})")
        if self.side_px < 1:
            raise ValueError(f"window side must be positive, got {self.side_px}")


@dataclass(frozen=True)
class TilingConfig:
    """Sliding-window geometry and background-filter parameters.

    The default stride equals the side, producing non-overlapping windows.
    A pixel counts as tissue when its darkest channel is below
    ``background_whiteness``; a window counts as tissue when at least
    ``min_tissue_fraction`` of its pixels do.
    """

    side_px: int = DEFAULT_SIDE_PX
    stride_px: int = DEFAULT_SIDE_PX
    background_whiteness: int = 230
    min_tissue_fraction: float = 0.30

    def __post_init__(self) -> None:
        if self.side_px < 1:
            raise ValueError(f"side_px must be positive, got {self.side_px}")
        if self.stride_px < 1:
            raise ValueError(f"stride_px must be positive, got {self.stride_px}")
        if not 0 <= self.background_whiteness <= 255:
            raise ValueError(f"background_whiteness must be in [0, 255], got {self.background_whiteness}")
        if not 0.0 <= self.min_tissue_fraction <= 1.0:
            raise ValueError(f"min_tissue_fraction must be in [0, 1], got {self.min_tissue_fraction}")


class SlideRaster(ABC):
    """Read-only RGB pixel source with resolution metadata.

    Implementations must be safe for concurrent reads once constructed.
    """

    slide_id: str
    width_px: int
    height_px: int
    microns_per_pixel: float

    def __init__(self, slide_id: str, width_px: int, height_px: int,
                 microns_per_pixel: float = DEFAULT_MICRONS_PER_PIXEL) -> None:
        if width_px < 1 or height_px < 1:
            raise ValueError(f"slide dimensions must be positive, got {width_px}x{height_px}")
        if microns_per_pixel <= 0:
            raise ValueError(f"microns_per_pixel must be positive, got {microns_per_pixel}")
        self.slide_id = slide_id
        self.width_px = width_px
        self.height_px = height_px
        self.microns_per_pixel = microns_per_pixel

    @abstractmethod
    def read_region(self, x: int, y: int, width: int, height: int) -> np.ndarray:
        """Return the region as a (height, width, 3) uint8 array."""

    def pixel(self, x: int, y: int) -> tuple[int, int, int]:
        """Return one pixel as an (R, G, B) triple."""
        r, g, b = self.read_region(x, y, 1, 1)[0, 0]
        return int(r), int(g), int(b)

    def read_window(self, window: PatchWindow) -> np.ndarray:
        if (window.x + window.side_px > self.width_px
                or window.y + window.side_px > self.height_px):
            raise WindowOutOfBounds(
                f"window at ({window.x}, {window.y}) side {window.side_px} exceeds "
                f"{self.width_px}x{self.height_px} slide {self.slide_id!r}")
        return self.read_region(window.x, window.y, window.side_px, window.side_px)

    def _check_region(self, x: int, y: int, width: int, height: int) -> None:
        if x < 0 or y < 0 or width < 1 or height < 1:
            raise ValueError(f"bad region ({x}, {y}, {width}, {height})")
        if x + width > self.width_px or y + height > self.height_px:
            raise WindowOutOfBounds(
                f"region ({x}, {y}, {width}, {height}) exceeds "
                f"{self.width_px}x{self.height_px} slide {self.slide_id!r}")


class ArrayRaster(SlideRaster):
    """Slide backed by an in-memory (H, W, 3) uint8 array."""

    def __init__(self, slide_id: str, pixels: np.ndarray,
                 microns_per_pixel: float = DEFAULT_MICRONS_PER_PIXEL) -> None:
        pixels = np.asarray(pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) pixel array, got shape {pixels.shape}")
        if pixels.dtype != np.uint8:
            raise ValueError(f"expected uint8 pixels, got {pixels.dtype}")
        super().__init__(slide_id, pixels.shape[1], pixels.shape[0], microns_per_pixel)
        self._pixels = pixels
        self._pixels.flags.writeable = False

    def read_region(self, x: int, y: int, width: int, height: int) -> np.ndarray:
        self._check_region(x, y, width, height)
        return self._pixels[y:y + height, x:x + width]


class DownsampledRaster(SlideRaster):
    """View of another raster keeping every ``factor``-th pixel per axis."""

    def __init__(self, base: SlideRaster, factor: int) -> None:
        if factor < 1:
            raise ValueError(f"downsample factor must be >= 1, got {factor}")
        width = (base.width_px + factor - 1) // factor
        height = (base.height_px + factor - 1) // factor
        super().__init__(base.slide_id, width, height, base.microns_per_pixel * factor)
        self._base = base
        self._factor = factor

    def read_region(self, x: int, y: int, width: int, height: int) -> np.ndarray:
        self._check_region(x, y, width, height)
        f = self._factor
        src_w = (width - 1) * f + 1
        src_h = (height - 1) * f + 1
        region = self._base.read_region(x * f, y * f, src_w, src_h)
        return region[::f, ::f]


class TiledDirectoryRaster(SlideRaster):
    """Slide stored as a directory of pre-cut tiles.

    Tiles are named ``tile_{row}_{col}.png`` on a regular grid; only the
    last row/column may be smaller. Tiles are decoded on demand and cached.
    """

    def __init__(self, directory: str | Path, slide_id: str | None = None,
                 microns_per_pixel: float = DEFAULT_MICRONS_PER_PIXEL,
                 cache_tiles: int = 16) -> None:
        directory = Path(directory)
        grid: dict[tuple[int, int], Path] = {}
        for path in directory.glob("tile_*_*.png"):
            parts = path.stem.split("_")
            try:
                row, col = int(parts[1]), int(parts[2])
            except (IndexError, ValueError):
                continue
            grid[(row, col)] = path
        if not grid:
            raise ManifestError(f"no tile_{{row}}_{{col}}.png files in {directory}")
        n_rows = max(r for r, _ in grid) + 1
        n_cols = max(c for _, c in grid) + 1
        missing = [(r, c) for r in range(n_rows) for c in range(n_cols) if (r, c) not in grid]
        if missing:
            raise ManifestError(f"tile grid in {directory} has holes, e.g. tile_{missing[0][0]}_{missing[0][1]}.png")

        self._grid = grid
        self._n_rows = n_rows
        self._n_cols = n_cols
        # PIL reads only the header here, so sizing the grid stays cheap.
        self._tile_h, self._tile_w = self._tile_size(0, 0)
        last_h = self._tile_size(n_rows - 1, 0)[0]
        last_w = self._tile_size(0, n_cols - 1)[1]
        width = (n_cols - 1) * self._tile_w + last_w
        height = (n_rows - 1) * self._tile_h + last_h
        super().__init__(slide_id or directory.name, width, height, microns_per_pixel)
        self._load_tile = lru_cache(maxsize=cache_tiles)(self._decode_tile)

    def _tile_size(self, row: int, col: int) -> tuple[int, int]:
        with Image.open(self._grid[(row, col)]) as img:
            return img.height, img.width

    def _decode_tile(self, row: int, col: int) -> np.ndarray:
        with Image.open(self._grid[(row, col)]) as img:
            return np.asarray(img.convert("RGB"))

    def read_region(self, x: int, y: int, width: int, height: int) -> np.ndarray:
        self._check_region(x, y, width, height)
        out = np.empty((height, width, 3), dtype=np.uint8)
        row0, row1 = y // self._tile_h, (y + height - 1) // self._tile_h
        col0, col1 = x // self._tile_w, (x + width - 1) // self._tile_w
        for row in range(row0, row1 + 1):
            for col in range(col0, col1 + 1):
                tile = self._load_tile(row, col)
                ty, tx = row * self._tile_h, col * self._tile_w
                sy0 = max(y, ty)
                sx0 = max(x, tx)
                sy1 = min(y + height, ty + tile.shape[0])
                sx1 = min(x + width, tx + tile.shape[1])
                out[sy0 - y:sy1 - y, sx0 - x:sx1 - x] = tile[sy0 - ty:sy1 - ty, sx0 - tx:sx1 - tx]
        return out


class SlideStats(NamedTuple):
    tissue_patch_count: int
    tissue_area_px: int


def read_sidecar(path: Path) -> dict:
    """Read a JSON sidecar, returning {} when absent."""
    if not path.exists():
        return {}
    try:
        meta = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"invalid sidecar JSON {path}: {exc}") from exc
    if not isinstance(meta, dict):
        raise ManifestError(f"sidecar {path} must hold a JSON object")
    return meta


def load_slide(path: str | Path, slide_id: str | None = None,
               downsample: int | None = None) -> SlideRaster:
    """Load a slide from an image file or a tiled directory.

    The sidecar (``<stem>.json`` next to a file, ``slide.json`` inside a
    directory) supplies ``slide_id``, ``microns_per_pixel`` and
    ``downsample`` defaults; explicit arguments win.
    """
    path = Path(path)
    if path.is_dir():
        meta = read_sidecar(path / "slide.json")
    elif path.suffix.lower() in _RASTER_SUFFIXES:
        meta = read_sidecar(path.with_suffix(".json"))
    else:
        raise ManifestError(f"unsupported slide input {path} (expected PNG/JPEG/TIFF or tile directory)")

    slide_id = slide_id or meta.get("slide_id") or path.stem
    mpp = float(meta.get("microns_per_pixel", DEFAULT_MICRONS_PER_PIXEL))
    factor = int(meta.get("downsample", 1)) if downsample is None else int(downsample)

    if path.is_dir():
        slide: SlideRaster = TiledDirectoryRaster(path, slide_id=slide_id, microns_per_pixel=mpp)
    else:
        with Image.open(path) as img:
            pixels = np.asarray(img.convert("RGB"))
        slide = ArrayRaster(slide_id, pixels, microns_per_pixel=mpp)
    if factor > 1:
        slide = DownsampledRaster(slide, factor)
    return slide


def grid_shape(width_px: int, height_px: int, side_px: int, stride_px: int) -> tuple[int, int]:
    """Number of window (columns, rows) that fit fully inside the slide."""
    if width_px < side_px or height_px < side_px:
        raise SlideTooSmall(
            f"slide {width_px}x{height_px} cannot hold a {side_px}x{side_px} window")
    cols = (width_px - side_px) // stride_px + 1
    rows = (height_px - side_px) // stride_px + 1
    return cols, rows


def extract_grid(slide: SlideRaster, cfg: TilingConfig) -> list[PatchWindow]:
    """Enumerate patch windows row-major from the top-left origin.

    Windows start at multiples of the stride; partial windows at the right
    and bottom edges are dropped.
    """
    cols, rows = grid_shape(slide.width_px, slide.height_px, cfg.side_px, cfg.stride_px)
    return [
        PatchWindow(x=col * cfg.stride_px, y=row * cfg.stride_px, side_px=cfg.side_px)
        for row in range(rows)
        for col in range(cols)
    ]


def tissue_fraction(pixels: np.ndarray, cfg: TilingConfig) -> float:
    """Fraction of pixels whose darkest channel is below the whiteness cut."""
    return float((pixels.min(axis=2) < cfg.background_whiteness).mean())


def is_tissue(slide: SlideRaster, window: PatchWindow, cfg: TilingConfig) -> bool:
    """True when the window holds at least ``min_tissue_fraction`` tissue."""
    return tissue_fraction(slide.read_window(window), cfg) >= cfg.min_tissue_fraction


def iter_window_rows(slide: SlideRaster, cfg: TilingConfig,
                     row_range: range | None = None) -> Iterator[tuple[PatchWindow, np.ndarray]]:
    """Yield (window, pixels) row-major, reading one grid row per strip.

    Strip reads keep pixel access sequential, which matters for rasters
    backed by files; slicing windows out of the strip is free.
    """
    cols, rows = grid_shape(slide.width_px, slide.height_px, cfg.side_px, cfg.stride_px)
    strip_w = (cols - 1) * cfg.stride_px + cfg.side_px
    for row in row_range if row_range is not None else range(rows):
        strip = slide.read_region(0, row * cfg.stride_px, strip_w, cfg.side_px)
        for col in range(cols):
            x = col * cfg.stride_px
            window = PatchWindow(x=x, y=row * cfg.stride_px, side_px=cfg.side_px)
            yield window, strip[:, x:x + cfg.side_px]


def slide_stats(slide: SlideRaster, cfg: TilingConfig) -> SlideStats:
    """Count tissue windows and the tissue area they cover, in pixels."""
    count = sum(
        1 for _, pixels in iter_window_rows(slide, cfg)
        if tissue_fraction(pixels, cfg) >= cfg.min_tissue_fraction
    )
    return SlideStats(count, count * cfg.side_px * cfg.side_px)
