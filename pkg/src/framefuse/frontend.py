"""Clip-to-token frontend: patchify, temporal channel merge, positional tables,
neighbor-frame grouping, and the CLP1 clip file format."""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, add, linear, reshape
from .errors import (BadMagic, DoublePositioning, IndivisibleFrames,
                     IndivisibleResolution, NotPositioned, ShapeMismatch,
                     TruncatedFile)

CLIP_MAGIC = b"CLP1"


class FusionMethod(enum.Enum):
    """Where temporal fusion happens relative to the encoder."""

    BASELINE = "baseline"
    PRE_ENCODER_CHANNEL_MERGE = "channel-merge"
    POST_POOL_PLLAVA = "pllava-pool"
    POST_MLP_KANGAROO = "kangaroo-mlp"
    POST_QFORMER = "qformer"
    THROUGH_ENCODER = "through-encoder"


# the five compression methods in fixed grid/reporting order (baseline enters
# a grid only as the k=1 cell)
COMPRESSION_METHODS = (
    FusionMethod.PRE_ENCODER_CHANNEL_MERGE,
    FusionMethod.POST_POOL_PLLAVA,
    FusionMethod.POST_MLP_KANGAROO,
    FusionMethod.POST_QFORMER,
    FusionMethod.THROUGH_ENCODER,
)


@dataclass
class VideoClip:
    """pixels [F, C, H, W], float64 in [0, 1]."""

    pixels: Tensor

    def __post_init__(self):
        if self.pixels.ndim != 4:
            raise ShapeMismatch(f"clip pixels must be [F, C, H, W], got {self.pixels.shape}")

    @property
    def frames(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[2]

    @property
    def width(self) -> int:
        return self.pixels.shape[3]


@dataclass
class TokenGrid:
    """Per-frame token sequences [F, T, h]; tracks whether the spatial table
    has been added (it must be added exactly once)."""

    tokens: Tensor
    spatially_positioned: bool = False


@dataclass
class GroupedTokens:
    """Adjacent frames merged along the token axis: [G, k*T, h]. Construction
    through merge_neighbor_frames adds the temporal table exactly once."""

    tokens: Tensor
    group_size: int


def extract_patches(pixels: np.ndarray, patch: int) -> np.ndarray:
    """[..., C, H, W] -> [..., T, C*patch*patch].

    Patches scan row-major over the (H/p, W/p) grid; each patch vector is the
    channel-first flattening of its [C, p, p] block.
    """
    *lead, c, h, w = pixels.shape
    if h % patch or w % patch:
        raise IndivisibleResolution(f"{h}x{w} not divisible by patch {patch}")
    gh, gw = h // patch, w // patch
    x = pixels.reshape(*lead, c, gh, patch, gw, patch)
    nd = x.ndim
    # [..., c, gh, p, gw, p] -> [..., gh, gw, c, p, p]
    x = np.moveaxis(x, (nd - 4, nd - 2), (nd - 5, nd - 4))
    return np.ascontiguousarray(x).reshape(*lead, gh * gw, c * patch * patch)


def patchify(clip: VideoClip, patch: int, w: Tensor, b: Tensor | None = None) -> TokenGrid:
    """Non-overlapping patches projected to hidden width: [F, T, h]."""
    vecs = extract_patches(clip.pixels.data, patch)
    if w.shape[0] != vecs.shape[-1]:
        raise ShapeMismatch(f"patch projection expects {vecs.shape[-1]} inputs, got {w.shape}")
    return TokenGrid(tokens=linear(Tensor(vecs), w, b), spatially_positioned=False)


def merge_temporal_channels(clip: VideoClip, k: int) -> VideoClip:
    """Stack k consecutive frames along the channel axis: [F/k, k*C, H, W].

    Output frame i carries input frames i*k .. i*k+k-1 in temporal order, so
    channels 0..C-1 come from the first frame of the window.
    """
    f, c, h, wd = clip.pixels.shape
    if k < 1 or f % k:
        raise IndivisibleFrames(f"{f} frames not divisible by k={k}")
    return VideoClip(pixels=reshape(clip.pixels, (f // k, k * c, h, wd)))


def add_spatial_pos(grid: TokenGrid, table: Tensor) -> TokenGrid:
    """Add the learned [T, h] table to every frame. Second add is an error."""
    if grid.spatially_positioned:
        raise DoublePositioning("spatial table already added to this grid")
    f, t, h = grid.tokens.shape
    if table.shape != (t, h):
        raise ShapeMismatch(f"spatial table {table.shape} for tokens {grid.tokens.shape}")
    return TokenGrid(tokens=add(grid.tokens, table), spatially_positioned=True)


def merge_neighbor_frames(grid: TokenGrid, k: int, temporal_table: Tensor) -> GroupedTokens:
    """Group adjacent k frames along the token axis and add the absolute
    temporal table (one row per in-group frame offset).

    Token (g, j*T + p) equals input token (frame g*k + j, p) + table[j].
    """
    if not grid.spatially_positioned:
        raise NotPositioned("add the spatial table before grouping frames")
    f, t, h = grid.tokens.shape
    if k < 1 or f % k:
        raise IndivisibleFrames(f"{f} frames not divisible by k={k}")
    if temporal_table.shape != (k, h):
        raise ShapeMismatch(f"temporal table {temporal_table.shape}, expected {(k, h)}")
    x = reshape(grid.tokens, (f // k, k, t, h))
    x = add(x, reshape(temporal_table, (k, 1, h)))
    return GroupedTokens(tokens=reshape(x, (f // k, k * t, h)), group_size=k)


# ---- CLP1 clip files: magic, F/C/H/W u32 LE, then f32 LE pixels ----

def save_clip(clip: VideoClip, path) -> None:
    f, c, h, w = clip.pixels.shape
    with open(path, "wb") as fh:
        fh.write(CLIP_MAGIC)
        fh.write(struct.pack("<4I", f, c, h, w))
        fh.write(clip.pixels.data.astype("<f4").tobytes())


def load_clip(path) -> VideoClip:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CLIP_MAGIC:
        raise BadMagic(f"{path}: not a CLP1 clip")
    if len(blob) < 20:
        raise TruncatedFile(f"{path}: clip header truncated")
    f, c, h, w = struct.unpack_from("<4I", blob, 4)
    need = 20 + 4 * f * c * h * w
    if len(blob) < need:
        raise TruncatedFile(f"{path}: expected {need} bytes, found {len(blob)}")
    pixels = np.frombuffer(blob, dtype="<f4", count=f * c * h * w, offset=20)
    return VideoClip(pixels=Tensor(pixels.astype(np.float64).reshape(f, c, h, w)))
