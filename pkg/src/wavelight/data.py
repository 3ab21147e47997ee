"""Paired-image dataset handling.

Covers three concerns: the on-disk layout for real paired data (a root
with ``input/`` and ``target/`` subdirectories holding identically named
8-bit RGB PNGs), the PNG codec boundary (decode to [0,1] floats by /255,
encode by clamp + round(v*255)), and a deterministic synthetic generator
that renders Lambertian-shaded random heightfields under configurable
light direction and color temperature, for desk-scale training and
tests.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

from .tensor import Tensor

__all__ = [
    "DataError",
    "Azimuth",
    "IlluminationSetting",
    "ImagePair",
    "DatasetSplit",
    "DEFAULT_FROM",
    "DEFAULT_TO",
    "load_png",
    "save_png",
    "to_uint8",
    "load_paired_dataset",
    "synth_relight_pair",
    "color_tint",
    "split",
    "write_split_manifest",
]


class DataError(Exception):
    """Raised for malformed datasets, files, or images."""


class Azimuth(enum.Enum):
    N = "N"
    NE = "NE"
    E = "E"
    SE = "SE"
    S = "S"
    SW = "SW"
    W = "W"
    NW = "NW"


_SQ = float(np.sqrt(0.5))
# unit horizontal direction toward the light, image y pointing down
_AZIMUTH_DIR = {
    Azimuth.N: (0.0, -1.0),
    Azimuth.NE: (_SQ, -_SQ),
    Azimuth.E: (1.0, 0.0),
    Azimuth.SE: (_SQ, _SQ),
    Azimuth.S: (0.0, 1.0),
    Azimuth.SW: (-_SQ, _SQ),
    Azimuth.W: (-1.0, 0.0),
    Azimuth.NW: (-_SQ, -_SQ),
}

_WARM = np.array([1.0, 0.6, 0.3])
_NEUTRAL = np.array([1.0, 1.0, 1.0])
_KELVIN_LO, _KELVIN_HI = 2500, 6500


@dataclass(frozen=True)
class IlluminationSetting:
    azimuth: Azimuth
    color_temp_kelvin: int

    def __post_init__(self):
        if not _KELVIN_LO <= self.color_temp_kelvin <= _KELVIN_HI:
            raise ValueError(
                f"color_temp_kelvin must be within [{_KELVIN_LO}, {_KELVIN_HI}], "
                f"got {self.color_temp_kelvin}"
            )


DEFAULT_FROM = IlluminationSetting(Azimuth.N, 6500)
DEFAULT_TO = IlluminationSetting(Azimuth.E, 4500)


@dataclass
class ImagePair:
    input_image: Tensor
    target_image: Tensor
    from_setting: IlluminationSetting
    to_setting: IlluminationSetting
    name: str

    def __post_init__(self):
        a, b = self.input_image.data, self.target_image.data
        if a.shape != b.shape:
            raise DataError(f"pair {self.name!r}: image shapes differ, {a.shape} vs {b.shape}")
        for label, arr in (("input", a), ("target", b)):
            if arr.shape[0] != 1 or arr.shape[3] != 3:
                raise DataError(f"pair {self.name!r}: {label} must be (1, H, W, 3), got {arr.shape}")
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise DataError(f"pair {self.name!r}: {label} values must lie in [0, 1]")


@dataclass
class DatasetSplit:
    train: list[ImagePair]
    val: list[ImagePair]
    test: list[ImagePair]
    seed: int
    order: tuple[int, ...]


def load_png(path) -> Tensor:
    """Decodes an 8-bit RGB PNG to a (1, H, W, 3) float32 tensor in [0, 1]."""
    path = Path(path)
    try:
        img = Image.open(path)
        img.load()
    except (UnidentifiedImageError, OSError) as e:
        raise DataError(f"{path}: not a decodable image ({e})") from e
    if img.format != "PNG":
        raise DataError(f"{path}: expected a PNG file, got {img.format}")
    if img.mode != "RGB":
        raise DataError(f"{path}: only 8-bit RGB PNGs are supported, got mode {img.mode!r}")
    arr = np.asarray(img, dtype=np.uint8)
    return Tensor((arr.astype(np.float32) / 255.0)[None])


def to_uint8(arr: np.ndarray) -> np.ndarray:
    """Clamps to [0, 1] and quantizes by round(v * 255)."""
    return np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(path, image) -> None:
    """Encodes a (1, H, W, 3) or (H, W, 3) [0, 1] image as 8-bit RGB PNG."""
    arr = image.data if isinstance(image, Tensor) else np.asarray(image)
    if arr.ndim == 4:
        if arr.shape[0] != 1:
            raise DataError(f"save_png: expected batch 1, got shape {arr.shape}")
        arr = arr[0]
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DataError(f"save_png: expected (H, W, 3) data, got shape {arr.shape}")
    Image.fromarray(to_uint8(arr), mode="RGB").save(Path(path), format="PNG")


def load_paired_dataset(
    root,
    from_setting: IlluminationSetting = DEFAULT_FROM,
    to_setting: IlluminationSetting = DEFAULT_TO,
) -> list[ImagePair]:
    """Loads name-matched pairs from ``root/input`` and ``root/target``.

    Pairs are returned sorted by filename. Any orphan on either side,
    undecodable file, or within-pair dimension mismatch raises DataError.
    """
    root = Path(root)
    in_dir, tg_dir = root / "input", root / "target"
    for d in (in_dir, tg_dir):
        if not d.is_dir():
            raise DataError(f"dataset root must contain input/ and target/; missing {d}")
    in_names = sorted(p.name for p in in_dir.glob("*.png"))
    tg_names = sorted(p.name for p in tg_dir.glob("*.png"))
    for name in in_names:
        if name not in tg_names:
            raise DataError(f"unmatched input file {name!r}: no target with the same name")
    for name in tg_names:
        if name not in in_names:
            raise DataError(f"unmatched target file {name!r}: no input with the same name")
    pairs = []
    for name in in_names:
        x = load_png(in_dir / name)
        y = load_png(tg_dir / name)
        if x.data.shape != y.data.shape:
            raise DataError(
                f"pair {name!r}: dimensions differ, {x.data.shape[1:3]} vs {y.data.shape[1:3]}"
            )
        pairs.append(ImagePair(x, y, from_setting, to_setting, Path(name).stem))
    return pairs


def color_tint(kelvin: int) -> np.ndarray:
    """Channel multipliers: warm (1.0, 0.6, 0.3) at 2500K to neutral at 6500K."""
    t = (kelvin - _KELVIN_LO) / (_KELVIN_HI - _KELVIN_LO)
    return _WARM + t * (_NEUTRAL - _WARM)


def _heightfield(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    h = np.zeros((size, size), dtype=np.float64)
    for _ in range(8):
        fx, fy = rng.uniform(0.4, 2.2, size=2)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(0.5, 1.0)
        h += amp * np.sin(2.0 * np.pi * (fx * xx + fy * yy) / size + phase)
    # normalize so slopes are O(1) regardless of the sampled frequencies
    gy, gx = np.gradient(h)
    h *= 0.55 / (np.hypot(gx, gy).mean() + 1e-12)
    return h


def _render(height: np.ndarray, setting: IlluminationSetting) -> np.ndarray:
    gy, gx = np.gradient(height)
    norm = np.sqrt(gx * gx + gy * gy + 1.0)
    dx, dy = _AZIMUTH_DIR[setting.azimuth]
    # directional light at 45 degrees elevation
    lx, ly, lz = dx * _SQ, dy * _SQ, _SQ
    shade = np.clip((-gx * lx - gy * ly + lz) / norm, 0.0, 1.0)
    img = shade[:, :, None] * color_tint(setting.color_temp_kelvin)[None, None, :]
    return np.clip(img, 0.0, 1.0).astype(np.float32)[None]


def synth_relight_pair(
    seed: int,
    size: int,
    from_setting: IlluminationSetting,
    to_setting: IlluminationSetting,
    name: str | None = None,
) -> ImagePair:
    """Deterministic synthetic relighting pair over one shared heightfield.

    The same seed, size and settings always produce bitwise-identical
    images; identical from/to settings produce identical input and
    target.
    """
    if size % 16:
        raise ValueError(f"synth_relight_pair: size must be divisible by 16, got {size}")
    rng = np.random.default_rng(seed)
    height = _heightfield(rng, size)
    return ImagePair(
        Tensor(_render(height, from_setting)),
        Tensor(_render(height, to_setting)),
        from_setting,
        to_setting,
        name if name is not None else f"synth-{seed}",
    )


def split(
    dataset: Sequence[ImagePair], fractions: tuple[float, float, float], seed: int
) -> DatasetSplit:
    """Seeded shuffle followed by a contiguous train/val/test partition."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must sum to 1, got {fractions}")
    n = len(dataset)
    order = tuple(int(i) for i in np.random.default_rng(seed).permutation(n))
    n_train = int(round(fractions[0] * n))
    n_val = min(int(round(fractions[1] * n)), n - n_train)
    shuffled = [dataset[i] for i in order]
    return DatasetSplit(
        train=shuffled[:n_train],
        val=shuffled[n_train : n_train + n_val],
        test=shuffled[n_train + n_val :],
        seed=seed,
        order=order,
    )


def write_split_manifest(ds: DatasetSplit, path) -> None:
    """UTF-8 manifest: one ``name<TAB>split`` line per pair."""
    lines = []
    for label, items in (("train", ds.train), ("val", ds.val), ("test", ds.test)):
        lines.extend(f"{p.name}\t{label}" for p in items)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
