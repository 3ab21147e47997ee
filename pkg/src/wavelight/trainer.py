"""Adam training loop, learning-rate schedule, and binary checkpoints.

The whole trajectory is a deterministic function of (seed, config,
data): parameter init, per-epoch shuffling and the optimizer itself all
run on seeded generators with a fixed accumulation order.

Checkpoint layout (all little-endian):

    magic b"WDRN" | version u32 | model config block | parameter block |
    adam block | epoch u32 | rng block

  config block : levels u32, variant u8 (0 wavelet / 1 strided),
                 input_channels u32, width_scale f64, then the encoder
                 and decoder block lists (count u32, then per block:
                 layer_count u32, filters u32, kernel u32,
                 final_filters u32 with 0 meaning unset)
  param block  : count u32, then per tensor: name length u16, UTF-8
                 name, 4 dims u32, float32 values
  adam block   : step counter u64, then per parameter (same order) the
                 first- and second-moment float32 arrays
  rng block    : flag u8; when 1, a PCG64 state (two u128 plus the
                 uint32 cache flag u8 and value u32)

Hyperparameters are also accepted from flat UTF-8 ``key = value`` files
with ``#`` comments; see load_config_file.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Mapping

import numpy as np

from . import losses, metrics, model
from . import tensor as T
from .losses import LossConfig
from .model import ConvBlockSpec, ModelConfig, ParameterSet
from .tensor import Tensor

__all__ = [
    "TrainConfig",
    "AdamState",
    "Checkpoint",
    "TrainResult",
    "TrainingError",
    "CheckpointError",
    "ConfigError",
    "adam_step",
    "lr_at",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "load_config_file",
]

_MAGIC = b"WDRN"
_VERSION = 1
LOG_COLUMNS = ("epoch", "lr", "mae", "ssim_loss", "gray", "total", "val_psnr", "val_ssim")


class TrainingError(Exception):
    """Raised when a training run cannot proceed (for example a non-finite loss)."""


class CheckpointError(Exception):
    """Raised for unreadable, corrupt, or mismatched checkpoint files."""


class ConfigError(Exception):
    """Raised for malformed or unknown keys in flat config files."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    batch_size: int = 10
    lr: float = 1e-4
    lr_decay: float = 0.5
    lr_decay_every: int = 100
    beta1: float = 0.9
    beta2: float = 0.99
    adam_eps: float = 1e-8
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    early_stop_epoch: int | None = None

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError(f"betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr_decay_every < 1:
            raise ValueError(f"lr_decay_every must be >= 1, got {self.lr_decay_every}")


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: ParameterSet) -> "AdamState":
        return cls(
            m={name: np.zeros_like(p.data) for name, p in params.items()},
            v={name: np.zeros_like(p.data) for name, p in params.items()},
        )


def adam_step(
    params: ParameterSet,
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.99,
    eps: float = 1e-8,
) -> tuple[ParameterSet, AdamState]:
    """One Adam update, in place: m and v recurrences, bias correction,
    then p -= lr * mhat / (sqrt(vhat) + eps)."""
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            raise ValueError(f"adam_step: missing gradient for parameter {name!r}")
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Step-decayed rate: lr * decay ** floor(epoch / decay_every)."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return cfg.lr * cfg.lr_decay ** (epoch // cfg.lr_decay_every)


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]
    adam: AdamState
    epoch: int
    rng_state: dict | None = None

    def to_parameter_set(self, dtype=np.float32) -> ParameterSet:
        ps = ParameterSet(self.config)
        for name, arr in self.params.items():
            ps.add(name, Tensor(arr.astype(dtype), requires_grad=True))
        return ps

    @classmethod
    def from_params(
        cls,
        params: ParameterSet,
        adam: AdamState | None = None,
        epoch: int = 0,
        rng_state: dict | None = None,
    ) -> "Checkpoint":
        adam = adam or AdamState.for_params(params)
        return cls(
            config=params.config,
            params={name: p.data.astype(np.float32) for name, p in params.items()},
            adam=AdamState(
                m={k: a.astype(np.float32) for k, a in adam.m.items()},
                v={k: a.astype(np.float32) for k, a in adam.v.items()},
                t=adam.t,
            ),
            epoch=epoch,
            rng_state=rng_state,
        )


def _pack_blocks(blocks: tuple[ConvBlockSpec, ...]) -> bytes:
    out = [struct.pack("<I", len(blocks))]
    for b in blocks:
        out.append(
            struct.pack("<IIII", b.layer_count, b.filters, b.kernel, b.final_filters or 0)
        )
    return b"".join(out)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def read(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointError(
                f"truncated checkpoint: needed {n} bytes at offset {self.pos}, "
                f"file has {len(self.blob)}"
            )
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.read(struct.calcsize(fmt)))


def _read_blocks(r: _Reader) -> tuple[ConvBlockSpec, ...]:
    (count,) = r.unpack("<I")
    blocks = []
    for _ in range(count):
        lc, f, k, ff = r.unpack("<IIII")
        blocks.append(ConvBlockSpec(lc, f, k, ff or None))
    return tuple(blocks)


def _read_array(r: _Reader, shape: tuple[int, ...]) -> np.ndarray:
    n = int(np.prod(shape))
    return np.frombuffer(r.read(4 * n), dtype="<f4").reshape(shape).copy()


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    cfg = ckpt.config
    out = [_MAGIC, struct.pack("<I", _VERSION)]
    out.append(
        struct.pack(
            "<IBId",
            cfg.levels,
            1 if cfg.domain_variant == "strided" else 0,
            cfg.input_channels,
            cfg.width_scale,
        )
    )
    out.append(_pack_blocks(cfg.encoder_blocks))
    out.append(_pack_blocks(cfg.decoder_blocks))
    out.append(struct.pack("<I", len(ckpt.params)))
    for name, arr in ckpt.params.items():
        nb = name.encode("utf-8")
        out.append(struct.pack("<H", len(nb)))
        out.append(nb)
        out.append(struct.pack("<IIII", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    out.append(struct.pack("<Q", ckpt.adam.t))
    for name in ckpt.params:
        out.append(np.ascontiguousarray(ckpt.adam.m[name], dtype="<f4").tobytes())
        out.append(np.ascontiguousarray(ckpt.adam.v[name], dtype="<f4").tobytes())
    out.append(struct.pack("<I", ckpt.epoch))
    rs = ckpt.rng_state
    if rs is None:
        out.append(b"\x00")
    else:
        st = rs["state"]
        out.append(b"\x01")
        out.append(int(st["state"]).to_bytes(16, "little"))
        out.append(int(st["inc"]).to_bytes(16, "little"))
        out.append(struct.pack("<BI", int(rs["has_uint32"]), int(rs["uinteger"])))
    Path(path).write_bytes(b"".join(out))


def load_checkpoint(path) -> Checkpoint:
    """Reads and validates a checkpoint; bad magic, truncation, version
    mismatch and parameter/shape mismatches each raise distinct errors."""
    r = _Reader(Path(path).read_bytes())
    magic = r.read(4)
    if magic != _MAGIC:
        raise CheckpointError(f"bad magic: expected {_MAGIC!r}, got {magic!r}")
    (version,) = r.unpack("<I")
    if version != _VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}, expected {_VERSION}")
    levels, variant, in_ch, width_scale = r.unpack("<IBId")
    enc = _read_blocks(r)
    dec = _read_blocks(r)
    config = ModelConfig(
        levels=levels,
        encoder_blocks=enc,
        decoder_blocks=dec,
        domain_variant="strided" if variant else "wavelet",
        width_scale=width_scale,
        input_channels=in_ch,
    )
    expected = model.parameter_shapes(config)
    (count,) = r.unpack("<I")
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.read(nlen).decode("utf-8")
        shape = r.unpack("<IIII")
        if name not in expected:
            raise CheckpointError(f"parameter {name!r} does not belong to the stored config")
        if expected[name] != shape:
            raise CheckpointError(
                f"parameter {name!r} has shape {shape} but the stored config requires {expected[name]}"
            )
        params[name] = _read_array(r, shape)
    missing = set(expected) - set(params)
    if missing:
        raise CheckpointError(f"checkpoint is missing parameters: {sorted(missing)}")
    (t,) = r.unpack("<Q")
    adam = AdamState(m={}, v={}, t=t)
    for name, arr in params.items():
        adam.m[name] = _read_array(r, arr.shape)
        adam.v[name] = _read_array(r, arr.shape)
    (epoch,) = r.unpack("<I")
    (flag,) = r.unpack("<B")
    rng_state = None
    if flag:
        state = int.from_bytes(r.read(16), "little")
        inc = int.from_bytes(r.read(16), "little")
        has32, uint = r.unpack("<BI")
        rng_state = {
            "bit_generator": "PCG64",
            "state": {"state": state, "inc": inc},
            "has_uint32": has32,
            "uinteger": uint,
        }
    return Checkpoint(config=config, params=params, adam=adam, epoch=epoch, rng_state=rng_state)


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    log: list[dict]
    best_epoch: int | None = None


def _batch(pairs, idx) -> tuple[Tensor, Tensor]:
    x = np.concatenate([pairs[i].input_image.data for i in idx])
    y = np.concatenate([pairs[i].target_image.data for i in idx])
    return Tensor(x), Tensor(y)


def _validate(params: ParameterSet, pairs, loss_cfg: LossConfig) -> tuple[float, float]:
    psnrs, ssims = [], []
    for p in pairs:
        pred = model.forward(params, p.input_image)
        psnrs.append(metrics.psnr(pred, p.target_image))
        ssims.append(metrics.ssim_metric(pred, p.target_image, loss_cfg))
    return float(np.mean(psnrs)), float(np.mean(ssims))


def _write_log(rows: list[dict], stream: IO[str]) -> None:
    w = csv.DictWriter(stream, fieldnames=LOG_COLUMNS)
    w.writeheader()
    for row in rows:
        w.writerow(row)


def train(model_cfg: ModelConfig, ds, cfg: TrainConfig, out_dir=None) -> TrainResult:
    """Runs the full schedule and returns the final checkpoint plus the log.

    One log row per epoch: epoch, lr, the three loss components, the
    total, and validation PSNR/SSIM (blank without a validation split).
    When ``out_dir`` is given, log.csv and checkpoint.wdrn are written
    there, and checkpoint_best.wdrn is refreshed at every validation
    PSNR improvement. Training honors ``early_stop_epoch`` as a hard cap
    and aborts on a non-finite loss, naming the offending step.
    """
    if not ds.train:
        raise TrainingError("train: empty training split")
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    params = model.build(model_cfg, seed=cfg.seed)
    state = AdamState.for_params(params)
    rng = np.random.default_rng([cfg.seed, 1])
    epochs = cfg.epochs if cfg.early_stop_epoch is None else min(cfg.epochs, cfg.early_stop_epoch)
    n = len(ds.train)
    log: list[dict] = []
    best_psnr = -np.inf
    best_epoch: int | None = None

    for epoch in range(epochs):
        lr = lr_at(epoch, cfg)
        order = rng.permutation(n)
        sums = {"mae": 0.0, "ssim": 0.0, "gray": 0.0, "total": 0.0}
        steps = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            x, y = _batch(ds.train, idx)
            pred = model.forward(params, x)
            total, parts = losses.total_loss_parts(pred, y, cfg.loss)
            value = total.item()
            if not np.isfinite(value):
                raise TrainingError(
                    f"non-finite loss {value} at epoch {epoch}, step {steps} (pairs {list(idx)})"
                )
            params.zero_grads()
            T.backward(total)
            grads = {name: p.grad for name, p in params.items()}
            adam_step(params, grads, state, lr, cfg.beta1, cfg.beta2, cfg.adam_eps)
            for key in ("mae", "ssim", "gray"):
                sums[key] += parts[key].item()
            sums["total"] += value
            steps += 1

        row = {
            "epoch": epoch,
            "lr": f"{lr:.8g}",
            "mae": f"{sums['mae'] / steps:.8g}",
            "ssim_loss": f"{sums['ssim'] / steps:.8g}",
            "gray": f"{sums['gray'] / steps:.8g}",
            "total": f"{sums['total'] / steps:.8g}",
            "val_psnr": "",
            "val_ssim": "",
        }
        if ds.val:
            val_psnr, val_ssim = _validate(params, ds.val, cfg.loss)
            row["val_psnr"] = f"{val_psnr:.8g}"
            row["val_ssim"] = f"{val_ssim:.8g}"
            if val_psnr > best_psnr:
                best_psnr = val_psnr
                best_epoch = epoch
                if out_dir is not None:
                    snap = Checkpoint.from_params(
                        params, state, epoch + 1, rng.bit_generator.state
                    )
                    save_checkpoint(snap, out_dir / "checkpoint_best.wdrn")
        log.append(row)

    ckpt = Checkpoint.from_params(params, state, epochs, rng.bit_generator.state)
    if out_dir is not None:
        save_checkpoint(ckpt, out_dir / "checkpoint.wdrn")
        with open(out_dir / "log.csv", "w", encoding="utf-8", newline="") as f:
            _write_log(log, f)
    return TrainResult(checkpoint=ckpt, log=log, best_epoch=best_epoch)


def load_config_file(path) -> dict[str, str]:
    """Parses a flat ``key = value`` UTF-8 file; ``#`` starts a comment."""
    raw: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = stripped.split("=", 1)
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        raw[key] = value
    return raw
