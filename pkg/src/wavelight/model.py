"""Multi-level wavelet-domain encoder-decoder for illumination recalibration.

Default 3-level dataflow (channels for 3-channel input at width_scale 1):

    x --dwt--> 12 --space_to_depth(2)--> 48 --[4 conv-relu x16]--> e1
    e1 --dwt--> 64 --[4 conv-relu x64]--> e2
    e2 --dwt--> 256 --[7 conv-relu x256]--> e3
    e3 --idwt--> 64  (+ e2) --[4 conv-relu x64]--> d1
    d1 --idwt--> 16  (+ e1) --[4 conv-relu x16, last widened to 64]--> d2
    d2 --depth_to_space(2)--> 16 --conv(12, no relu)--> 12 --idwt--> 3
    out = x + residual

The 12-filter head conv is zero-initialized, so a freshly built network
is exactly the identity map. Skip additions are element-wise, which
forces each encoder level's filter count to be 4x the previous level's;
the builder rejects configs that break this. The ``strided`` variant
keeps the same topology but swaps every dwt for a trainable stride-2
convolution (channels x4) and every idwt for a trainable stride-2
transposed convolution (channels /4).

Spatial extents must be divisible by 2**(levels+1) (the +1 covers the
entry shuffler).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from . import shuffle, wavelet
from . import tensor as T
from .tensor import Tensor

__all__ = [
    "ConvBlockSpec",
    "ModelConfig",
    "ParameterSet",
    "build",
    "forward",
    "forward_strided",
    "parameter_count",
    "parameter_shapes",
    "summary",
    "divisibility",
]


@dataclass(frozen=True)
class ConvBlockSpec:
    """A stack of same-width conv-relu layers; kernel must be odd.

    ``final_filters`` optionally widens the last layer (used by the exit
    block so the post-shuffle feature map keeps its contracted width).
    """

    layer_count: int
    filters: int
    kernel: int = 3
    final_filters: int | None = None

    def __post_init__(self):
        if self.layer_count < 1:
            raise ValueError(f"layer_count must be >= 1, got {self.layer_count}")
        if self.filters < 1:
            raise ValueError(f"filters must be >= 1, got {self.filters}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError(f"kernel must be odd and >= 1, got {self.kernel}")


@dataclass(frozen=True)
class ModelConfig:
    levels: int
    encoder_blocks: tuple[ConvBlockSpec, ...]
    decoder_blocks: tuple[ConvBlockSpec, ...]
    domain_variant: str = "wavelet"
    width_scale: float = 1.0
    input_channels: int = 3

    @classmethod
    def default(
        cls,
        levels: int = 3,
        domain_variant: str = "wavelet",
        width_scale: float = 1.0,
        kernel: int = 3,
    ) -> "ModelConfig":
        """Per-level block sizes for the 2-, 3- and 4-level variants.

        The 3-level layout is the reference; 2 levels truncate it and 4
        levels extend it inward (each added level is 4x wider, as the
        element-wise skip additions require).
        """
        e1 = ConvBlockSpec(4, 16, kernel)
        e2 = ConvBlockSpec(4, 64, kernel)
        e3 = ConvBlockSpec(7, 256, kernel)
        d_mid = ConvBlockSpec(4, 64, kernel)
        d_exit = ConvBlockSpec(4, 16, kernel, final_filters=64)
        if levels == 2:
            enc = (e1, e2)
            dec = (d_exit,)
        elif levels == 3:
            enc = (e1, e2, e3)
            dec = (d_mid, d_exit)
        elif levels == 4:
            enc = (e1, e2, e3, ConvBlockSpec(7, 1024, kernel))
            dec = (ConvBlockSpec(4, 256, kernel), d_mid, d_exit)
        else:
            raise ValueError(f"levels must be in {{2, 3, 4}}, got {levels}")
        return cls(
            levels=levels,
            encoder_blocks=enc,
            decoder_blocks=dec,
            domain_variant=domain_variant,
            width_scale=width_scale,
        )


class _Layer(NamedTuple):
    name: str
    kind: str  # conv_relu | conv | down | up
    kernel: int
    cin: int
    cout: int


def _scaled(filters: int, scale: float) -> int:
    return max(1, round(filters * scale))


def divisibility(config: ModelConfig) -> int:
    """Spatial divisibility the network requires of its inputs."""
    return 2 ** (config.levels + 1)


def _plan(config: ModelConfig) -> list[_Layer]:
    """Ordered parameterized layers; raises on inconsistent channel counts."""
    if config.levels not in (2, 3, 4):
        raise ValueError(f"levels must be in {{2, 3, 4}}, got {config.levels}")
    if len(config.encoder_blocks) != config.levels:
        raise ValueError(
            f"expected {config.levels} encoder blocks, got {len(config.encoder_blocks)}"
        )
    if len(config.decoder_blocks) != config.levels - 1:
        raise ValueError(
            f"expected {config.levels - 1} decoder blocks, got {len(config.decoder_blocks)}"
        )
    if config.domain_variant not in ("wavelet", "strided"):
        raise ValueError(f"unknown domain_variant {config.domain_variant!r}")
    if config.width_scale <= 0:
        raise ValueError(f"width_scale must be > 0, got {config.width_scale}")
    if config.input_channels != 3:
        raise ValueError(f"input_channels must be 3, got {config.input_channels}")

    levels = config.levels
    strided = config.domain_variant == "strided"
    fs = [_scaled(b.filters, config.width_scale) for b in config.encoder_blocks]
    for i in range(1, levels):
        if fs[i] != 4 * fs[i - 1]:
            raise ValueError(
                f"encoder level {i + 1}: element-wise skip addition requires "
                f"{4 * fs[i - 1]} filters (4x level {i}), got {fs[i]}"
            )

    layers: list[_Layer] = []
    cin = config.input_channels

    def block(prefix: str, spec: ConvBlockSpec, cin: int) -> int:
        width = _scaled(spec.filters, config.width_scale)
        last = width if spec.final_filters is None else _scaled(spec.final_filters, config.width_scale)
        for j in range(spec.layer_count):
            cout = last if j == spec.layer_count - 1 else width
            layers.append(_Layer(f"{prefix}.conv{j}", "conv_relu", spec.kernel, cin, cout))
            cin = cout
        return cin

    # encoder
    for i, spec in enumerate(config.encoder_blocks, start=1):
        if strided:
            layers.append(_Layer(f"enc.down{i}", "down", spec.kernel, cin, 4 * cin))
        cin = 4 * cin
        if i == 1:
            cin = cin * 4  # entry space-to-depth(r=2)
        cin = block(f"enc.L{i}", spec, cin)
        if cin != fs[i - 1]:
            raise ValueError(f"encoder level {i}: block emitted {cin} channels, expected {fs[i - 1]}")

    # decoder
    for j, spec in enumerate(config.decoder_blocks, start=1):
        skip_level = levels - j  # adds the encoder output at this level
        if strided:
            layers.append(_Layer(f"dec.up{j}", "up", spec.kernel, cin, cin // 4))
        if cin % 4 or cin // 4 != fs[skip_level - 1]:
            raise ValueError(
                f"decoder block {j}: interpolated features have {cin // 4} channels "
                f"but encoder level {skip_level} emits {fs[skip_level - 1]}"
            )
        cin = block(f"dec.D{j}", spec, fs[skip_level - 1])
        if j < levels - 1 and cin != 4 * fs[skip_level - 2]:
            raise ValueError(
                f"decoder block {j}: emitted {cin} channels, expected "
                f"{4 * fs[skip_level - 2]} for the next skip addition"
            )
    if cin % 4:
        raise ValueError(
            f"decoder exit block: emitted {cin} channels, depth-to-space needs a multiple of 4"
        )

    # head: depth-to-space(r=2), depth-adjusting conv, final synthesis to 3 channels
    head_kernel = config.decoder_blocks[-1].kernel
    cin = cin // 4
    layers.append(_Layer("head.conv12", "conv", head_kernel, cin, 4 * config.input_channels))
    if strided:
        layers.append(
            _Layer("head.up", "up", head_kernel, 4 * config.input_channels, config.input_channels)
        )
    return layers


class ParameterSet:
    """Named trainable tensors in deterministic (construction) order."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self._tensors: dict[str, Tensor] = {}

    def add(self, name: str, t: Tensor) -> None:
        if name in self._tensors:
            raise ValueError(f"duplicate parameter name {name!r}")
        self._tensors[name] = t

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._tensors.items())

    def zero_grads(self) -> None:
        for t in self._tensors.values():
            t.grad = None


def build(config: ModelConfig, seed: int, dtype=np.float32) -> ParameterSet:
    """He-style fan-in uniform init from ``seed``; biases zero.

    The head conv is zero-initialized so the untrained network is the
    identity map. The same seed always yields bitwise-identical
    parameters.
    """
    rng = np.random.default_rng(seed)
    params = ParameterSet(config)
    for layer in _plan(config):
        if layer.kind == "up":
            wshape = (layer.kernel, layer.kernel, layer.cout, layer.cin)
        else:
            wshape = (layer.kernel, layer.kernel, layer.cin, layer.cout)
        if layer.name == "head.conv12":
            w = np.zeros(wshape, dtype=np.float64)
        else:
            bound = math.sqrt(6.0 / (layer.kernel * layer.kernel * layer.cin))
            w = rng.uniform(-bound, bound, size=wshape)
        params.add(f"{layer.name}.weight", Tensor(w.astype(dtype), requires_grad=True))
        params.add(
            f"{layer.name}.bias",
            Tensor(np.zeros((1, 1, 1, layer.cout), dtype=dtype), requires_grad=True),
        )
    return params


def parameter_shapes(config: ModelConfig) -> dict[str, tuple[int, int, int, int]]:
    """Expected name -> shape map (used to validate loaded checkpoints)."""
    shapes: dict[str, tuple[int, int, int, int]] = {}
    for layer in _plan(config):
        if layer.kind == "up":
            shapes[f"{layer.name}.weight"] = (layer.kernel, layer.kernel, layer.cout, layer.cin)
        else:
            shapes[f"{layer.name}.weight"] = (layer.kernel, layer.kernel, layer.cin, layer.cout)
        shapes[f"{layer.name}.bias"] = (1, 1, 1, layer.cout)
    return shapes


def parameter_count(params: ParameterSet) -> int:
    return sum(t.data.size for _, t in params.items())


def summary(params: ParameterSet) -> str:
    lines = [f"{'parameter':<28} {'shape':<20} {'count':>10}"]
    for name, t in params.items():
        lines.append(f"{name:<28} {str(tuple(t.data.shape)):<20} {t.data.size:>10}")
    lines.append(f"{'total':<28} {'':<20} {parameter_count(params):>10}")
    return "\n".join(lines)


def _check_input(config: ModelConfig, x: Tensor) -> None:
    n, h, w, c = x.data.shape
    if c != config.input_channels:
        raise ValueError(f"forward: expected {config.input_channels} channels, got {c}")
    div = divisibility(config)
    if h % div or w % div:
        raise ValueError(
            f"forward: spatial extents {h}x{w} must be divisible by {div} "
            f"for a {config.levels}-level model"
        )


def _run_block(params: ParameterSet, prefix: str, spec: ConvBlockSpec, h: Tensor) -> Tensor:
    for j in range(spec.layer_count):
        h = T.conv2d(h, params[f"{prefix}.conv{j}.weight"], params[f"{prefix}.conv{j}.bias"])
        h = T.relu(h)
    return h


def forward(params: ParameterSet, x: Tensor) -> Tensor:
    """Runs the network; output shape equals input shape.

    Dispatches on the config's domain variant. No clamping happens here;
    [0,1] clamping belongs at the PNG export boundary only.
    """
    config = params.config
    if config.domain_variant == "strided":
        return forward_strided(params, x)
    _check_input(config, x)

    encoded: list[Tensor] = []
    h = x
    for i, spec in enumerate(config.encoder_blocks, start=1):
        h = wavelet.dwt2_haar(h)
        if i == 1:
            h = shuffle.space_to_depth(h, 2)
        h = _run_block(params, f"enc.L{i}", spec, h)
        encoded.append(h)

    d = encoded[-1]
    for j, spec in enumerate(config.decoder_blocks, start=1):
        d = wavelet.idwt2_haar(d)
        d = T.add(d, encoded[config.levels - j - 1])
        d = _run_block(params, f"dec.D{j}", spec, d)

    d = shuffle.depth_to_space(d, 2)
    d = T.conv2d(d, params["head.conv12.weight"], params["head.conv12.bias"])
    d = wavelet.idwt2_haar(d)
    return T.add(d, x)


def forward_strided(params: ParameterSet, x: Tensor) -> Tensor:
    """Ablation variant: trainable stride-2 resamplers instead of dwt/idwt."""
    config = params.config
    if config.domain_variant != "strided":
        raise ValueError("forward_strided requires a ParameterSet built with domain_variant='strided'")
    _check_input(config, x)

    encoded: list[Tensor] = []
    h = x
    for i, spec in enumerate(config.encoder_blocks, start=1):
        h = T.conv2d(h, params[f"enc.down{i}.weight"], params[f"enc.down{i}.bias"], stride=2)
        if i == 1:
            h = shuffle.space_to_depth(h, 2)
        h = _run_block(params, f"enc.L{i}", spec, h)
        encoded.append(h)

    d = encoded[-1]
    for j, spec in enumerate(config.decoder_blocks, start=1):
        d = T.conv2d_transpose(d, params[f"dec.up{j}.weight"], params[f"dec.up{j}.bias"], stride=2)
        d = T.add(d, encoded[config.levels - j - 1])
        d = _run_block(params, f"dec.D{j}", spec, d)

    d = shuffle.depth_to_space(d, 2)
    d = T.conv2d(d, params["head.conv12.weight"], params["head.conv12.bias"])
    d = T.conv2d_transpose(d, params["head.up.weight"], params["head.up.bias"], stride=2)
    return T.add(d, x)
