"""Convolutional-recurrent classifier over mel-spectrogram clips.

Four conv blocks (conv 3x3, batch norm, ELU, max pool, dropout) collapse the
frequency axis to 1, the surviving time steps feed two stacked GRUs, and the
final GRU state (the bottleneck) goes through dropout into a dense layer that
produces class logits. Checkpoints serialize the config, every named tensor,
and training metadata to a single binary file.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nn import BatchNorm2d, Conv2d, Dense, Dropout, Elu, Gru, MaxPool2d, Parameter

CHECKPOINT_MAGIC = b"CRNN"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class CrnnConfig:
    n_mels: int = 128
    n_classes: int = 20
    conv_channels: tuple[int, ...] = (64, 128, 128, 128)
    kernel_size: int = 3
    pools: tuple[tuple[int, int], ...] = ((4, 2), (4, 2), (4, 2), (2, 2))
    conv_dropout: float = 0.1
    gru_units: tuple[int, ...] = (32, 32)
    final_dropout: float = 0.3

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.kernel_size % 2 == 0 or self.kernel_size < 1:
            raise ValueError(f"kernel_size must be odd, got {self.kernel_size}")
        if len(self.conv_channels) != len(self.pools) or not self.conv_channels:
            raise ValueError("conv_channels and pools must be non-empty and equal length")
        if not self.gru_units:
            raise ValueError("at least one recurrent layer is required")
        for rate in (self.conv_dropout, self.final_dropout):
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        freq = self.n_mels
        for ph, _ in self.pools:
            if freq % ph != 0:
                raise ValueError(
                    f"frequency pools {tuple(p[0] for p in self.pools)} do not divide n_mels={self.n_mels} evenly"
                )
            freq //= ph
        if freq != 1:
            raise ValueError(
                f"frequency pools must reduce n_mels={self.n_mels} exactly to 1, got {freq}"
            )

    @property
    def min_clip_frames(self) -> int:
        """Smallest clip length (frames) that still yields one time step."""
        out = 1
        for _, pw in self.pools:
            out *= pw
        return out

    def time_steps(self, clip_frames: int) -> int:
        """Sequence length entering the recurrent stage."""
        t = clip_frames
        for _, pw in self.pools:
            t //= pw
        return t


@dataclass
class Checkpoint:
    config: CrnnConfig
    tensors: dict[str, np.ndarray]
    metadata: dict[str, str] = field(default_factory=dict)


class Crnn:
    """The assembled model; single-writer while training."""

    def __init__(self, config: CrnnConfig, seed: int, dtype=np.float32):
        self.config = config
        self.dtype = dtype
        self.metadata: dict[str, str] = {}
        rng = np.random.default_rng((seed, 0))
        self.convs: list[Conv2d] = []
        self.bns: list[BatchNorm2d] = []
        self.elus: list[Elu] = []
        self.pools: list[MaxPool2d] = []
        self.conv_drops: list[Dropout] = []
        in_ch = 1
        for i, (out_ch, pool) in enumerate(zip(config.conv_channels, config.pools)):
            self.convs.append(Conv2d(in_ch, out_ch, config.kernel_size, rng, dtype=dtype))
            self.bns.append(BatchNorm2d(out_ch, dtype=dtype))
            self.elus.append(Elu())
            self.pools.append(MaxPool2d(pool))
            self.conv_drops.append(Dropout(config.conv_dropout, np.random.default_rng((seed, 1, i))))
            in_ch = out_ch
        self.grus: list[Gru] = []
        gru_in = config.conv_channels[-1]
        for units in config.gru_units:
            self.grus.append(Gru(gru_in, units, rng, dtype=dtype))
            gru_in = units
        self.final_drop = Dropout(config.final_dropout, np.random.default_rng((seed, 2)))
        self.out = Dense(gru_in, config.n_classes, rng, dtype=dtype)

    def forward(self, x: np.ndarray, train: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Return (logits (batch, n_classes), bottleneck (batch, units))."""
        cfg = self.config
        if x.ndim != 4 or x.shape[1] != 1 or x.shape[2] != cfg.n_mels:
            raise ValueError(f"expected input (batch, 1, {cfg.n_mels}, frames), got {x.shape}")
        if x.shape[3] < cfg.min_clip_frames:
            raise ValueError(
                f"clip of {x.shape[3]} frames collapses to zero time steps; need >= {cfg.min_clip_frames}"
            )
        h = x.astype(self.dtype, copy=False)
        for i in range(len(self.convs)):
            h = self.convs[i].forward(h, train=train, need_input_grad=i > 0)
            h = self.bns[i].forward(h, train=train)
            h = self.elus[i].forward(h, train=train)
            h = self.pools[i].forward(h, train=train)
            h = self.conv_drops[i].forward(h, train=train)
        # (batch, channels, 1, time) -> (batch, time, channels)
        seq = np.ascontiguousarray(h[:, :, 0, :].transpose(0, 2, 1))
        for gru in self.grus:
            seq = gru.forward(seq, train=train)
        bottleneck = seq[:, -1, :].copy()
        dropped = self.final_drop.forward(bottleneck, train=train)
        logits = self.out.forward(dropped, train=train)
        self._seq_shape = seq.shape
        return logits, bottleneck

    def backward(self, dlogits: np.ndarray) -> None:
        dbott = self.final_drop.backward(self.out.backward(dlogits))
        dseq = np.zeros(self._seq_shape, dtype=dbott.dtype)
        dseq[:, -1, :] = dbott
        for gru in reversed(self.grus):
            dseq = gru.backward(dseq)
        dh = np.ascontiguousarray(dseq.transpose(0, 2, 1))[:, :, None, :]
        for i in reversed(range(len(self.convs))):
            dh = self.conv_drops[i].backward(dh)
            dh = self.pools[i].backward(dh)
            dh = self.elus[i].backward(dh)
            dh = self.bns[i].backward(dh)
            dh = self.convs[i].backward(dh)

    def named_parameters(self) -> list[tuple[str, Parameter]]:
        named: list[tuple[str, Parameter]] = []
        for i, (conv, bn) in enumerate(zip(self.convs, self.bns), start=1):
            named += [(f"conv{i}.weight", conv.weight), (f"conv{i}.bias", conv.bias),
                      (f"bn{i}.gamma", bn.gamma), (f"bn{i}.beta", bn.beta)]
        gate_names = ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")
        for j, gru in enumerate(self.grus, start=1):
            named += [(f"gru{j}.{g}", p) for g, p in zip(gate_names, gru.parameters())]
        named += [("out.weight", self.out.weight), ("out.bias", self.out.bias)]
        return named

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self) -> list[tuple[str, np.ndarray]]:
        named = []
        for i, bn in enumerate(self.bns, start=1):
            named += [(f"bn{i}.running_mean", bn.running_mean), (f"bn{i}.running_var", bn.running_var)]
        return named

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        layer, _, stat = name.partition(".")
        bn = self.bns[int(layer.removeprefix("bn")) - 1]
        setattr(bn, stat, value.astype(self.dtype))


def build_model(config: CrnnConfig, seed: int, clip_frames: int | None = None) -> Crnn:
    if clip_frames is not None and clip_frames < config.min_clip_frames:
        raise ValueError(
            f"clips of {clip_frames} frames collapse to zero time steps before the "
            f"recurrent stage; need >= {config.min_clip_frames} frames"
        )
    return Crnn(config, seed)


def _config_to_lines(config: CrnnConfig) -> list[str]:
    return [
        f"n_mels={config.n_mels}",
        f"n_classes={config.n_classes}",
        f"conv_channels={','.join(map(str, config.conv_channels))}",
        f"kernel_size={config.kernel_size}",
        f"pools={','.join(f'{ph}x{pw}' for ph, pw in config.pools)}",
        f"conv_dropout={config.conv_dropout!r}",
        f"gru_units={','.join(map(str, config.gru_units))}",
        f"final_dropout={config.final_dropout!r}",
    ]


def _config_from_fields(fields: dict[str, str], path: Path) -> CrnnConfig:
    try:
        return CrnnConfig(
            n_mels=int(fields["n_mels"]),
            n_classes=int(fields["n_classes"]),
            conv_channels=tuple(int(v) for v in fields["conv_channels"].split(",")),
            kernel_size=int(fields["kernel_size"]),
            pools=tuple(
                (int(p.split("x")[0]), int(p.split("x")[1])) for p in fields["pools"].split(",")
            ),
            conv_dropout=float(fields["conv_dropout"]),
            gru_units=tuple(int(v) for v in fields["gru_units"].split(",")),
            final_dropout=float(fields["final_dropout"]),
        )
    except (KeyError, ValueError, IndexError) as exc:
        raise ValueError(f"{path}: malformed checkpoint config blob ({exc})") from exc


def save_checkpoint(model: Crnn, path) -> None:
    path = Path(path)
    lines = _config_to_lines(model.config)
    for key in sorted(model.metadata):
        lines.append(f"meta.{key}={model.metadata[key]}")
    blob = ("\n".join(lines) + "\n").encode("utf-8")
    chunks = [CHECKPOINT_MAGIC, struct.pack("<BI", CHECKPOINT_VERSION, len(blob)), blob]
    tensors = list(model.named_parameters()) + [
        (name, buf) for name, buf in model.named_buffers()
    ]
    for name, tensor in tensors:
        data = tensor.data if isinstance(tensor, Parameter) else tensor
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(np.ascontiguousarray(data, dtype="<f4").tobytes())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(chunks))


def _take(raw: bytes, pos: int, count: int, path: Path) -> tuple[bytes, int]:
    if pos + count > len(raw):
        raise ValueError(f"{path}: truncated checkpoint")
    return raw[pos: pos + count], pos + count


def load_checkpoint(path, expected_config: CrnnConfig | None = None) -> Crnn:
    """Rebuild a model from a checkpoint file.

    When ``expected_config`` is given, a file whose embedded config differs
    is rejected before any tensors are read.
    """
    path = Path(path)
    raw = path.read_bytes()
    head, pos = _take(raw, 0, 4, path)
    if head != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic {head!r})")
    head, pos = _take(raw, pos, 5, path)
    version, blob_len = struct.unpack("<BI", head)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    blob, pos = _take(raw, pos, blob_len, path)
    fields: dict[str, str] = {}
    for line in blob.decode("utf-8").splitlines():
        if line:
            key, _, value = line.partition("=")
            fields[key] = value
    metadata = {k.removeprefix("meta."): v for k, v in fields.items() if k.startswith("meta.")}
    config = _config_from_fields({k: v for k, v in fields.items() if not k.startswith("meta.")}, path)
    if expected_config is not None and config != expected_config:
        raise ValueError(f"{path}: checkpoint config mismatch: file has {config}, expected {expected_config}")

    seed = int(metadata.get("seed", "0"))
    model = Crnn(config, seed)
    model.metadata = metadata
    params = dict(model.named_parameters())
    buffers = dict(model.named_buffers())
    remaining = set(params) | set(buffers)
    while pos < len(raw):
        head, pos = _take(raw, pos, 2, path)
        (name_len,) = struct.unpack("<H", head)
        name_bytes, pos = _take(raw, pos, name_len, path)
        name = name_bytes.decode("utf-8")
        head, pos = _take(raw, pos, 1, path)
        ndim = head[0]
        head, pos = _take(raw, pos, 4 * ndim, path)
        shape = struct.unpack(f"<{ndim}I", head)
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        data_bytes, pos = _take(raw, pos, 4 * count, path)
        tensor = np.frombuffer(data_bytes, dtype="<f4").reshape(shape).astype(np.float32)
        if name in params:
            if params[name].data.shape != tensor.shape:
                raise ValueError(
                    f"{path}: tensor {name} has shape {tensor.shape}, config implies {params[name].data.shape}"
                )
            params[name].data = tensor
            params[name].grad = np.zeros_like(tensor)
        elif name in buffers:
            if buffers[name].shape != tensor.shape:
                raise ValueError(
                    f"{path}: tensor {name} has shape {tensor.shape}, config implies {buffers[name].shape}"
                )
            model.set_buffer(name, tensor)
        else:
            raise ValueError(f"{path}: unknown tensor {name!r} in checkpoint")
        remaining.discard(name)
    if remaining:
        raise ValueError(f"{path}: checkpoint missing tensors: {sorted(remaining)}")
    return model
