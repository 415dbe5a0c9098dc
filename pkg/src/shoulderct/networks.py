"""Network architectures: dual-decoder 3D segmenter and multi-task stager.

The segmenter is a 3D U-Net whose decoder splits into two parallel branches:
a region branch emitting per-voxel class probabilities and a contour branch
emitting per-class edge probabilities.  Each contour block is refined by a
pyramidal edge-extraction module (multi-scale average-pool subtraction) and
feeds its features sideways into the same-resolution region block, so
boundary evidence sharpens the region masks at every scale.

The stager consumes a joint-centered patch through a plain convolutional
trunk whose feature count doubles every two blocks, then branches into three
dropout-guarded dense heads (osteophytes 3-way, joint space 3-way, alignment
2-way).

Inference helpers run in eval mode under ``no_grad`` so outputs are
deterministic for fixed weights.  Checkpoints are versioned dict containers
holding plain-type configs plus state dicts; mismatched versions are
rejected on load.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import FormatError, ShapeError

CHECKPOINT_VERSION = 1
TASKS = ("os", "js", "hsa")
TASK_CLASSES = (3, 3, 2)


@dataclass(frozen=True)
class SegmenterConfig:
    levels: int = 4
    base_features: int = 16
    in_channels: int = 1
    out_classes: int = 3

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("segmenter needs at least 2 resolution levels")
        if self.base_features < 1 or self.out_classes < 2:
            raise ValueError("invalid feature/class count")


@dataclass(frozen=True)
class StagingConfig:
    blocks: int = 7
    base_features: int = 48
    input_size: int = 160
    in_channels: int = 1
    head_classes: tuple[int, ...] = TASK_CLASSES
    dense_units: tuple[int, int] = (256, 32)
    dropout: float = 0.6

    def __post_init__(self):
        if self.blocks < 1:
            raise ValueError("need at least one processing block")
        if self.input_size < 2 ** ((self.blocks + 1) // 2):
            raise ShapeError(
                f"input {self.input_size} too small for {self.blocks} blocks"
            )

    @property
    def channel_trace(self) -> tuple[int, ...]:
        """Per-block feature maps: doubling every two blocks."""
        return tuple(self.base_features * 2 ** (i // 2) for i in range(self.blocks))

    @property
    def spatial_trace(self) -> tuple[int, ...]:
        """Spatial size after each block (floor pooling, clamped at 1)."""
        sizes = [self.input_size]
        for _ in range(self.blocks):
            sizes.append(max(sizes[-1] // 2, 1))
        return tuple(sizes)


def _he_init(module: nn.Module) -> None:
    if isinstance(module, (nn.Conv3d, nn.Linear)):
        nn.init.kaiming_normal_(module.weight, nonlinearity="relu")
        if module.bias is not None:
            nn.init.zeros_(module.bias)


class ConvBlock(nn.Module):
    """Two (conv 3x3x3 stride 1 -> batch norm -> ReLU) stages."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv3d(in_ch, out_ch, 3, padding=1),
            nn.BatchNorm3d(out_ch),
            nn.ReLU(inplace=True),
            nn.Conv3d(out_ch, out_ch, 3, padding=1),
            nn.BatchNorm3d(out_ch),
            nn.ReLU(inplace=True),
        )

    def forward(self, x):
        return self.body(x)


class PyramidalEdgeExtraction(nn.Module):
    """Edge enhancement by multi-scale average-pool subtraction.

    ``e_s = f - avgpool_s(f)`` for window sizes 3 and 5; the differences are
    fused back to the input channel count with a 1x1x1 convolution.  Border
    averages exclude padding so constant inputs produce zero edge responses.
    """

    def __init__(self, channels: int, pool_sizes: tuple[int, ...] = (3, 5)):
        super().__init__()
        self.pool_sizes = pool_sizes
        self.fuse = nn.Conv3d(channels * (1 + len(pool_sizes)), channels, 1)

    def forward(self, x):
        if min(x.shape[2:]) < max(self.pool_sizes):
            raise ShapeError(
                f"spatial dims {tuple(x.shape[2:])} below pooling window {max(self.pool_sizes)}"
            )
        feats = [x]
        for s in self.pool_sizes:
            smooth = F.avg_pool3d(x, s, stride=1, padding=s // 2, count_include_pad=False)
            feats.append(x - smooth)
        return self.fuse(torch.cat(feats, dim=1))


class _Upsample(nn.Module):
    """Nearest-neighbor upsample followed by a channel-reducing convolution."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.conv = nn.Conv3d(in_ch, out_ch, 3, padding=1)

    def forward(self, x):
        return self.conv(F.interpolate(x, scale_factor=2, mode="nearest"))


class DualDecoderUNet3D(nn.Module):
    """Encoder + two mirrored decoders (region and contour) with sideways skips."""

    def __init__(self, config: SegmenterConfig | None = None, **kwargs):
        super().__init__()
        self.config = config or SegmenterConfig(**kwargs)
        cfg = self.config
        feats = [cfg.base_features * 2 ** l for l in range(cfg.levels + 1)]

        self.encoders = nn.ModuleList()
        in_ch = cfg.in_channels
        for l in range(cfg.levels):
            self.encoders.append(ConvBlock(in_ch, feats[l]))
            in_ch = feats[l]
        self.pool = nn.MaxPool3d(2)
        self.bottleneck = ConvBlock(feats[cfg.levels - 1], feats[cfg.levels])

        self.up_region = nn.ModuleList()
        self.up_contour = nn.ModuleList()
        self.dec_region = nn.ModuleList()
        self.dec_contour = nn.ModuleList()
        self.pee = nn.ModuleList()
        for l in range(cfg.levels - 1, -1, -1):
            self.up_region.append(_Upsample(feats[l + 1], feats[l]))
            self.up_contour.append(_Upsample(feats[l + 1], feats[l]))
            self.dec_contour.append(ConvBlock(2 * feats[l], feats[l]))
            self.pee.append(PyramidalEdgeExtraction(feats[l]))
            # region block sees its upsample, the encoder skip, and the
            # same-resolution contour features (sideways skip)
            self.dec_region.append(ConvBlock(3 * feats[l], feats[l]))

        self.region_head = nn.Conv3d(feats[0], cfg.out_classes, 1)
        self.contour_head = nn.Conv3d(feats[0], cfg.out_classes, 1)
        self.apply(_he_init)

    def _check_input(self, x: torch.Tensor) -> None:
        if x.dim() != 5 or x.shape[1] != self.config.in_channels:
            raise ShapeError(f"expected (B, {self.config.in_channels}, X, Y, Z), got {tuple(x.shape)}")
        factor = 2 ** self.config.levels
        for s in x.shape[2:]:
            if s % factor != 0 or s < factor:
                raise ShapeError(f"spatial size {tuple(x.shape[2:])} not divisible by {factor}")

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (region class probabilities, contour edge probabilities)."""
        self._check_input(x)
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)

        region, contour = x, x
        for i, skip in enumerate(reversed(skips)):
            contour = self.dec_contour[i](torch.cat([self.up_contour[i](contour), skip], dim=1))
            contour = self.pee[i](contour)
            region = self.dec_region[i](
                torch.cat([self.up_region[i](region), skip, contour], dim=1)
            )
        region_probs = torch.softmax(self.region_head(region), dim=1)
        edge_probs = torch.sigmoid(self.contour_head(contour))
        return region_probs, edge_probs

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


class MultiTaskStagingNet(nn.Module):
    """Convolutional trunk + three softmax heads grading the GH joint."""

    def __init__(self, config: StagingConfig | None = None, **kwargs):
        super().__init__()
        self.config = config or StagingConfig(**kwargs)
        cfg = self.config
        trace = cfg.channel_trace

        blocks = []
        in_ch = cfg.in_channels
        for ch in trace:
            blocks.append(ConvBlock(in_ch, ch))
            in_ch = ch
        self.blocks = nn.ModuleList(blocks)

        final_spatial = cfg.spatial_trace[-1]
        flat = trace[-1] * final_spatial ** 3
        self.heads = nn.ModuleList()
        for n_out in cfg.head_classes:
            self.heads.append(nn.Sequential(
                nn.Dropout(cfg.dropout),
                nn.Linear(flat, cfg.dense_units[0]),
                nn.ReLU(inplace=True),
                nn.Linear(cfg.dense_units[0], cfg.dense_units[1]),
                nn.ReLU(inplace=True),
                nn.Linear(cfg.dense_units[1], n_out),
            ))
        self.apply(_he_init)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, ...]:
        """Per-task probability tensors, each summing to 1 per sample."""
        if x.dim() != 5 or x.shape[1] != self.config.in_channels:
            raise ShapeError(f"expected (B, {self.config.in_channels}, X, Y, Z), got {tuple(x.shape)}")
        if any(s != self.config.input_size for s in x.shape[2:]):
            raise ShapeError(
                f"input spatial {tuple(x.shape[2:])} != configured {self.config.input_size}"
            )
        for block in self.blocks:
            x = block(x)
            # degenerate axes (already collapsed to 1) skip pooling
            kernel = tuple(2 if s >= 2 else 1 for s in x.shape[2:])
            if max(kernel) > 1:
                x = F.max_pool3d(x, kernel)
        x = torch.flatten(x, start_dim=1)
        return tuple(torch.softmax(head(x), dim=1) for head in self.heads)

    @property
    def channel_trace(self) -> tuple[int, ...]:
        return self.config.channel_trace

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


# ---------------------------------------------------------------------------
# inference contracts
# ---------------------------------------------------------------------------

def forward_seg(net: DualDecoderUNet3D, patch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic single-patch inference: (class probs, edge probs), each (C, X, Y, Z)."""
    net.eval()
    with torch.no_grad():
        x = torch.from_numpy(np.array(patch, dtype=np.float32))[None, None]
        region, edges = net(x)
    return region[0].numpy(), edges[0].numpy()


def forward_cls(net: MultiTaskStagingNet, patch: np.ndarray) -> dict[str, np.ndarray]:
    """Deterministic staging inference: task name -> probability vector."""
    net.eval()
    with torch.no_grad():
        x = torch.from_numpy(np.array(patch, dtype=np.float32))[None, None]
        probs = net(x)
    return {task: p[0].numpy() for task, p in zip(TASKS, probs)}


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_KIND_TO_CLS = {
    "segmenter": (DualDecoderUNet3D, SegmenterConfig),
    "stager": (MultiTaskStagingNet, StagingConfig),
}


def save_checkpoint(
    path: str | Path,
    net: nn.Module,
    optimizer: torch.optim.Optimizer | None = None,
    epoch: int = 0,
    extra: dict | None = None,
) -> None:
    kind = "segmenter" if isinstance(net, DualDecoderUNet3D) else "stager"
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "kind": kind,
        "config": asdict(net.config),
        "model_state": net.state_dict(),
        "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
        "epoch": epoch,
        "extra": extra or {},
    }
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> tuple[nn.Module, dict]:
    """Rebuild the network from a checkpoint; returns (net, payload)."""
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    net_cls, cfg_cls = _KIND_TO_CLS[payload["kind"]]
    cfg_kwargs = dict(payload["config"])
    for key, value in cfg_kwargs.items():
        if isinstance(value, list):
            cfg_kwargs[key] = tuple(value)
    net = net_cls(cfg_cls(**cfg_kwargs))
    net.load_state_dict(payload["model_state"])
    net.eval()
    return net, payload
