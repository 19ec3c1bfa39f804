"""Model registry: wrapped classifiers plus their canonical preprocessing.

Each entry fixes the input geometry the bridge advertises in its handshake
and the per-channel normalization applied after masking (masking happens
in [0, 1] pixel space; a zeroed raw pixel is not a zeroed normalized one).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass
class BridgeConfig:
    model: str
    weights: str = "random"  # "pretrained" | "random" | path to a state dict
    device: str = "cpu"
    seed: int = 0
    max_forward_batch: int = 64


@dataclass
class WrappedModel:
    net: nn.Module
    height: int
    width: int
    channels: int
    num_classes: int
    mean: tuple
    std: tuple
    device: torch.device = field(default=torch.device("cpu"))

    @torch.no_grad()
    def logits(self, batch: torch.Tensor) -> torch.Tensor:
        """(n, H, W, C) floats in [0, 1] -> (n, num_classes) logits."""
        x = batch.permute(0, 3, 1, 2).to(self.device)
        mean = torch.tensor(self.mean, dtype=x.dtype, device=self.device).view(1, -1, 1, 1)
        std = torch.tensor(self.std, dtype=x.dtype, device=self.device).view(1, -1, 1, 1)
        return self.net((x - mean) / std).cpu()


class TinyCNN(nn.Module):
    """Small deterministic CNN for conformance tests: 24x24x3 -> 5 classes."""

    def __init__(self, num_classes: int = 5):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 8, 3, padding=1),
            nn.ReLU(),
            nn.MaxPool2d(2),
            nn.Conv2d(8, 16, 3, padding=1),
            nn.ReLU(),
            nn.AdaptiveAvgPool2d(4),
        )
        self.head = nn.Linear(16 * 4 * 4, num_classes)

    def forward(self, x):
        x = self.features(x)
        return self.head(x.flatten(1))


def _load_torchvision(name: str, weights: str) -> nn.Module:
    import torchvision.models as tvm

    builders = {
        "vgg19": (tvm.vgg19, "VGG19_Weights"),
        "resnet50": (tvm.resnet50, "ResNet50_Weights"),
        "mobilenet_v2": (tvm.mobilenet_v2, "MobileNet_V2_Weights"),
    }
    builder, weights_enum = builders[name]
    if weights == "pretrained":
        return builder(weights=getattr(tvm, weights_enum).DEFAULT)
    net = builder(weights=None)
    if weights != "random":
        state = torch.load(weights, map_location="cpu", weights_only=True)
        net.load_state_dict(state)
    return net


def build(cfg: BridgeConfig) -> WrappedModel:
    torch.manual_seed(cfg.seed)
    torch.use_deterministic_algorithms(True)
    device = torch.device(cfg.device)

    if cfg.model == "tiny":
        net = TinyCNN()
        if cfg.weights not in ("random", "pretrained"):
            net.load_state_dict(torch.load(cfg.weights, map_location="cpu", weights_only=True))
        spec = dict(height=24, width=24, channels=3, num_classes=5,
                    mean=(0.5, 0.5, 0.5), std=(0.5, 0.5, 0.5))
    elif cfg.model in ("vgg19", "resnet50", "mobilenet_v2"):
        net = _load_torchvision(cfg.model, cfg.weights)
        spec = dict(height=224, width=224, channels=3, num_classes=1000,
                    mean=IMAGENET_MEAN, std=IMAGENET_STD)
    else:
        raise ValueError(
            f"unknown model {cfg.model!r}: expected tiny, vgg19, resnet50 or mobilenet_v2"
        )
    net.eval()
    net.to(device)
    return WrappedModel(net=net, device=device, **spec)
