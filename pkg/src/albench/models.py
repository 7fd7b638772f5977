"""Residual-network classifiers with MC-dropout sites.

Two variants: the full 18-layer network (four stages of two basic blocks)
and a truncated one keeping only the first stage, for small inputs. Dropout
is placed after every residual stage and before the linear head so
stochastic forward passes disagree enough to carry an uncertainty signal.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

BACKBONES = {
    "resnet18-full": (64, 128, 256, 512),
    "resnet18-first-block": (64,),
}


class BasicBlock(nn.Module):
    """Two 3x3 convolutions with a skip connection."""

    def __init__(self, in_channels: int, out_channels: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, out_channels, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_channels)
        self.conv2 = nn.Conv2d(out_channels, out_channels, 3, stride=1, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_channels)
        if stride != 1 or in_channels != out_channels:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_channels),
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return F.relu(out + self.shortcut(x))


class ResNetClassifier(nn.Module):
    """Stem + residual stages + global average pool + linear head.

    small_input swaps the 7x7/stride-2 stem and max-pool for a 3x3/stride-1
    convolution so 32x32 inputs are not downsampled away.
    """

    def __init__(
        self,
        backbone: str,
        num_classes: int,
        small_input: bool = True,
        stage_dropout: float = 0.25,
        head_dropout: float = 0.5,
        in_channels: int = 3,
    ):
        super().__init__()
        if backbone not in BACKBONES:
            raise ValueError(f"unknown backbone {backbone!r}")
        self.backbone = backbone
        channels = BACKBONES[backbone]

        stem_out = channels[0]
        if small_input:
            self.stem = nn.Sequential(
                nn.Conv2d(in_channels, stem_out, 3, stride=1, padding=1, bias=False),
                nn.BatchNorm2d(stem_out),
                nn.ReLU(inplace=True),
            )
        else:
            self.stem = nn.Sequential(
                nn.Conv2d(in_channels, stem_out, 7, stride=2, padding=3, bias=False),
                nn.BatchNorm2d(stem_out),
                nn.ReLU(inplace=True),
                nn.MaxPool2d(3, stride=2, padding=1),
            )

        stages = []
        in_ch = stem_out
        for i, out_ch in enumerate(channels):
            stride = 1 if i == 0 else 2
            stages.append(
                nn.Sequential(
                    BasicBlock(in_ch, out_ch, stride=stride),
                    BasicBlock(out_ch, out_ch, stride=1),
                    nn.Dropout2d(stage_dropout),
                )
            )
            in_ch = out_ch
        self.stages = nn.Sequential(*stages)
        self.head_dropout = nn.Dropout(head_dropout)
        self.fc = nn.Linear(in_ch, num_classes)

    def forward(self, x):
        out = self.stem(x)
        out = self.stages(out)
        out = F.adaptive_avg_pool2d(out, 1).flatten(1)
        return self.fc(self.head_dropout(out))


def build_backbone(
    backbone: str,
    num_classes: int,
    small_input: bool,
    stage_dropout: float = 0.25,
    head_dropout: float = 0.5,
) -> ResNetClassifier:
    return ResNetClassifier(
        backbone=backbone,
        num_classes=num_classes,
        small_input=small_input,
        stage_dropout=stage_dropout,
        head_dropout=head_dropout,
    )


def set_mc_dropout(net: nn.Module, active: bool) -> None:
    """Flip only the dropout modules into train mode (BatchNorm stays eval)."""
    for module in net.modules():
        if isinstance(module, (nn.Dropout, nn.Dropout2d)):
            module.train(active)


@torch.no_grad()
def dropout_rates_nonzero(net: nn.Module) -> bool:
    return any(
        module.p > 0
        for module in net.modules()
        if isinstance(module, (nn.Dropout, nn.Dropout2d))
    )
