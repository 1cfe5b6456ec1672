"""Model construction and forward-hook feature capture.

Standard architectures come from torchvision; WRN-28 (a CIFAR-style wide
residual network, not shipped by torchvision) is implemented locally.
When pretrained weights cannot be fetched the model falls back to a
seeded random initialization with a warning, so extraction stays
reproducible offline.
"""

from __future__ import annotations

import sys

import torch
import torch.nn as nn
import torchvision.models as tvm


class _WideBasic(nn.Module):
    """Pre-activation wide residual block."""

    def __init__(self, in_planes, out_planes, stride):
        super().__init__()
        self.bn1 = nn.BatchNorm2d(in_planes)
        self.conv1 = nn.Conv2d(in_planes, out_planes, 3, stride=stride, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_planes)
        self.conv2 = nn.Conv2d(out_planes, out_planes, 3, stride=1, padding=1, bias=False)
        self.shortcut = (
            nn.Conv2d(in_planes, out_planes, 1, stride=stride, bias=False)
            if stride != 1 or in_planes != out_planes
            else nn.Identity()
        )

    def forward(self, x):
        pre = torch.relu(self.bn1(x))
        skip = x if isinstance(self.shortcut, nn.Identity) else self.shortcut(pre)
        out = self.conv1(pre)
        out = self.conv2(torch.relu(self.bn2(out)))
        return out + skip


class WideResNet28(nn.Module):
    """WRN-28: 3 groups of 4 wide basic blocks (depth = 6*4 + 4)."""

    def __init__(self, widen_factor: int = 10, num_classes: int = 10):
        super().__init__()
        widths = [16, 16 * widen_factor, 32 * widen_factor, 64 * widen_factor]
        self.conv1 = nn.Conv2d(3, widths[0], 3, padding=1, bias=False)
        self.group1 = self._group(widths[0], widths[1], stride=1)
        self.group2 = self._group(widths[1], widths[2], stride=2)
        self.group3 = self._group(widths[2], widths[3], stride=2)
        self.bn = nn.BatchNorm2d(widths[3])
        self.fc = nn.Linear(widths[3], num_classes)

    @staticmethod
    def _group(in_planes, out_planes, stride, blocks=4):
        layers = [_WideBasic(in_planes, out_planes, stride)]
        layers += [_WideBasic(out_planes, out_planes, 1) for _ in range(blocks - 1)]
        return nn.Sequential(*layers)

    def forward(self, x):
        out = self.conv1(x)
        out = self.group3(self.group2(self.group1(out)))
        out = torch.relu(self.bn(out))
        out = torch.flatten(torch.nn.functional.adaptive_avg_pool2d(out, 1), 1)
        return self.fc(out)


def build_model(model_name: str, pretrained: bool, init_seed: int = 0,
                **model_kwargs) -> tuple[nn.Module, bool]:
    """Instantiate the plan's model; returns (model, pretrained_loaded).

    Unknown torchvision names fail fast (model load failure is fatal);
    a failed weight download degrades to seeded random init.
    """
    if model_name == "wrn28":
        torch.manual_seed(init_seed)
        return WideResNet28(**model_kwargs), False
    ctor = getattr(tvm, model_name, None)
    if ctor is None:
        raise ValueError(f"unknown model {model_name!r}")
    if pretrained:
        try:
            return ctor(weights="DEFAULT", **model_kwargs), True
        except Exception as exc:  # no network, missing weight files, ...
            print(
                f"warning: pretrained weights for {model_name} unavailable "
                f"({type(exc).__name__}); falling back to seeded random init",
                file=sys.stderr,
            )
    torch.manual_seed(init_seed)
    return ctor(weights=None, **model_kwargs), False


def resolve_module(model: nn.Module, dotted: str) -> nn.Module:
    node = model
    for part in dotted.split("."):
        children = dict(node.named_children())
        if part not in children:
            raise ValueError(f"tap {dotted!r}: no submodule {part!r}")
        node = children[part]
    return node


class TapRecorder:
    """Forward hooks on the plan's taps; collects one tensor per tap."""

    def __init__(self, model: nn.Module, taps: tuple[str, ...]):
        self.outputs: dict[str, torch.Tensor] = {}
        self._handles = []
        for tap in taps:
            module = resolve_module(model, tap)
            self._handles.append(
                module.register_forward_hook(self._hook(tap))
            )
        self.taps = taps

    def _hook(self, tap):
        def record(_module, _inputs, output):
            self.outputs[tap] = output.detach()

        return record

    def collect(self) -> list[torch.Tensor]:
        missing = [t for t in self.taps if t not in self.outputs]
        if missing:
            raise RuntimeError(f"taps produced no output: {missing}")
        outs = [self.outputs[t] for t in self.taps]
        self.outputs = {}
        return outs

    def close(self):
        for handle in self._handles:
            handle.remove()
        self._handles = []
