"""Architecture registry and activation capture.

For each supported network we tap two stage boundaries: the output of the
last stride-16 stage (the "penultimate" local-feature map, whose channel
width is 176 / 160 / 256 for the three architectures) and the final
convolutional stage output (stride 32).  The global descriptor is the
spatial mean of the final map, i.e. the pooled vector the classifier
head would have consumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch


@dataclass(frozen=True)
class ArchSpec:
    name: str
    builder: str
    weights: str
    penultimate_channels: int
    last_channels: int


ARCHITECTURES = {
    "efficientnet_b5": ArchSpec(
        name="efficientnet_b5", builder="efficientnet_b5",
        weights="EfficientNet_B5_Weights.IMAGENET1K_V1",
        penultimate_channels=176, last_channels=2048,
    ),
    "efficientnet_v2_s": ArchSpec(
        name="efficientnet_v2_s", builder="efficientnet_v2_s",
        weights="EfficientNet_V2_S_Weights.IMAGENET1K_V1",
        penultimate_channels=160, last_channels=1280,
    ),
    "resnet34": ArchSpec(
        name="resnet34", builder="resnet34",
        weights="ResNet34_Weights.IMAGENET1K_V1",
        penultimate_channels=256, last_channels=512,
    ),
}


class WeightLoadError(RuntimeError):
    """Pretrained weights could not be obtained; export cannot proceed."""


def _tap_modules(arch: str, model):
    if arch.startswith("efficientnet"):
        stages = list(model.features)
        # last stride-16 stage: probe cumulative strides on a dummy input
        strides = []
        x = torch.zeros(1, 3, 224, 224)
        with torch.no_grad():
            for stage in stages:
                x = stage(x)
                strides.append(224 // x.shape[2])
        penult_idx = max(i for i, s in enumerate(strides) if s == 16)
        return stages[penult_idx], stages[-1]
    if arch == "resnet34":
        return model.layer3, model.layer4
    raise ValueError(f"unsupported architecture {arch!r}")


class ActivationExtractor:
    """Runs a network in eval mode and captures the two tapped stages."""

    def __init__(self, arch: str, pretrained: bool = True):
        if arch not in ARCHITECTURES:
            raise ValueError(
                f"architecture must be one of {sorted(ARCHITECTURES)}, got {arch!r}"
            )
        import torchvision.models as tvm

        self.spec = ARCHITECTURES[arch]
        builder = getattr(tvm, self.spec.builder)
        if pretrained:
            try:
                model = builder(weights=self.spec.weights)
            except Exception as exc:
                raise WeightLoadError(
                    f"failed to obtain pretrained weights for {arch}: {exc}"
                ) from exc
        else:
            model = builder(weights=None)
        self.model = model.eval()
        for p in self.model.parameters():
            p.requires_grad_(False)

        self._captured = {}
        penult_mod, last_mod = _tap_modules(arch, self.model)
        penult_mod.register_forward_hook(self._capture("penultimate"))
        last_mod.register_forward_hook(self._capture("last"))

    def _capture(self, key):
        def hook(_module, _inputs, output):
            self._captured[key] = output

        return hook

    @staticmethod
    def _to_local_features(feature_map: torch.Tensor) -> np.ndarray:
        """(1, C, H, W) map to (H*W, C) rows, spatial positions row-major."""
        _, c, h, w = feature_map.shape
        return (
            feature_map[0].permute(1, 2, 0).reshape(h * w, c)
            .cpu().numpy().astype(np.float32)
        )

    def extract(self, image_tensor: torch.Tensor):
        """Returns (penultimate T1 x D1, last T2 x D2, descriptor F)."""
        self._captured.clear()
        with torch.no_grad():
            self.model(image_tensor.unsqueeze(0))
        penult = self._to_local_features(self._captured["penultimate"])
        last = self._to_local_features(self._captured["last"])
        descriptor = last.mean(axis=0)
        if penult.shape[1] != self.spec.penultimate_channels:
            raise RuntimeError(
                f"tapped {penult.shape[1]} penultimate channels, expected "
                f"{self.spec.penultimate_channels}"
            )
        return penult, last, descriptor
