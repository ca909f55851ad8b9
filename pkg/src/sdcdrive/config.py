"""Scale configuration for the full model.

Every layer size in the network comes from a ``ScaleConfig``; the "paper"
preset reproduces the published tensor shapes, the "toy" preset shrinks
the channel counts so the whole stack trains in seconds on a CPU.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field


@dataclass
class CvtStage:
    patch_size: int
    stride: int
    embed_dim: int
    depth: int
    heads: int
    kv_stride: int = 2
    mlp_ratio: float = 4.0


@dataclass
class ScaleConfig:
    name: str = "paper"
    input_height: int = 160
    input_width: int = 768
    n_classes: int = 23
    cvt_stages: list = field(default_factory=list)
    decoder_channels: list = field(default_factory=lambda: [256, 128, 64])
    # inverted-residual stack: (expand_ratio, out_channels, repeats, stride)
    sdc_stem_channels: int = 32
    sdc_stages: list = field(default_factory=list)
    sdc_out_channels: int = 192
    fused_dim: int = 64
    measurement_dim: int = 9
    control_hidden: int = 64
    # ablations
    no_cvt: bool = False
    no_vc: bool = False
    no_sdc_sides: bool = False

    def __post_init__(self):
        self.cvt_stages = [
            s if isinstance(s, CvtStage) else CvtStage(**s) for s in self.cvt_stages
        ]
        for s in self.cvt_stages:
            if s.embed_dim % s.heads != 0:
                raise ValueError(
                    f"embed dim {s.embed_dim} not divisible by {s.heads} heads"
                )

    @property
    def rgb_feature_channels(self):
        return self.cvt_stages[-1].embed_dim

    @property
    def total_stride(self):
        out = 1
        for s in self.cvt_stages:
            out *= s.stride
        return out

    @property
    def feature_height(self):
        return self.input_height // self.total_stride

    @property
    def feature_width(self):
        return self.input_width // self.total_stride

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def paper_scale(**overrides):
    cfg = ScaleConfig(
        name="paper",
        cvt_stages=[
            CvtStage(7, 4, 64, 1, 1),
            CvtStage(3, 2, 192, 2, 3),
            CvtStage(3, 2, 384, 10, 6),
        ],
        decoder_channels=[256, 128, 64],
        sdc_stem_channels=32,
        sdc_stages=[
            (1, 16, 1, 1),
            (6, 24, 2, 2),
            (6, 40, 2, 2),
            (6, 80, 2, 2),
            (6, 112, 1, 1),
        ],
        sdc_out_channels=192,
        fused_dim=64,
        control_hidden=64,
    )
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def toy_scale(**overrides):
    cfg = ScaleConfig(
        name="toy",
        cvt_stages=[
            CvtStage(7, 4, 8, 1, 1),
            CvtStage(3, 2, 24, 1, 3),
            CvtStage(3, 2, 48, 1, 6),
        ],
        decoder_channels=[16, 12, 8],
        sdc_stem_channels=8,
        sdc_stages=[
            (1, 4, 1, 1),
            (2, 6, 1, 2),
            (2, 10, 1, 2),
            (2, 14, 1, 2),
        ],
        sdc_out_channels=24,
        fused_dim=32,
        control_hidden=32,
    )
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


PRESETS = {"paper": paper_scale, "toy": toy_scale}


def get_preset(name, **overrides):
    try:
        return PRESETS[name](**overrides)
    except KeyError:
        raise ValueError(f"unknown scale preset {name!r}") from None
