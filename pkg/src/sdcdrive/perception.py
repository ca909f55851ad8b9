"""Perception networks: convolutional-transformer RGB encoder, segmentation
decoder, inverted-residual BEV grid encoder, and the auxiliary traffic-light /
stop-sign / speed heads.

At paper scale the RGB encoder maps 3x160x768 to 384x10x48, the grid encoder
maps 23x160x768 to 192x10x48, and the segmentation decoder emits 23x160x768
independent per-class probabilities.
"""

import math

import torch
from torch import nn
import torch.nn.functional as F

from .config import ScaleConfig


class ConvTokenEmbedding(nn.Module):
    """Strided convolution followed by layer normalization over channels."""

    def __init__(self, in_ch, stage):
        super().__init__()
        self.proj = nn.Conv2d(in_ch, stage.embed_dim, kernel_size=stage.patch_size,
                              stride=stage.stride, padding=stage.patch_size // 2)
        self.norm = nn.LayerNorm(stage.embed_dim)

    def forward(self, x):
        x = self.proj(x)
        b, c, h, w = x.shape
        x = self.norm(x.flatten(2).transpose(1, 2)).transpose(1, 2).reshape(b, c, h, w)
        return x


class ConvProjection(nn.Module):
    """Depth-wise separable convolution producing one attention embedding."""

    def __init__(self, dim, stride):
        super().__init__()
        self.depthwise = nn.Conv2d(dim, dim, 3, stride=stride, padding=1,
                                   groups=dim, bias=False)
        self.bn = nn.BatchNorm2d(dim)
        self.pointwise = nn.Conv2d(dim, dim, 1)

    def forward(self, x):
        return self.pointwise(self.bn(self.depthwise(x)))


class ConvTransformerBlock(nn.Module):
    """Attention with convolutional Q/K/V projections plus an MLP, both residual."""

    def __init__(self, stage):
        super().__init__()
        dim, heads = stage.embed_dim, stage.heads
        self.heads = heads
        self.head_dim = dim // heads
        self.norm1 = nn.LayerNorm(dim)
        self.q_proj = ConvProjection(dim, 1)
        self.k_proj = ConvProjection(dim, stage.kv_stride)
        self.v_proj = ConvProjection(dim, stage.kv_stride)
        self.out_proj = nn.Linear(dim, dim)
        self.norm2 = nn.LayerNorm(dim)
        hidden = int(dim * stage.mlp_ratio)
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.GELU(),
                                 nn.Linear(hidden, dim))

    def _split_heads(self, x):
        # b,c,h,w -> b,heads,tokens,head_dim
        b, c, h, w = x.shape
        return x.flatten(2).reshape(b, self.heads, self.head_dim, h * w).transpose(2, 3)

    def attention_probs(self, x):
        """Softmax attention matrix for a normalized input; testing probe."""
        q = self._split_heads(self.q_proj(x))
        k = self._split_heads(self.k_proj(x))
        return torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(self.head_dim), dim=-1)

    def forward(self, x):
        b, c, h, w = x.shape
        y = self.norm1(x.flatten(2).transpose(1, 2)).transpose(1, 2).reshape(b, c, h, w)
        q = self._split_heads(self.q_proj(y))
        k = self._split_heads(self.k_proj(y))
        v = self._split_heads(self.v_proj(y))
        attn = torch.softmax(q @ k.transpose(-2, -1) / math.sqrt(self.head_dim), dim=-1)
        y = (attn @ v).transpose(2, 3).reshape(b, c, h * w).transpose(1, 2)
        x = x + self.out_proj(y).transpose(1, 2).reshape(b, c, h, w)
        y = self.norm2(x.flatten(2).transpose(1, 2))
        x = x + self.mlp(y).transpose(1, 2).reshape(b, c, h, w)
        return x


class CvtEncoder(nn.Module):
    """Three-stage convolutional-transformer encoder; the classification head
    of the reference architecture is omitted, the spatial feature map is the
    output.  Per-stage outputs are kept as skip connections."""

    def __init__(self, config: ScaleConfig, in_channels=3):
        super().__init__()
        self.config = config
        stages = []
        in_ch = in_channels
        for stage_cfg in config.cvt_stages:
            stages.append(nn.ModuleDict({
                "embed": ConvTokenEmbedding(in_ch, stage_cfg),
                "blocks": nn.ModuleList(
                    [ConvTransformerBlock(stage_cfg) for _ in range(stage_cfg.depth)]
                ),
            }))
            in_ch = stage_cfg.embed_dim
        self.stages = nn.ModuleList(stages)
        self.out_channels = in_ch

    def forward(self, x):
        if x.shape[-2] % self.config.total_stride or x.shape[-1] % self.config.total_stride:
            raise ValueError(
                f"input spatial dims {tuple(x.shape[-2:])} not divisible by "
                f"total stride {self.config.total_stride}"
            )
        skips = []
        for stage in self.stages:
            x = stage["embed"](x)
            for block in stage["blocks"]:
                x = block(x)
            skips.append(x)
        return x, skips


class SegmentationDecoder(nn.Module):
    """Three upsampling convolutions with skip concatenation, then a pointwise
    convolution with sigmoid over the class channels."""

    def __init__(self, config: ScaleConfig):
        super().__init__()
        dims = [s.embed_dim for s in config.cvt_stages]
        ch = config.decoder_channels
        self.conv1 = nn.Conv2d(dims[2] + dims[1], ch[0], 3, padding=1)
        self.conv2 = nn.Conv2d(ch[0] + dims[0], ch[1], 3, padding=1)
        self.conv3 = nn.Conv2d(ch[1], ch[2], 3, padding=1)
        self.head = nn.Conv2d(ch[2], config.n_classes, 1)
        self.final_scale = config.cvt_stages[0].stride

    def forward(self, features, skips):
        if skips[1].shape[-1] != 2 * features.shape[-1]:
            raise ValueError("skip resolutions do not match decoder topology")
        x = F.interpolate(features, scale_factor=2, mode="nearest")
        x = F.relu(self.conv1(torch.cat([x, skips[1]], dim=1)))
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        x = F.relu(self.conv2(torch.cat([x, skips[0]], dim=1)))
        x = F.interpolate(x, scale_factor=self.final_scale, mode="nearest")
        x = F.relu(self.conv3(x))
        return torch.sigmoid(self.head(x))


class SqueezeExcite(nn.Module):
    def __init__(self, ch, reduced):
        super().__init__()
        self.fc1 = nn.Conv2d(ch, reduced, 1)
        self.fc2 = nn.Conv2d(reduced, ch, 1)

    def forward(self, x):
        s = F.adaptive_avg_pool2d(x, 1)
        s = torch.sigmoid(self.fc2(F.silu(self.fc1(s))))
        return x * s


class MBConv(nn.Module):
    """Inverted-residual block: expand, depthwise, squeeze-excite, project."""

    def __init__(self, in_ch, out_ch, expand, stride):
        super().__init__()
        mid = in_ch * expand
        layers = []
        if expand != 1:
            layers += [nn.Conv2d(in_ch, mid, 1, bias=False),
                       nn.BatchNorm2d(mid), nn.SiLU()]
        layers += [
            nn.Conv2d(mid, mid, 3, stride=stride, padding=1, groups=mid, bias=False),
            nn.BatchNorm2d(mid), nn.SiLU(),
            SqueezeExcite(mid, max(1, in_ch // 4)),
            nn.Conv2d(mid, out_ch, 1, bias=False),
            nn.BatchNorm2d(out_ch),
        ]
        self.block = nn.Sequential(*layers)
        self.use_residual = stride == 1 and in_ch == out_ch

    def forward(self, x):
        y = self.block(x)
        return x + y if self.use_residual else y


class GridEncoder(nn.Module):
    """Inverted-residual CNN over the BEV grid (or RGB when substituting for
    the transformer encoder); downsamples 16x in each spatial dimension."""

    def __init__(self, config: ScaleConfig, in_channels, out_channels):
        super().__init__()
        stem_ch = config.sdc_stem_channels
        self.stem = nn.Sequential(
            nn.Conv2d(in_channels, stem_ch, 3, stride=2, padding=1, bias=False),
            nn.BatchNorm2d(stem_ch), nn.SiLU(),
        )
        blocks = []
        ch = stem_ch
        for expand, out_ch, repeats, stride in config.sdc_stages:
            for i in range(repeats):
                blocks.append(MBConv(ch, out_ch, expand, stride if i == 0 else 1))
                ch = out_ch
        self.blocks = nn.Sequential(*blocks)
        self.head = nn.Sequential(
            nn.Conv2d(ch, out_channels, 1, bias=False),
            nn.BatchNorm2d(out_channels), nn.SiLU(),
        )

    def forward(self, x):
        return self.head(self.blocks(self.stem(x)))


class ScalarHead(nn.Module):
    """Global pooling plus a small MLP to one scalar."""

    def __init__(self, in_ch, activation, hidden=None):
        super().__init__()
        self.pool = nn.AdaptiveAvgPool2d(1)
        if hidden:
            self.net = nn.Sequential(nn.Linear(in_ch, hidden), nn.ReLU(),
                                     nn.Linear(hidden, 1))
        else:
            self.net = nn.Linear(in_ch, 1)
        self.activation = activation

    def forward(self, features):
        x = self.pool(features).flatten(1)
        return self.activation(self.net(x)).squeeze(-1)


class PerceptionModule(nn.Module):
    """RGB encoder + segmentation decoder + BEV grid encoder + scalar heads.

    With ``config.no_cvt`` the transformer RGB encoder is replaced by the
    inverted-residual CNN architecture (same output shape, no skip-based
    segmentation decoder refinement at transformer resolutions)."""

    def __init__(self, config: ScaleConfig):
        super().__init__()
        self.config = config
        rgb_ch = config.rgb_feature_channels
        if config.no_cvt:
            self.rgb_encoder = GridEncoder(config, 3, rgb_ch)
            self.seg_decoder = SimpleSegDecoder(config, rgb_ch)
        else:
            self.rgb_encoder = CvtEncoder(config, in_channels=3)
            self.seg_decoder = SegmentationDecoder(config)
        self.sdc_encoder = GridEncoder(config, config.n_classes,
                                       config.sdc_out_channels)
        self.traffic_light_head = ScalarHead(rgb_ch, torch.sigmoid)
        self.stop_sign_head = ScalarHead(rgb_ch, torch.sigmoid)
        self.speed_head = ScalarHead(rgb_ch, F.softplus, hidden=config.control_hidden)

    def encode_rgb(self, rgb):
        if self.config.no_cvt:
            feats = self.rgb_encoder(rgb)
            return feats, [feats]
        return self.rgb_encoder(rgb)

    def forward(self, rgb, sdc):
        rgb_features, skips = self.encode_rgb(rgb)
        return {
            "rgb_features": rgb_features,
            "seg": self.seg_decoder(rgb_features, skips),
            "sdc_features": self.sdc_encoder(sdc),
            "traffic_light": self.traffic_light_head(rgb_features),
            "stop_sign": self.stop_sign_head(rgb_features),
            "speed": self.speed_head(rgb_features),
        }


class SimpleSegDecoder(nn.Module):
    """Skip-free decoder used with the CNN RGB encoder: three upsampling
    convolutions then the pointwise sigmoid head."""

    def __init__(self, config: ScaleConfig, in_ch):
        super().__init__()
        ch = config.decoder_channels
        self.conv1 = nn.Conv2d(in_ch, ch[0], 3, padding=1)
        self.conv2 = nn.Conv2d(ch[0], ch[1], 3, padding=1)
        self.conv3 = nn.Conv2d(ch[1], ch[2], 3, padding=1)
        self.head = nn.Conv2d(ch[2], config.n_classes, 1)

    def forward(self, features, skips):
        x = F.interpolate(features, scale_factor=2, mode="nearest")
        x = F.relu(self.conv1(x))
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        x = F.relu(self.conv2(x))
        x = F.interpolate(x, scale_factor=4, mode="nearest")
        x = F.relu(self.conv3(x))
        return torch.sigmoid(self.head(x))
