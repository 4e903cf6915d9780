"""Set-prediction network for unbounded crop recommendation.

A small strided CNN turns the framed view into a token grid, a transformer
encoder contextualizes it, a feature-extrapolation stack predicts tokens
for a ring of cells outside the frame from the visible ones, and a
conditional decoder regresses candidate crops (which may leave the frame)
plus confidences from a fixed set of learnable anchors.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import torch
import torch.nn as nn

from viewscout.boxes import Box


@dataclass
class ModelConfig:
    d_model: int = 128
    nhead: int = 4
    enc_layers: int = 4
    dec_layers: int = 4
    fem_blocks: int = 6
    ffn_dim: int = 256
    num_queries: int = 16
    stride: int = 16
    input_short: int = 96    # short side of the resized view
    input_long: int = 128    # long side
    margin: int = -1         # cells extrapolated per side; -1 = auto

    def __post_init__(self):
        if self.input_short % self.stride or self.input_long % self.stride:
            raise ValueError("input sides must be divisible by the stride")
        if self.margin < 0:
            g_min = min(self.input_short, self.input_long) // self.stride
            self.margin = math.ceil(0.25 * g_min)

    def input_size(self, orientation) -> tuple[int, int]:
        """(H, W) of the model input for an orientation."""
        from viewscout.boxes import Orientation

        if Orientation(orientation) is Orientation.LANDSCAPE:
            return self.input_short, self.input_long
        return self.input_long, self.input_short

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TokenGrid:
    """Grid of latent tokens with per-cell frame coordinates.

    ``coords[r, c]`` is the (x, y) cell center in init-view-normalized
    units; cells in the extrapolated ring fall outside [0, 1]. ``visible``
    is True for cells backed by actual image content.
    """

    tokens: torch.Tensor            # (B, R, C, D)
    coords: torch.Tensor            # (R, C, 2)
    visible: torch.Tensor           # (R, C) bool
    margin: int = 0

    @property
    def rows(self) -> int:
        return self.tokens.shape[1]

    @property
    def cols(self) -> int:
        return self.tokens.shape[2]

    def flat_tokens(self) -> torch.Tensor:
        b, r, c, d = self.tokens.shape
        return self.tokens.reshape(b, r * c, d)

    def flat_coords(self) -> torch.Tensor:
        return self.coords.reshape(-1, 2)


@dataclass
class PredictionSet:
    """n candidate crops with confidences, in the init-view frame."""

    boxes: torch.Tensor         # (B, n, 4) center form, unbounded
    confidences: torch.Tensor   # (B, n) in [0, 1]

    def top_crop(self, index: int = 0) -> Box:
        """Highest-confidence crop of batch element ``index``."""
        i = int(self.confidences[index].argmax())
        return Box(*(float(v) for v in self.boxes[index, i]))

    def ranked_boxes(self, index: int = 0) -> list[Box]:
        order = torch.argsort(self.confidences[index], descending=True)
        return [Box(*(float(v) for v in self.boxes[index, i])) for i in order]


def grid_coords(rows: int, cols: int, margin: int,
                dtype=torch.float32) -> torch.Tensor:
    """Cell-center coordinates for a grid extrapolated by ``margin``.

    The visible region (rows - 2*margin) x (cols - 2*margin) spans [0, 1];
    ring cells continue the same affine spacing outside it.
    """
    vis_rows = rows - 2 * margin
    vis_cols = cols - 2 * margin
    ys = (torch.arange(rows, dtype=dtype) - margin + 0.5) / vis_rows
    xs = (torch.arange(cols, dtype=dtype) - margin + 0.5) / vis_cols
    return torch.stack(torch.meshgrid(xs, ys, indexing="xy"), dim=-1)  # (R, C, 2)


def sine_embed(coords: torch.Tensor, d_model: int) -> torch.Tensor:
    """Sinusoidal embedding of continuous (x, y) coords; handles values
    outside [0, 1] naturally."""
    half = d_model // 2
    dim_t = torch.arange(half, dtype=coords.dtype, device=coords.device)
    dim_t = 10000.0 ** (2 * (dim_t // 2) / half)
    out = []
    for axis in range(2):
        pos = coords[..., axis] * 2 * math.pi
        pos = pos[..., None] / dim_t
        pos = torch.stack((pos[..., 0::2].sin(), pos[..., 1::2].cos()), dim=-1).flatten(-2)
        out.append(pos)
    return torch.cat(out, dim=-1)


def extended_sigmoid_boxes(t: torch.Tensor) -> torch.Tensor:
    """Map raw head outputs to center form with x, y in (-0.5, 1.5) and
    w, h in (0, 2), covering the unbounded ground-truth range with slack."""
    xy = 2 * torch.sigmoid(t[..., :2]) - 0.5
    wh = 2 * torch.sigmoid(t[..., 2:])
    return torch.cat([xy, wh], dim=-1)


class ConvBackbone(nn.Module):
    """Four strided conv blocks, overall stride 16."""

    def __init__(self, d_model: int):
        super().__init__()
        chans = [3, 32, 64, 128, d_model]
        blocks = []
        for cin, cout in zip(chans[:-1], chans[1:]):
            blocks += [
                nn.Conv2d(cin, cout, 3, stride=2, padding=1),
                nn.GroupNorm(8, cout),
                nn.ReLU(inplace=True),
            ]
        self.body = nn.Sequential(*blocks)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.body(images)  # (B, D, H/16, W/16)


class SelfAttnLayer(nn.Module):
    """Post-norm transformer layer; positions are added to queries and keys."""

    def __init__(self, d_model: int, nhead: int, ffn_dim: int):
        super().__init__()
        self.attn = nn.MultiheadAttention(d_model, nhead, batch_first=True)
        self.norm1 = nn.LayerNorm(d_model)
        self.ffn = nn.Sequential(
            nn.Linear(d_model, ffn_dim), nn.ReLU(inplace=True), nn.Linear(ffn_dim, d_model)
        )
        self.norm2 = nn.LayerNorm(d_model)

    def forward(self, src: torch.Tensor, pos: torch.Tensor) -> torch.Tensor:
        q = k = src + pos
        out, _ = self.attn(q, k, src, need_weights=False)
        src = self.norm1(src + out)
        src = self.norm2(src + self.ffn(src))
        return src


class FemBlock(nn.Module):
    """One extrapolation block: ring tokens self-attend, then cross-attend
    into the visible tokens. Visible tokens pass through unchanged."""

    def __init__(self, d_model: int, nhead: int, ffn_dim: int):
        super().__init__()
        self.self_attn = nn.MultiheadAttention(d_model, nhead, batch_first=True)
        self.norm1 = nn.LayerNorm(d_model)
        self.cross_attn = nn.MultiheadAttention(d_model, nhead, batch_first=True)
        self.norm2 = nn.LayerNorm(d_model)
        self.ffn = nn.Sequential(
            nn.Linear(d_model, ffn_dim), nn.ReLU(inplace=True), nn.Linear(ffn_dim, d_model)
        )
        self.norm3 = nn.LayerNorm(d_model)

    def forward(self, pad, pad_pos, vis, vis_pos):
        q = k = pad + pad_pos
        out, _ = self.self_attn(q, k, pad, need_weights=False)
        pad = self.norm1(pad + out)
        out, _ = self.cross_attn(pad + pad_pos, vis + vis_pos, vis, need_weights=False)
        pad = self.norm2(pad + out)
        pad = self.norm3(pad + self.ffn(pad))
        return pad


class ConditionalCrossAttention(nn.Module):
    """Cross-attention with per-head concatenated content and spatial parts.

    Attention logits are the sum of a content dot product and a spatial dot
    product computed from sinusoidal embeddings of query reference points
    and key coordinates.
    """

    def __init__(self, d_model: int, nhead: int):
        super().__init__()
        self.nhead = nhead
        self.head_dim = d_model // nhead
        self.q_content = nn.Linear(d_model, d_model)
        self.q_spatial = nn.Linear(d_model, d_model)
        self.k_content = nn.Linear(d_model, d_model)
        self.k_spatial = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model)

    def forward(self, content, query_pos_embed, tokens, key_pos_embed):
        b, n, d = content.shape
        m = tokens.shape[1]
        h, hd = self.nhead, self.head_dim

        qc = self.q_content(content).view(b, n, h, hd)
        qs = self.q_spatial(query_pos_embed).view(b, n, h, hd)
        kc = self.k_content(tokens).view(b, m, h, hd)
        ks = self.k_spatial(key_pos_embed).view(b, m, h, hd)
        logits = (
            torch.einsum("bnhd,bmhd->bhnm", qc, kc)
            + torch.einsum("bnhd,bmhd->bhnm", qs, ks)
        ) / math.sqrt(2 * hd)
        attn = logits.softmax(dim=-1)
        v = self.v_proj(tokens).view(b, m, h, hd)
        out = torch.einsum("bhnm,bmhd->bnhd", attn, v).reshape(b, n, d)
        return self.out_proj(out)


class DecoderLayer(nn.Module):
    def __init__(self, d_model: int, nhead: int, ffn_dim: int):
        super().__init__()
        self.self_attn = nn.MultiheadAttention(d_model, nhead, batch_first=True)
        self.norm1 = nn.LayerNorm(d_model)
        self.cross_attn = ConditionalCrossAttention(d_model, nhead)
        self.norm2 = nn.LayerNorm(d_model)
        self.ffn = nn.Sequential(
            nn.Linear(d_model, ffn_dim), nn.ReLU(inplace=True), nn.Linear(ffn_dim, d_model)
        )
        self.norm3 = nn.LayerNorm(d_model)

    def forward(self, content, anchor_embed, ref_embed, tokens, key_pos_embed):
        q = k = content + anchor_embed
        out, _ = self.self_attn(q, k, content, need_weights=False)
        content = self.norm1(content + out)
        out = self.cross_attn(content, ref_embed, tokens, key_pos_embed)
        content = self.norm2(content + out)
        content = self.norm3(content + self.ffn(content))
        return content


class MLP(nn.Module):
    def __init__(self, d_in: int, d_hidden: int, d_out: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(d_in, d_hidden), nn.ReLU(inplace=True), nn.Linear(d_hidden, d_out)
        )

    def forward(self, x):
        return self.net(x)


class CompositionNet(nn.Module):
    """image -> n candidate crops with confidences."""

    def __init__(self, config: ModelConfig | None = None):
        super().__init__()
        self.config = config or ModelConfig()
        cfg = self.config
        d = cfg.d_model

        self.backbone = ConvBackbone(d)
        self.encoder = nn.ModuleList(
            SelfAttnLayer(d, cfg.nhead, cfg.ffn_dim) for _ in range(cfg.enc_layers)
        )
        self.mask_token = nn.Parameter(torch.zeros(d))
        self.fem = nn.ModuleList(
            FemBlock(d, cfg.nhead, cfg.ffn_dim) for _ in range(cfg.fem_blocks)
        )
        self.anchors = nn.Embedding(cfg.num_queries, d)
        self.ref_head = nn.Linear(d, 2)
        self.ref_embed_proj = nn.Linear(d, d)
        self.decoder = nn.ModuleList(
            DecoderLayer(d, cfg.nhead, cfg.ffn_dim) for _ in range(cfg.dec_layers)
        )
        self.dec_norm = nn.LayerNorm(d)
        self.box_head = MLP(d, d, 4)
        self.conf_head = nn.Linear(d, 1)

        self._reset_parameters()

    def _reset_parameters(self):
        for name, p in self.named_parameters():
            if p.dim() > 1 and "backbone" not in name:
                nn.init.xavier_uniform_(p)
        nn.init.normal_(self.mask_token, std=0.02)

    # ---- stages -----------------------------------------------------------

    def encode(self, images: torch.Tensor) -> TokenGrid:
        """Backbone + encoder: framed view to an all-visible token grid."""
        if images.dim() != 4 or images.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W) input, got {tuple(images.shape)}")
        if images.shape[2] % self.config.stride or images.shape[3] % self.config.stride:
            raise ValueError("input size must be divisible by the backbone stride")
        feats = self.backbone(images)                      # (B, D, R, C)
        b, d, r, c = feats.shape
        tokens = feats.flatten(2).transpose(1, 2)          # (B, R*C, D)
        coords = grid_coords(r, c, margin=0, dtype=tokens.dtype).to(tokens.device)
        pos = sine_embed(coords.reshape(-1, 2), d)[None]   # (1, R*C, D)
        for layer in self.encoder:
            tokens = layer(tokens, pos)
        return TokenGrid(
            tokens=tokens.reshape(b, r, c, d),
            coords=coords,
            visible=torch.ones(r, c, dtype=torch.bool, device=tokens.device),
            margin=0,
        )

    def extrapolate(self, grid: TokenGrid, margin: int) -> TokenGrid:
        """Extend the grid by ``margin`` cells per side, filling the ring by
        attending to the visible tokens. ``margin=0`` is the identity."""
        if margin < 0:
            raise ValueError("margin must be non-negative")
        if margin == 0:
            return grid
        if grid.margin != 0 or not bool(grid.visible.all()):
            raise ValueError("extrapolate expects an all-visible grid")
        b, r, c, d = grid.tokens.shape
        er, ec = r + 2 * margin, c + 2 * margin
        coords = grid_coords(er, ec, margin, dtype=grid.tokens.dtype).to(grid.tokens.device)
        visible = torch.zeros(er, ec, dtype=torch.bool, device=grid.tokens.device)
        visible[margin:margin + r, margin:margin + c] = True

        flat_vis = visible.reshape(-1)
        pad_coords = coords.reshape(-1, 2)[~flat_vis]
        vis_coords = grid.coords.reshape(-1, 2)
        pad_pos = sine_embed(pad_coords, d)[None]
        vis_pos = sine_embed(vis_coords, d)[None]
        pad = self.mask_token.expand(b, pad_coords.shape[0], d) + pad_pos
        vis = grid.flat_tokens()
        for block in self.fem:
            pad = block(pad, pad_pos, vis, vis_pos)

        tokens = torch.empty(b, er * ec, d, dtype=grid.tokens.dtype, device=grid.tokens.device)
        tokens[:, flat_vis] = vis
        tokens[:, ~flat_vis] = pad
        return TokenGrid(tokens.reshape(b, er, ec, d), coords, visible, margin)

    def decode(self, grid: TokenGrid) -> PredictionSet:
        """Anchors attend to all tokens (visible and extrapolated) and are
        mapped to boxes and confidences."""
        b = grid.tokens.shape[0]
        d = self.config.d_model
        tokens = grid.flat_tokens()
        key_pos = sine_embed(grid.flat_coords(), d)[None].expand(b, -1, -1)

        anchor = self.anchors.weight[None].expand(b, -1, -1)          # (B, n, D)
        refs = 2 * torch.sigmoid(self.ref_head(anchor)) - 0.5          # (B, n, 2)
        ref_embed = self.ref_embed_proj(sine_embed(refs, d))
        content = anchor  # queries start as the anchors themselves
        for layer in self.decoder:
            content = layer(content, anchor, ref_embed, tokens, key_pos)
        content = self.dec_norm(content)
        boxes = extended_sigmoid_boxes(self.box_head(content))
        conf = torch.sigmoid(self.conf_head(content)).squeeze(-1)
        return PredictionSet(boxes=boxes, confidences=conf)

    def forward(self, images: torch.Tensor) -> tuple[PredictionSet, TokenGrid]:
        grid = self.encode(images)
        grid = self.extrapolate(grid, self.config.margin)
        return self.decode(grid), grid

    @torch.no_grad()
    def predict(self, images: torch.Tensor) -> PredictionSet:
        was_training = self.training
        self.eval()
        try:
            preds, _ = self.forward(images)
        finally:
            self.train(was_training)
        return preds
