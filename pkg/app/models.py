"""
Encoder-decoder network.
Contract:
- Post-norm transformer layers, sinusoidal positions
- Target embedding doubles as the output projection
- Decoder self-attention is causal, padded source keys are never attended
"""
import math
from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from app.schemas.corpus import BOS, EOS, PAD, RESERVED_TOKENS, UNK
from app.schemas.model import Activation, ModelConfig

PAD_ID = RESERVED_TOKENS.index(PAD)
UNK_ID = RESERVED_TOKENS.index(UNK)
BOS_ID = RESERVED_TOKENS.index(BOS)
EOS_ID = RESERVED_TOKENS.index(EOS)


@dataclass
class TokenDistribution:
    """Output distribution for the token at prefix position `position`."""
    probabilities: torch.Tensor
    position: int

    def is_valid(self, tolerance: float = 1e-6) -> bool:
        p = self.probabilities
        return bool((p >= 0).all()) and abs(float(p.sum()) - 1.0) <= tolerance


class PositionalEncoding(nn.Module):
    def __init__(self, d_model: int, max_positions: int):
        super().__init__()
        position = torch.arange(max_positions, dtype=torch.float64).unsqueeze(1)
        div_term = torch.exp(
            torch.arange(0, d_model, 2, dtype=torch.float64) * (-math.log(10000.0) / d_model)
        )
        pe = torch.zeros(max_positions, d_model, dtype=torch.float64)
        pe[:, 0::2] = torch.sin(position * div_term)
        pe[:, 1::2] = torch.cos(position * div_term[: d_model // 2])
        self.register_buffer("pe", pe.to(torch.get_default_dtype()))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.pe[: x.size(1)].to(x.dtype).unsqueeze(0)


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.head_dim = d_model // heads
        self.q_proj = nn.Linear(d_model, d_model)
        self.k_proj = nn.Linear(d_model, d_model)
        self.v_proj = nn.Linear(d_model, d_model)
        self.out_proj = nn.Linear(d_model, d_model)
        self.dropout = nn.Dropout(dropout)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        batch, length, _ = x.shape
        return x.view(batch, length, self.heads, self.head_dim).transpose(1, 2)

    def forward(self, query, key, value, blocked: Optional[torch.Tensor] = None) -> torch.Tensor:
        # blocked: bool, broadcastable to [batch, query_len, key_len], True = masked out
        q = self._split(self.q_proj(query))
        k = self._split(self.k_proj(key))
        v = self._split(self.v_proj(value))
        scores = torch.matmul(q, k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        if blocked is not None:
            scores = scores.masked_fill(blocked.unsqueeze(1), float("-inf"))
        weights = self.dropout(torch.softmax(scores, dim=-1))
        context = torch.matmul(weights, v).transpose(1, 2).contiguous()
        batch, length = context.shape[:2]
        return self.out_proj(context.view(batch, length, -1))


class FeedForward(nn.Module):
    def __init__(self, d_model: int, ffn_dim: int, dropout: float, activation: Activation):
        super().__init__()
        self.linear1 = nn.Linear(d_model, ffn_dim)
        self.linear2 = nn.Linear(ffn_dim, d_model)
        self.dropout = nn.Dropout(dropout)
        self.activation = F.gelu if activation == Activation.GELU else F.relu

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.linear2(self.dropout(self.activation(self.linear1(x))))


class EncoderLayer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(config.d_model, config.heads, config.dropout)
        self.feed_forward = FeedForward(config.d_model, config.ffn_dim, config.dropout, config.activation)
        self.norm1 = nn.LayerNorm(config.d_model)
        self.norm2 = nn.LayerNorm(config.d_model)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x, source_blocked):
        x = self.norm1(x + self.dropout(self.self_attn(x, x, x, source_blocked)))
        return self.norm2(x + self.dropout(self.feed_forward(x)))


class DecoderLayer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(config.d_model, config.heads, config.dropout)
        self.cross_attn = MultiHeadAttention(config.d_model, config.heads, config.dropout)
        self.feed_forward = FeedForward(config.d_model, config.ffn_dim, config.dropout, config.activation)
        self.norm1 = nn.LayerNorm(config.d_model)
        self.norm2 = nn.LayerNorm(config.d_model)
        self.norm3 = nn.LayerNorm(config.d_model)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, y, memory, causal_blocked, source_blocked):
        y = self.norm1(y + self.dropout(self.self_attn(y, y, y, causal_blocked)))
        y = self.norm2(y + self.dropout(self.cross_attn(y, memory, memory, source_blocked)))
        return self.norm3(y + self.dropout(self.feed_forward(y)))


class Seq2SeqTransformer(nn.Module):
    """Reduced transformer translation model; every shape comes from `config`."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.source_embedding = nn.Embedding(config.source_vocab_size, config.d_model)
        self.target_embedding = nn.Embedding(config.target_vocab_size, config.d_model)
        self.positions = PositionalEncoding(config.d_model, config.max_positions)
        self.encoder_layers = nn.ModuleList(EncoderLayer(config) for _ in range(config.layers))
        self.decoder_layers = nn.ModuleList(DecoderLayer(config) for _ in range(config.layers))
        self.dropout = nn.Dropout(config.dropout)
        self.scale = math.sqrt(config.d_model)

    @staticmethod
    def source_mask(source_ids: torch.Tensor) -> torch.Tensor:
        return (source_ids == PAD_ID).unsqueeze(1)

    def encode(self, source_ids: torch.Tensor) -> torch.Tensor:
        blocked = self.source_mask(source_ids)
        x = self.dropout(self.positions(self.source_embedding(source_ids) * self.scale))
        for layer in self.encoder_layers:
            x = layer(x, blocked)
        return x

    def decode(self, target_ids: torch.Tensor, memory: torch.Tensor,
               source_blocked: torch.Tensor) -> torch.Tensor:
        """Logits for every target position."""
        length = target_ids.size(1)
        causal = torch.triu(
            torch.ones(length, length, dtype=torch.bool, device=target_ids.device), diagonal=1
        ).unsqueeze(0)
        y = self.dropout(self.positions(self.target_embedding(target_ids) * self.scale))
        for layer in self.decoder_layers:
            y = layer(y, memory, causal, source_blocked)
        return torch.matmul(y, self.target_embedding.weight.t())

    def forward(self, source_ids: torch.Tensor, target_ids: torch.Tensor) -> torch.Tensor:
        memory = self.encode(source_ids)
        return self.decode(target_ids, memory, self.source_mask(source_ids))
