"""Encoder-decoder model over marked text and slotted tables.

One bidirectional encoder serves both the marked text and the prompts; one
decoder stack serves both the event-oriented context representation (full
self-attention, no cross-attention) and table decoding (structure-masked
self-attention plus cross-attention over the encoder output). Blocks follow
the standard post-LayerNorm masked-LM layout so that a pretrained backbone
can be split into the encoder and the decoder's self-attention/feed-forward
weights, with cross-attention newly initialized.

All forwards operate on single unbatched sequences ``[length x d]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .masking import StructureMask
from .schema import SchemaRegistry
from .spans import SpanSelectorHead


@dataclass
class ModelConfig:
    vocab_size: int
    hidden_size: int = 64
    num_heads: int = 4
    encoder_layers: int = 2
    decoder_layers: int = 2
    ffn_size: int = 128
    max_positions: int = 520
    dropout: float = 0.1
    layer_norm_eps: float = 1e-5
    pad_token_id: int = 0
    # "fresh": table positions get position embeddings restarting at 0;
    # "none": the table keeps only the positions baked into its source encodings.
    table_positions: str = "fresh"

    @classmethod
    def desk(cls, vocab_size, **overrides) -> "ModelConfig":
        return cls(vocab_size=vocab_size, **overrides)

    @classmethod
    def paper(cls, vocab_size, **overrides) -> "ModelConfig":
        base = dict(
            hidden_size=1024, num_heads=16, encoder_layers=17, decoder_layers=7,
            ffn_size=4096, max_positions=514, pad_token_id=1,
        )
        base.update(overrides)
        return cls(vocab_size=vocab_size, **base)


def additive_mask(allowed, dtype=torch.float32) -> torch.Tensor:
    """Boolean permission matrix -> additive attention mask (0 / -inf)."""
    allowed_t = torch.as_tensor(np.asarray(allowed), dtype=torch.bool)
    mask = torch.zeros(allowed_t.shape, dtype=dtype)
    return mask.masked_fill(~allowed_t, float("-inf"))


class MultiHeadAttention(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        if cfg.hidden_size % cfg.num_heads != 0:
            raise ValueError("hidden_size must be divisible by num_heads")
        self.num_heads = cfg.num_heads
        self.head_dim = cfg.hidden_size // cfg.num_heads
        self.query = nn.Linear(cfg.hidden_size, cfg.hidden_size)
        self.key = nn.Linear(cfg.hidden_size, cfg.hidden_size)
        self.value = nn.Linear(cfg.hidden_size, cfg.hidden_size)
        self.out = nn.Linear(cfg.hidden_size, cfg.hidden_size)
        self.dropout = nn.Dropout(cfg.dropout)

    def _split(self, x):
        length = x.shape[0]
        return x.view(length, self.num_heads, self.head_dim).transpose(0, 1)

    def forward(self, query, keyval, mask=None):
        q = self._split(self.query(query))
        k = self._split(self.key(keyval))
        v = self._split(self.value(keyval))
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        if mask is not None:
            scores = scores + mask
        probs = self.dropout(torch.softmax(scores, dim=-1))
        ctx = (probs @ v).transpose(0, 1).reshape(query.shape[0], -1)
        return self.out(ctx)


class TransformerBlock(nn.Module):
    def __init__(self, cfg: ModelConfig, cross_attention=False):
        super().__init__()
        self.attn = MultiHeadAttention(cfg)
        self.attn_norm = nn.LayerNorm(cfg.hidden_size, eps=cfg.layer_norm_eps)
        self.cross = MultiHeadAttention(cfg) if cross_attention else None
        self.cross_norm = (nn.LayerNorm(cfg.hidden_size, eps=cfg.layer_norm_eps)
                           if cross_attention else None)
        self.fc1 = nn.Linear(cfg.hidden_size, cfg.ffn_size)
        self.fc2 = nn.Linear(cfg.ffn_size, cfg.hidden_size)
        self.ffn_norm = nn.LayerNorm(cfg.hidden_size, eps=cfg.layer_norm_eps)
        self.dropout = nn.Dropout(cfg.dropout)

    def forward(self, x, self_mask=None, memory=None):
        x = self.attn_norm(x + self.dropout(self.attn(x, x, self_mask)))
        if memory is not None:
            if self.cross is None:
                raise ValueError("block has no cross-attention")
            x = self.cross_norm(x + self.dropout(self.cross(x, memory)))
        x = self.ffn_norm(x + self.dropout(self.fc2(torch.nn.functional.gelu(self.fc1(x)))))
        return x


class TokenEmbedding(nn.Module):
    """Word + learned position (+ segment) embeddings with LayerNorm.

    Position ids start at ``pad_token_id + 1``, matching the convention of the
    pretrained backbones this model can host.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.pad_token_id = cfg.pad_token_id
        self.word_embeddings = nn.Embedding(cfg.vocab_size, cfg.hidden_size,
                                            padding_idx=cfg.pad_token_id)
        self.position_embeddings = nn.Embedding(cfg.max_positions, cfg.hidden_size)
        self.token_type_embeddings = nn.Embedding(2, cfg.hidden_size)
        self.norm = nn.LayerNorm(cfg.hidden_size, eps=cfg.layer_norm_eps)
        self.dropout = nn.Dropout(cfg.dropout)

    def _position_ids(self, length: int) -> torch.Tensor:
        start = self.pad_token_id + 1
        if start + length > self.position_embeddings.num_embeddings:
            raise ValueError(
                f"sequence of {length} tokens exceeds the position table "
                f"({self.position_embeddings.num_embeddings})"
            )
        return torch.arange(start, start + length)

    def forward(self, token_ids: torch.Tensor) -> torch.Tensor:
        pos = self._position_ids(token_ids.shape[0])
        x = (self.word_embeddings(token_ids)
             + self.position_embeddings(pos)
             + self.token_type_embeddings(torch.zeros_like(token_ids)))
        return self.dropout(self.norm(x))

    def position_vectors(self, length: int) -> torch.Tensor:
        return self.position_embeddings(self._position_ids(length))


class TextTableModel(nn.Module):
    """Shared encoder/decoder stacks plus the span-selector head."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.config = cfg
        self.embeddings = TokenEmbedding(cfg)
        self.encoder = nn.ModuleList(
            TransformerBlock(cfg) for _ in range(cfg.encoder_layers))
        self.decoder = nn.ModuleList(
            TransformerBlock(cfg, cross_attention=True) for _ in range(cfg.decoder_layers))
        self.span_head = SpanSelectorHead(cfg.hidden_size)
        self.apply(self._init_weights)

    @staticmethod
    def _init_weights(module):
        if isinstance(module, nn.Linear):
            module.weight.data.normal_(mean=0.0, std=0.02)
            if module.bias is not None:
                module.bias.data.zero_()
        elif isinstance(module, nn.Embedding):
            module.weight.data.normal_(mean=0.0, std=0.02)
            if module.padding_idx is not None:
                module.weight.data[module.padding_idx].zero_()

    def _as_ids(self, token_ids) -> torch.Tensor:
        ids = torch.as_tensor(token_ids, dtype=torch.long)
        if ids.dim() != 1:
            raise ValueError("expected a single unbatched id sequence")
        return ids

    def token_embedding_lookup(self, token_ids) -> torch.Tensor:
        """Raw word-embedding rows, used by the table-initialization ablation."""
        return self.embeddings.word_embeddings(self._as_ids(token_ids))

    def encode(self, token_ids) -> torch.Tensor:
        ids = self._as_ids(token_ids)
        if ids.max().item() >= self.config.vocab_size:
            raise ValueError("token id outside the vocabulary")
        x = self.embeddings(ids)
        for block in self.encoder:
            x = block(x)
        return x

    def contextualize(self, encoding: torch.Tensor) -> torch.Tensor:
        """Decoder pass with full self-attention and no cross-attention."""
        x = encoding
        for block in self.decoder:
            x = block(x, self_mask=None, memory=None)
        return x

    def decode_table(self, table_embedding: torch.Tensor, mask: StructureMask | None,
                     memory: torch.Tensor) -> torch.Tensor:
        """Decoder pass over the table with masked self-attention and
        cross-attention over all text positions."""
        x = table_embedding
        if mask is not None and len(mask) != x.shape[0]:
            raise ValueError(
                f"mask size {len(mask)} does not match table length {x.shape[0]}"
            )
        if self.config.table_positions == "fresh":
            x = x + self.embeddings.position_vectors(x.shape[0])
        self_mask = None
        if mask is not None:
            self_mask = additive_mask(mask.allowed, dtype=x.dtype)
        for block in self.decoder:
            x = block(x, self_mask=self_mask, memory=memory)
        return x

    def cross_attention_parameters(self):
        """Parameters of the newly initialized cross-attention sublayers."""
        for block in self.decoder:
            yield from block.cross.parameters()
            yield from block.cross_norm.parameters()


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path, model: TextTableModel, tokenizer, registry: SchemaRegistry,
                    extra: dict | None = None) -> None:
    state = model.state_dict()
    torch.save({
        "format_version": 1,
        "model_config": asdict(model.config),
        "tokenizer": tokenizer.to_config(),
        "registry": registry.to_records(),
        "state_dict": state,
        "shape_manifest": {k: list(v.shape) for k, v in state.items()},
        "extra": extra or {},
    }, path)


def load_checkpoint(path):
    """Rebuild (model, tokenizer, registry, extra) from a checkpoint file.

    Every tensor is validated against the stored shape manifest before the
    weights are loaded.
    """
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format_version") != 1:
        raise ValueError(f"{path}: unsupported checkpoint format")
    model = TextTableModel(ModelConfig(**payload["model_config"]))
    manifest = payload["shape_manifest"]
    current = model.state_dict()
    if set(manifest) != set(current):
        missing = sorted(set(current) - set(manifest))
        surplus = sorted(set(manifest) - set(current))
        raise ValueError(
            f"{path}: checkpoint/config mismatch; missing={missing} surplus={surplus}"
        )
    for name, tensor in current.items():
        if list(tensor.shape) != manifest[name]:
            raise ValueError(
                f"{path}: shape mismatch for {name}: checkpoint "
                f"{manifest[name]} vs model {list(tensor.shape)}"
            )
    model.load_state_dict(payload["state_dict"])
    model.eval()

    tok_cfg = payload["tokenizer"]
    if tok_cfg["kind"] == "word":
        from .tokenization import WordTokenizer
        tokenizer = WordTokenizer.from_config(tok_cfg)
    else:
        from .tokenization import PretrainedTokenizer
        tokenizer = PretrainedTokenizer(tok_cfg["name"], max_markers=tok_cfg["max_markers"])
    registry = SchemaRegistry.from_records(payload["registry"])
    return model, tokenizer, registry, payload.get("extra", {})


# ---------------------------------------------------------------------------
# Pretrained backbone split (paper profile)
# ---------------------------------------------------------------------------

_LAYER_MAP = (
    ("attention.self.query", "attn.query"),
    ("attention.self.key", "attn.key"),
    ("attention.self.value", "attn.value"),
    ("attention.output.dense", "attn.out"),
    ("attention.output.LayerNorm", "attn_norm"),
    ("intermediate.dense", "fc1"),
    ("output.dense", "fc2"),
    ("output.LayerNorm", "ffn_norm"),
)


def load_masked_lm_state(model: TextTableModel, hf_state: dict) -> list[str]:
    """Copy a bidirectional masked-LM state dict into the model.

    The first ``encoder_layers`` pretrained layers populate the encoder; the
    next ``decoder_layers`` populate the decoder's self-attention and
    feed-forward weights. Cross-attention (and any vocabulary rows beyond the
    pretrained matrix, e.g. trigger markers) keep their fresh initialization.
    Returns the names of the parameters that were copied.
    """
    cfg = model.config
    used = []

    def copy_(param: torch.Tensor, key: str, allow_rows=False):
        src = hf_state[key]
        if allow_rows and src.shape[0] <= param.shape[0] and src.shape[1:] == param.shape[1:]:
            param.data[:src.shape[0]] = src
        elif src.shape == param.shape:
            param.data.copy_(src)
        else:
            raise ValueError(f"shape mismatch for {key}: {tuple(src.shape)} vs {tuple(param.shape)}")
        used.append(key)

    emb = model.embeddings
    copy_(emb.word_embeddings.weight, "embeddings.word_embeddings.weight", allow_rows=True)
    copy_(emb.position_embeddings.weight, "embeddings.position_embeddings.weight")
    copy_(emb.token_type_embeddings.weight, "embeddings.token_type_embeddings.weight", allow_rows=True)
    copy_(emb.norm.weight, "embeddings.LayerNorm.weight")
    copy_(emb.norm.bias, "embeddings.LayerNorm.bias")

    blocks = list(model.encoder) + list(model.decoder)
    need = cfg.encoder_layers + cfg.decoder_layers
    for i in range(need):
        if f"encoder.layer.{i}.attention.self.query.weight" not in hf_state:
            raise ValueError(f"pretrained model has fewer than {need} layers")
        block = blocks[i]
        for hf_part, part in _LAYER_MAP:
            mod = block
            for attr in part.split("."):
                mod = getattr(mod, attr)
            copy_(mod.weight, f"encoder.layer.{i}.{hf_part}.weight")
            copy_(mod.bias, f"encoder.layer.{i}.{hf_part}.bias")
    return used


def split_pretrained(name="roberta-large", encoder_layers=17, decoder_layers=7,
                     max_markers=16, table_positions="fresh"):
    """Build the paper-profile model: a pretrained masked LM split into
    encoder and decoder stacks, trigger markers added to the tokenizer."""
    from transformers import AutoModel

    from .tokenization import PretrainedTokenizer

    tokenizer = PretrainedTokenizer(name, max_markers=max_markers)
    backbone = AutoModel.from_pretrained(name)
    hf_cfg = backbone.config
    cfg = ModelConfig(
        vocab_size=tokenizer.vocab_size,
        hidden_size=hf_cfg.hidden_size,
        num_heads=hf_cfg.num_attention_heads,
        encoder_layers=encoder_layers,
        decoder_layers=decoder_layers,
        ffn_size=hf_cfg.intermediate_size,
        max_positions=hf_cfg.max_position_embeddings,
        dropout=hf_cfg.hidden_dropout_prob,
        layer_norm_eps=hf_cfg.layer_norm_eps,
        pad_token_id=hf_cfg.pad_token_id,
        table_positions=table_positions,
    )
    model = TextTableModel(cfg)
    load_masked_lm_state(model, dict(backbone.state_dict()))
    return model, tokenizer
