"""Desk-scale transformer classifiers over token-id sequences.

Two architectures share one parameter layout: a causal decoder that pools
the last non-padding position, and a bidirectional encoder that pools the
leading CLS position and pretrains with masked-token prediction.  Weights
initialize from a seeded numpy stream, so a (config, seed) pair fully
determines the parameters; torch supplies autograd and the optimizer.
Everything defaults to float64 so gradient checks and reruns are exact.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .errors import DataError, TrainingError
from .seeding import derive_seed, rng_for
from .toklab import BpeTokenizer

_MAGIC = b"GBCK\x01\x00"


class Arch(Enum):
    DECODER_CAUSAL = "decoder_causal"
    ENCODER_BIDIR = "encoder_bidir"


class Objective(Enum):
    LM = "lm"
    CLASSIFY = "classify"


class BadConfig(DataError):
    """A model configuration that violates its invariants."""


class IdOutOfRange(DataError):
    """A token id outside [0, vocab_size)."""


class TooLong(DataError):
    """An input longer than max_seq_len."""


class AllPadding(DataError):
    """A classification input with no non-padding token."""


class NonFiniteLoss(TrainingError):
    """A single loss evaluation that came back NaN or infinite."""


class DivergedLoss(TrainingError):
    """A training step whose loss was NaN or infinite."""


class BadCheckpointFile(DataError):
    """A checkpoint stream that fails structural validation."""


@dataclass(frozen=True)
class ModelConfig:
    arch: Arch
    vocab_size: int
    d_model: int = 128
    n_layers: int = 4
    n_heads: int = 4
    d_ff: int = 512
    max_seq_len: int = 128
    dropout: float = 0.1

    def __post_init__(self):
        if self.vocab_size < 2:
            raise BadConfig(f"vocab_size must be >= 2, got {self.vocab_size}")
        for name in ("d_model", "n_layers", "n_heads", "d_ff"):
            if getattr(self, name) < 1:
                raise BadConfig(f"{name} must be >= 1")
        if self.d_model % self.n_heads != 0:
            raise BadConfig(
                f"d_model {self.d_model} must be divisible by n_heads {self.n_heads}"
            )
        if self.max_seq_len < 8:
            raise BadConfig(f"max_seq_len must be >= 8, got {self.max_seq_len}")
        if not 0.0 <= self.dropout < 1.0:
            raise BadConfig(f"dropout must be in [0, 1), got {self.dropout}")

    def to_dict(self) -> dict:
        return {
            "arch": self.arch.value,
            "vocab_size": self.vocab_size,
            "d_model": self.d_model,
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "d_ff": self.d_ff,
            "max_seq_len": self.max_seq_len,
            "dropout": self.dropout,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            arch=Arch(d["arch"]),
            vocab_size=int(d["vocab_size"]),
            d_model=int(d["d_model"]),
            n_layers=int(d["n_layers"]),
            n_heads=int(d["n_heads"]),
            d_ff=int(d["d_ff"]),
            max_seq_len=int(d["max_seq_len"]),
            dropout=float(d["dropout"]),
        )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    max_steps: int = 500
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    mask_rate: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise BadConfig("learning_rate must be positive")
        if self.batch_size < 1 or self.max_steps < 1:
            raise BadConfig("batch_size and max_steps must be >= 1")
        if not 0.0 < self.mask_rate < 1.0:
            raise BadConfig(f"mask_rate must be in (0, 1), got {self.mask_rate}")


class _SelfAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int, dropout: float):
        super().__init__()
        self.n_heads = n_heads
        self.head_dim = d_model // n_heads
        self.qkv = nn.Linear(d_model, 3 * d_model)
        self.proj = nn.Linear(d_model, d_model)
        self.attn_dropout = nn.Dropout(dropout)
        self.resid_dropout = nn.Dropout(dropout)

    def forward(self, x, bias):
        B, T, D = x.shape
        q, k, v = self.qkv(x).split(D, dim=2)
        q = q.view(B, T, self.n_heads, self.head_dim).transpose(1, 2)
        k = k.view(B, T, self.n_heads, self.head_dim).transpose(1, 2)
        v = v.view(B, T, self.n_heads, self.head_dim).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / (self.head_dim**0.5)
        if bias is not None:
            scores = scores + bias
        weights = self.attn_dropout(torch.softmax(scores, dim=-1))
        out = (weights @ v).transpose(1, 2).reshape(B, T, D)
        return self.resid_dropout(self.proj(out))


class _Block(nn.Module):
    def __init__(self, d_model: int, n_heads: int, d_ff: int, dropout: float):
        super().__init__()
        self.ln1 = nn.LayerNorm(d_model)
        self.attn = _SelfAttention(d_model, n_heads, dropout)
        self.ln2 = nn.LayerNorm(d_model)
        self.mlp = nn.Sequential(
            nn.Linear(d_model, d_ff), nn.GELU(), nn.Linear(d_ff, d_model)
        )
        self.mlp_dropout = nn.Dropout(dropout)

    def forward(self, x, bias):
        x = x + self.attn(self.ln1(x), bias)
        x = x + self.mlp_dropout(self.mlp(x))
        return x


class TransformerModel(nn.Module):
    """Shared trunk with a token-level LM head and a 2-way pair head."""

    def __init__(self, cfg: ModelConfig, dtype=torch.float64):
        super().__init__()
        self.cfg = cfg
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.pos_emb = nn.Embedding(cfg.max_seq_len, cfg.d_model)
        self.emb_dropout = nn.Dropout(cfg.dropout)
        self.blocks = nn.ModuleList(
            _Block(cfg.d_model, cfg.n_heads, cfg.d_ff, cfg.dropout)
            for _ in range(cfg.n_layers)
        )
        self.final_ln = nn.LayerNorm(cfg.d_model)
        self.lm_head = nn.Linear(cfg.d_model, cfg.vocab_size, bias=False)
        self.cls_head = nn.Linear(cfg.d_model, 2)
        self.to(dtype)

    @property
    def dtype(self):
        return self.tok_emb.weight.dtype

    def hidden_states(self, ids, bias):
        T = ids.size(1)
        positions = torch.arange(T, device=ids.device)
        x = self.emb_dropout(self.tok_emb(ids) + self.pos_emb(positions)[None, :, :])
        for block in self.blocks:
            x = block(x, bias)
        return self.final_ln(x)


def parameter_count(cfg: ModelConfig) -> int:
    d, ff, V, L, T = cfg.d_model, cfg.d_ff, cfg.vocab_size, cfg.n_layers, cfg.max_seq_len
    per_layer = 2 * d + (d * 3 * d + 3 * d) + (d * d + d) + 2 * d + (d * ff + ff) + (ff * d + d)
    return V * d + T * d + L * per_layer + 2 * d + d * V + (d * 2 + 2)


def init_params(cfg: ModelConfig, seed: int, dtype=torch.float64) -> TransformerModel:
    """Build a model whose weights are a pure function of (cfg, seed).

    Matrix weights draw from Normal(0, 0.02); layer-norm gains start at 1
    and every bias at 0.  Draws come from one numpy stream walked in
    parameter registration order.
    """
    model = TransformerModel(cfg, dtype=dtype)
    rng = rng_for(seed, "model-init")
    with torch.no_grad():
        for name, param in model.named_parameters():
            if _is_layer_norm(name):
                if name.endswith("weight"):
                    param.fill_(1.0)
                else:
                    param.zero_()
            elif name.endswith("bias"):
                param.zero_()
            else:
                values = rng.normal(0.0, 0.02, size=tuple(param.shape))
                param.copy_(torch.from_numpy(values).to(dtype))
    model.eval()
    return model


def _is_layer_norm(param_name: str) -> bool:
    parts = param_name.split(".")
    return any(part in ("ln1", "ln2", "final_ln") for part in parts)


def _as_id_tensor(model: TransformerModel, ids) -> torch.Tensor:
    tensor = torch.as_tensor(np.asarray(ids), dtype=torch.long)
    if tensor.dim() == 1:
        tensor = tensor[None, :]
    if tensor.dim() != 2 or tensor.numel() == 0:
        raise DataError(f"ids must be a non-empty 1-D or 2-D array, got shape {tuple(tensor.shape)}")
    if tensor.size(1) > model.cfg.max_seq_len:
        raise TooLong(
            f"sequence length {tensor.size(1)} exceeds max_seq_len {model.cfg.max_seq_len}"
        )
    low, high = int(tensor.min()), int(tensor.max())
    if low < 0 or high >= model.cfg.vocab_size:
        raise IdOutOfRange(
            f"token ids must be in [0, {model.cfg.vocab_size}), saw [{low}, {high}]"
        )
    return tensor


def _causal_bias(T: int, dtype) -> torch.Tensor:
    mask = torch.triu(torch.ones(T, T, dtype=torch.bool), diagonal=1)
    bias = torch.zeros(T, T, dtype=dtype)
    bias.masked_fill_(mask, float("-inf"))
    return bias[None, None, :, :]


def _key_padding_bias(ids: torch.Tensor, pad_id: int, dtype) -> torch.Tensor:
    bias = torch.zeros(ids.shape, dtype=dtype)
    bias.masked_fill_(ids == pad_id, float("-inf"))
    return bias[:, None, None, :]


def _lm_bias(model: TransformerModel, ids: torch.Tensor, pad_id):
    if model.cfg.arch is Arch.DECODER_CAUSAL:
        return _causal_bias(ids.size(1), model.dtype)
    if pad_id is not None:
        return _key_padding_bias(ids, pad_id, model.dtype)
    return None


def forward_lm(model: TransformerModel, ids, pad_id: int | None = None) -> torch.Tensor:
    """Per-position vocabulary logits; causal for the decoder, full-context
    for the encoder (with optional key padding mask)."""
    tensor = _as_id_tensor(model, ids)
    bias = _lm_bias(model, tensor, pad_id)
    return model.lm_head(model.hidden_states(tensor, bias))


def forward_classify(model: TransformerModel, ids, pad_id: int) -> torch.Tensor:
    """Pair logits [B, 2]; pools the last non-PAD position (decoder) or the
    leading CLS position (encoder)."""
    tensor = _as_id_tensor(model, ids)
    lengths = (tensor != pad_id).sum(dim=1)
    if int(lengths.min()) == 0:
        raise AllPadding("an input row consists entirely of padding")
    if model.cfg.arch is Arch.DECODER_CAUSAL:
        bias = _causal_bias(tensor.size(1), model.dtype)
        hidden = model.hidden_states(tensor, bias)
        pooled = hidden[torch.arange(tensor.size(0)), lengths - 1]
    else:
        bias = _key_padding_bias(tensor, pad_id, model.dtype)
        hidden = model.hidden_states(tensor, bias)
        pooled = hidden[:, 0]
    return model.cls_head(pooled)


@dataclass
class ClassifyBatch:
    ids: np.ndarray
    labels: np.ndarray
    pad_id: int


@dataclass
class LmBatch:
    """Decoder batch: rows of length L + 1; loss is next-token prediction."""

    ids: np.ndarray


@dataclass
class MlmBatch:
    """Encoder batch: masked inputs, original targets, and the mask."""

    ids: np.ndarray
    targets: np.ndarray
    mask: np.ndarray


def _batch_loss(model: TransformerModel, batch, objective: Objective) -> torch.Tensor:
    if objective is Objective.CLASSIFY:
        if not isinstance(batch, ClassifyBatch):
            raise DataError(f"CLASSIFY needs a ClassifyBatch, got {type(batch).__name__}")
        logits = forward_classify(model, batch.ids, batch.pad_id)
        labels = torch.as_tensor(np.asarray(batch.labels), dtype=torch.long)
        return F.cross_entropy(logits, labels)
    if objective is Objective.LM:
        if model.cfg.arch is Arch.DECODER_CAUSAL:
            if not isinstance(batch, LmBatch):
                raise DataError("decoder LM needs an LmBatch")
            ids = _as_id_tensor(model, np.asarray(batch.ids)[:, :-1])
            targets = torch.as_tensor(np.asarray(batch.ids)[:, 1:], dtype=torch.long)
            logits = model.lm_head(model.hidden_states(ids, _causal_bias(ids.size(1), model.dtype)))
            return F.cross_entropy(logits.reshape(-1, logits.size(-1)), targets.reshape(-1))
        if not isinstance(batch, MlmBatch):
            raise DataError("encoder LM needs an MlmBatch")
        ids = _as_id_tensor(model, batch.ids)
        targets = torch.as_tensor(np.asarray(batch.targets), dtype=torch.long)
        mask = torch.as_tensor(np.asarray(batch.mask), dtype=torch.bool)
        if not bool(mask.any()):
            raise DataError("MLM batch has no masked positions")
        logits = model.lm_head(model.hidden_states(ids, None))
        return F.cross_entropy(logits[mask], targets[mask])
    raise DataError(f"unknown objective {objective!r}")


def loss_and_grad(model: TransformerModel, batch, objective: Objective) -> tuple:
    """Mean loss and per-parameter gradients, evaluated without dropout."""
    was_training = model.training
    model.eval()
    try:
        model.zero_grad(set_to_none=True)
        loss = _batch_loss(model, batch, objective)
        if not torch.isfinite(loss):
            raise NonFiniteLoss(f"loss is {float(loss.detach())!r}")
        loss.backward()
        grads = {
            name: (
                torch.zeros_like(param)
                if param.grad is None
                else param.grad.detach().clone()
            )
            for name, param in model.named_parameters()
        }
        model.zero_grad(set_to_none=True)
        return float(loss.detach()), grads
    finally:
        model.train(was_training)


@dataclass
class TrainResult:
    model: TransformerModel
    losses: list


def _index_batches(n: int, batch_size: int, rng: np.random.Generator):
    """Endless batches of example indices: per-epoch shuffles, consumed in
    order; a batch never spans two epochs."""
    if batch_size >= n:
        while True:
            yield np.arange(n)
    while True:
        perm = rng.permutation(n)
        for start in range(0, n - batch_size + 1, batch_size):
            yield perm[start : start + batch_size]


def mixture_schedule(weights, steps: int, seed: int) -> list:
    """Corpus index per step, drawn by weight with a seeded stream."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or len(w) == 0 or np.any(w < 0) or w.sum() <= 0:
        raise DataError(f"weights must be non-negative and sum > 0, got {weights!r}")
    cum = np.cumsum(w / w.sum())
    rng = rng_for(seed, "mixture-schedule")
    return [int(np.searchsorted(cum, rng.random())) for _ in range(steps)]


def mask_tokens(chunk: np.ndarray, rate: float, mask_id: int, rng: np.random.Generator):
    """Replace ~rate of the positions with the mask id; always at least one
    per row so the loss is defined."""
    ids = chunk.copy()
    mask = rng.random(ids.shape) < rate
    for row in range(ids.shape[0]):
        if not mask[row].any():
            mask[row, int(rng.integers(ids.shape[1]))] = True
    ids[mask] = mask_id
    return ids, chunk, mask


@dataclass
class LmData:
    """One or more chunked token corpora with mixture weights."""

    chunk_sets: list
    weights: list
    mask_id: int | None = None


@dataclass
class ClassifyData:
    ids: np.ndarray
    labels: np.ndarray
    pad_id: int


def train(
    model: TransformerModel,
    data,
    cfg: TrainConfig,
    objective: Objective,
) -> TrainResult:
    """Full-parameter AdamW training with a deterministic batch order.

    Returns the trained model plus the per-step loss trace.  A non-finite
    loss at any step raises DivergedLoss.
    """
    torch.manual_seed(derive_seed(cfg.seed, "train-torch"))
    optimizer = torch.optim.AdamW(
        model.parameters(),
        lr=cfg.learning_rate,
        betas=(cfg.beta1, cfg.beta2),
        weight_decay=cfg.weight_decay,
    )
    if objective is Objective.CLASSIFY:
        if not isinstance(data, ClassifyData):
            raise DataError(f"CLASSIFY needs ClassifyData, got {type(data).__name__}")
        ids = np.asarray(data.ids)
        labels = np.asarray(data.labels)
        if ids.shape[0] != labels.shape[0]:
            raise DataError("ids and labels disagree on example count")
        batches = _index_batches(ids.shape[0], cfg.batch_size, rng_for(cfg.seed, "train-order"))

        def batch_for_step(step):
            rows = next(batches)
            return ClassifyBatch(ids[rows], labels[rows], data.pad_id)
    elif objective is Objective.LM:
        if not isinstance(data, LmData):
            raise DataError(f"LM needs LmData, got {type(data).__name__}")
        if len(data.chunk_sets) != len(data.weights):
            raise DataError("chunk_sets and weights disagree on corpus count")
        if model.cfg.arch is Arch.ENCODER_BIDIR and data.mask_id is None:
            raise DataError("encoder LM training needs a mask_id")
        chunk_sets = [np.asarray(c) for c in data.chunk_sets]
        for k, chunks in enumerate(chunk_sets):
            if chunks.ndim != 2 or chunks.shape[0] == 0:
                raise DataError(f"corpus {k}: chunks must be a non-empty 2-D array")
        schedule = mixture_schedule(data.weights, cfg.max_steps, cfg.seed)
        streams = [
            _index_batches(c.shape[0], cfg.batch_size, rng_for(cfg.seed, f"lm-order/{k}"))
            for k, c in enumerate(chunk_sets)
        ]

        def batch_for_step(step):
            corpus = schedule[step]
            rows = chunk_sets[corpus][next(streams[corpus])]
            if model.cfg.arch is Arch.DECODER_CAUSAL:
                return LmBatch(rows)
            masked, targets, mask = mask_tokens(
                rows, cfg.mask_rate, data.mask_id, rng_for(cfg.seed, "lm-mask", step)
            )
            return MlmBatch(masked, targets, mask)

    else:
        raise DataError(f"unknown objective {objective!r}")

    model.train()
    losses = []
    for step in range(cfg.max_steps):
        optimizer.zero_grad(set_to_none=True)
        loss = _batch_loss(model, batch_for_step(step), objective)
        if not torch.isfinite(loss):
            raise DivergedLoss(f"step {step}: loss is {float(loss.detach())!r}")
        loss.backward()
        optimizer.step()
        losses.append(float(loss.detach()))
    model.eval()
    return TrainResult(model, losses)


def pretrain_mixture(model: TransformerModel, data: LmData, cfg: TrainConfig) -> TrainResult:
    return train(model, data, cfg, Objective.LM)


def lm_chunks(tokenizer, texts, chunk_len: int) -> np.ndarray:
    """Concatenate the token stream of all texts and cut it into fixed-size
    rows, dropping the remainder.  Rows contain no padding."""
    stream: list[int] = []
    for text in texts:
        stream.extend(tokenizer.encode(text))
    n_rows = len(stream) // chunk_len
    if n_rows == 0:
        raise DataError(
            f"corpus too small: {len(stream)} tokens cannot fill one chunk of {chunk_len}"
        )
    return np.asarray(stream[: n_rows * chunk_len], dtype=np.int64).reshape(n_rows, chunk_len)


def chunk_length_for(model: TransformerModel) -> int:
    """LM chunk row length: decoder rows carry one extra token for the shift."""
    if model.cfg.arch is Arch.DECODER_CAUSAL:
        return model.cfg.max_seq_len + 1
    return model.cfg.max_seq_len


def eval_lm_loss(model: TransformerModel, chunks, mask_id: int | None = None,
                 mask_rate: float = 0.15, seed: int = 0) -> float:
    """Mean LM loss over fixed chunks; the encoder path uses a seeded mask
    so repeated evaluations are comparable."""
    chunks = np.asarray(chunks)
    was_training = model.training
    model.eval()
    try:
        total = 0.0
        count = 0
        with torch.no_grad():
            for start in range(0, chunks.shape[0], 16):
                rows = chunks[start : start + 16]
                if model.cfg.arch is Arch.DECODER_CAUSAL:
                    batch = LmBatch(rows)
                else:
                    if mask_id is None:
                        raise DataError("encoder evaluation needs a mask_id")
                    masked, targets, mask = mask_tokens(
                        rows, mask_rate, mask_id, rng_for(seed, "eval-mask", start)
                    )
                    batch = MlmBatch(masked, targets, mask)
                total += float(_batch_loss(model, batch, Objective.LM)) * rows.shape[0]
                count += rows.shape[0]
        return total / count
    finally:
        model.train(was_training)


def extend_embeddings(
    model: TransformerModel, n_new: int, reserved_tail: int, seed: int
) -> TransformerModel:
    """Grow the vocabulary dimension by ``n_new`` rows.

    New rows are inserted just before the ``reserved_tail`` sentinel rows
    (UNK and PAD for the BPE layout), which keeps every existing row's
    values bitwise intact and leaves logits over the original vocabulary
    unchanged.  Fresh rows draw Normal(0, 0.02) from a seeded stream.
    """
    if n_new < 0:
        raise DataError(f"n_new must be >= 0, got {n_new}")
    if reserved_tail < 0 or reserved_tail >= model.cfg.vocab_size:
        raise DataError(f"bad reserved_tail {reserved_tail}")
    old_cfg = model.cfg
    new_cfg = ModelConfig(
        arch=old_cfg.arch,
        vocab_size=old_cfg.vocab_size + n_new,
        d_model=old_cfg.d_model,
        n_layers=old_cfg.n_layers,
        n_heads=old_cfg.n_heads,
        d_ff=old_cfg.d_ff,
        max_seq_len=old_cfg.max_seq_len,
        dropout=old_cfg.dropout,
    )
    new_model = TransformerModel(new_cfg, dtype=model.dtype)
    rng = rng_for(seed, "extend-vocab")
    split = old_cfg.vocab_size - reserved_tail
    old_params = dict(model.named_parameters())
    with torch.no_grad():
        for name, param in new_model.named_parameters():
            old = old_params[name]
            if name in ("tok_emb.weight", "lm_head.weight"):
                fresh = torch.from_numpy(
                    rng.normal(0.0, 0.02, size=(n_new, old_cfg.d_model))
                ).to(model.dtype)
                param.copy_(torch.cat([old[:split], fresh, old[split:]], dim=0))
            else:
                param.copy_(old)
    new_model.eval()
    return new_model


def extend_vocab(
    model: TransformerModel, tokenizer: BpeTokenizer, new_tokens, seed: int
) -> tuple:
    """Extend tokenizer and model together with new whole tokens.

    The tokenizer gains the tokens as pre-matched units; the model gains
    embedding and LM-head rows at the matching ids.  Duplicates raise
    DuplicateToken before anything is modified.
    """
    if model.cfg.vocab_size != tokenizer.model_vocab_size:
        raise DataError(
            f"model vocab {model.cfg.vocab_size} does not match tokenizer "
            f"{tokenizer.model_vocab_size}"
        )
    new_tokenizer = tokenizer.with_added_tokens(new_tokens)
    new_model = extend_embeddings(model, len(tuple(new_tokens)), reserved_tail=2, seed=seed)
    return new_model, new_tokenizer


def predict(model: TransformerModel, tokenizer, record, mode, max_len: int | None = None) -> int:
    """Label for one pair record; ties resolve to the lower label index."""
    return predict_batch(model, tokenizer, [record], mode, max_len=max_len)[0]


def predict_batch(
    model: TransformerModel,
    tokenizer,
    records,
    mode,
    batch_size: int = 64,
    max_len: int | None = None,
) -> list:
    from .toklab import encode_pair  # local import to keep module load light

    if max_len is None:
        max_len = model.cfg.max_seq_len
    was_training = model.training
    model.eval()
    try:
        encoded = np.asarray(
            [encode_pair(tokenizer, record, mode, max_len) for record in records],
            dtype=np.int64,
        )
        out: list[int] = []
        with torch.no_grad():
            for start in range(0, len(records), batch_size):
                logits = forward_classify(
                    model, encoded[start : start + batch_size], tokenizer.pad_id
                )
                out.extend(int(i) for i in logits.argmax(dim=1))
        return out
    finally:
        model.train(was_training)


def save_checkpoint(model: TransformerModel, stream) -> None:
    """Versioned binary layout: magic, JSON header (config plus tensor
    declarations), then raw float64 little-endian tensor data in order."""
    tensors = [(name, list(param.shape)) for name, param in model.named_parameters()]
    header = {
        "format_version": 1,
        "config": model.cfg.to_dict(),
        "dtype": "f64" if model.dtype == torch.float64 else "f32",
        "tensors": tensors,
    }
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    stream.write(_MAGIC)
    stream.write(struct.pack("<Q", len(payload)))
    stream.write(payload)
    for _, param in model.named_parameters():
        stream.write(param.detach().cpu().numpy().astype("<f8").tobytes())


def load_checkpoint(stream) -> TransformerModel:
    magic = stream.read(len(_MAGIC))
    if magic != _MAGIC:
        raise BadCheckpointFile(f"bad magic {magic!r}")
    (header_len,) = struct.unpack("<Q", _read_exact(stream, 8))
    try:
        header = json.loads(_read_exact(stream, header_len).decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError):
        raise BadCheckpointFile("header is not valid JSON") from None
    if header.get("format_version") != 1:
        raise BadCheckpointFile(f"unsupported format version {header.get('format_version')!r}")
    cfg = ModelConfig.from_dict(header["config"])
    dtype = torch.float64 if header.get("dtype", "f64") == "f64" else torch.float32
    model = TransformerModel(cfg, dtype=torch.float64)
    declared = header["tensors"]
    names = [name for name, _ in model.named_parameters()]
    if [name for name, _ in declared] != names:
        raise BadCheckpointFile("tensor declarations do not match the architecture")
    with torch.no_grad():
        for (name, shape), (_, param) in zip(declared, model.named_parameters()):
            if list(param.shape) != list(shape):
                raise BadCheckpointFile(f"tensor {name}: shape {shape} != {list(param.shape)}")
            n_bytes = int(np.prod(shape, dtype=np.int64)) * 8 if shape else 8
            raw = _read_exact(stream, n_bytes)
            values = np.frombuffer(raw, dtype="<f8").reshape(shape)
            param.copy_(torch.from_numpy(values.copy()))
    if dtype == torch.float32:
        model.to(torch.float32)
    model.eval()
    return model


def _read_exact(stream, n: int) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise BadCheckpointFile(f"truncated checkpoint: wanted {n} bytes, got {len(data)}")
    return data
