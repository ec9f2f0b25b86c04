"""Desk-scale contrastive pretraining.

The batch layout everywhere is 2N rows where rows 2k and 2k+1 are the two
augmented views of sample k. The loss is the mean over all 2N anchors of
-log(exp(sim(anchor, positive)/tau) / sum_{j != anchor} exp(sim(anchor, j)/tau)),
and it splits exactly into an alignment term (pulls positives together) plus
a uniformity term (pushes the batch toward a uniform spread on the sphere).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .core import EmbeddingSet, substream
from .errors import (
    ConfigError,
    ContractError,
    DataError,
    DegenerateInputError,
    FormatError,
    ShapeError,
    TrainingError,
)

MODES = ("VUP", "TUP", "UF")

ENC_MAGIC = b"ENC1"
ENC_VERSION = 1


@dataclass(frozen=True)
class Temperature:
    tau: float

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ConfigError(f"temperature must be positive, got {self.tau}")


def _tau(t: "Temperature | float") -> float:
    tau = t.tau if isinstance(t, Temperature) else float(t)
    if tau <= 0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    return tau


@dataclass(frozen=True)
class AugmentationConfig:
    """Vector-space view generator: per-sample scale jitter plus Gaussian noise."""

    noise_sigma: float = 0.1
    scale_jitter: tuple[float, float] = (0.9, 1.1)

    def __post_init__(self) -> None:
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        lo, hi = self.scale_jitter
        if not (0 < lo <= hi):
            raise ConfigError(f"scale_jitter range must satisfy 0 < lo <= hi, got {self.scale_jitter}")


@dataclass(frozen=True)
class MixConfig:
    """How source and target populations feed a training epoch.

    p is the re-balance ratio: a TUP epoch contains all source samples plus
    ceil(p * |source|) target samples resampled with replacement. p == 0 is
    the no-re-balance variant (each target sample enters exactly once).
    """

    p: float = 0.2
    mode: str = "TUP"

    def __post_init__(self) -> None:
        if not 0 <= self.p <= 1:
            raise ConfigError(f"re-balance ratio p must be in [0, 1], got {self.p}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class PretrainConfig:
    epochs: int = 200
    batch_pairs: int = 64
    lr: float = 0.05
    momentum: float = 0.9
    temperature: Temperature = Temperature(0.2)
    augment: AugmentationConfig = AugmentationConfig()
    mix: MixConfig = MixConfig()
    encoder_hidden: tuple[int, ...] = (32,)
    encoder_out: int = 16
    uf_lr_factor: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_pairs < 2:
            raise ConfigError(f"batch_pairs must be >= 2, got {self.batch_pairs}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.uf_lr_factor <= 0:
            raise ConfigError(f"uf_lr_factor must be positive, got {self.uf_lr_factor}")


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------


def _check_views(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 2 or z.shape[0] % 2 != 0:
        raise ShapeError(f"expected a 2N x D matrix with N >= 1, got shape {z.shape}")
    norms = np.linalg.norm(z, axis=1)
    if np.abs(norms - 1.0).max() > 1e-6:
        raise ContractError("rows must be unit-norm (off by more than 1e-6)")
    return z


def _loss_pieces(z: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-anchor log-sum-exp (over j != anchor), positive logits, and sims."""
    s = np.clip(z @ z.T, -1.0, 1.0)
    a = s / tau
    np.fill_diagonal(a, -np.inf)
    m = a.max(axis=1, keepdims=True)
    lse = (m + np.log(np.exp(a - m).sum(axis=1, keepdims=True)))[:, 0]
    pos = np.arange(z.shape[0]) ^ 1  # partner view of each anchor
    return lse, a[np.arange(z.shape[0]), pos], s


def info_nce_loss(z, tau) -> float:
    """Contrastive loss over a 2N-row view-pair batch."""
    z = _check_views(z)
    t = _tau(tau)
    lse, a_pos, _ = _loss_pieces(z, t)
    return float(np.mean(lse - a_pos))


def loss_decomposition(z, tau) -> tuple[float, float]:
    """(alignment, uniformity); their sum is the contrastive loss."""
    z = _check_views(z)
    t = _tau(tau)
    lse, a_pos, _ = _loss_pieces(z, t)
    return float(-np.mean(a_pos)), float(np.mean(lse))


def _loss_terms_grad(z: np.ndarray, t: float) -> tuple[float, float, float, np.ndarray]:
    """(loss, alignment, uniformity, dloss/dz) in one pass; z pre-validated."""
    lse, a_pos, s = _loss_pieces(z, t)
    n2 = z.shape[0]
    a = s / t
    np.fill_diagonal(a, -np.inf)
    p = np.exp(a - lse[:, None])  # softmax over j != anchor, zero diagonal
    pos = np.arange(n2) ^ 1
    grad = ((p + p.T) @ z - 2.0 * z[pos]) / (n2 * t)
    return float(np.mean(lse - a_pos)), float(-np.mean(a_pos)), float(np.mean(lse)), grad


def info_nce_grad(z, tau) -> tuple[float, np.ndarray]:
    """Loss and its exact gradient with respect to the (unit) rows of z."""
    z = _check_views(z)
    loss, _, _, grad = _loss_terms_grad(z, _tau(tau))
    return loss, grad


# ---------------------------------------------------------------------------
# encoder
# ---------------------------------------------------------------------------


class EncoderMLP:
    """Rectifier MLP whose forward output is L2-normalized row-wise.

    Weights are stored as (in, out) matrices; hidden layers use ReLU, the
    output layer is linear before normalization.
    """

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        if len(weights) != len(biases) or not weights:
            raise ShapeError("weights and biases must align, one pair per layer")
        for w, b in zip(weights, biases):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeError("bias shape must match layer output width")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise DataError("non-finite encoder parameters")
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def dims(self) -> list[int]:
        return [self.in_dim] + [w.shape[1] for w in self.weights]

    @classmethod
    def init(cls, in_dim: int, hidden: tuple[int, ...], out_dim: int, seed: int) -> "EncoderMLP":
        g = substream(seed, "encoder/init")
        dims = [in_dim, *hidden, out_dim]
        weights, biases = [], []
        for a, b in zip(dims[:-1], dims[1:]):
            weights.append(g.normal(size=(a, b)) * math.sqrt(2.0 / a))
            biases.append(np.zeros(b))
        return cls(weights, biases)

    @classmethod
    def identity(cls, dim: int) -> "EncoderMLP":
        return cls([np.eye(dim)], [np.zeros(dim)])

    def copy(self) -> "EncoderMLP":
        return EncoderMLP([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def params_equal(self, other: "EncoderMLP") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights)) and all(
            np.array_equal(a, b) for a, b in zip(self.biases, other.biases)
        )

    def embed(self, e: EmbeddingSet) -> EmbeddingSet:
        z, _ = encoder_forward(self, e.data)
        return EmbeddingSet(e.ids, z, normalized=True)


def encoder_forward(model: EncoderMLP, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """Batch forward pass; returns unit-norm rows and the backward cache."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.in_dim:
        raise ShapeError(f"input must be (n, {model.in_dim}), got {x.shape}")
    inputs = [x]
    preacts = []
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = h @ w + b
        preacts.append(a)
        h = np.maximum(a, 0.0) if i < last else a
        if i < last:
            inputs.append(h)
    norms = np.linalg.norm(h, axis=1, keepdims=True)
    if (norms == 0.0).any():
        raise DegenerateInputError("encoder produced a zero output row")
    z = h / norms
    cache = {"inputs": inputs, "preacts": preacts, "norms": norms, "z": z, "model": model}
    return z, cache


def encoder_backward(cache: dict, grad_z: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Exact parameter gradients for the normalized forward pass.

    ``grad_z`` is the loss gradient at the normalized output; the radial
    component is projected out by the normalization Jacobian.
    """
    model: EncoderMLP = cache["model"]
    z, norms = cache["z"], cache["norms"]
    grad_z = np.asarray(grad_z, dtype=np.float64)
    if grad_z.shape != z.shape:
        raise ContractError(f"upstream gradient shape {grad_z.shape} != output shape {z.shape}")
    ga = (grad_z - (grad_z * z).sum(axis=1, keepdims=True) * z) / norms
    grads: list[tuple[np.ndarray, np.ndarray]] = []
    last = len(model.weights) - 1
    for i in range(last, -1, -1):
        gw = cache["inputs"][i].T @ ga
        gb = ga.sum(axis=0)
        grads.append((gw, gb))
        if i > 0:
            ga = (ga @ model.weights[i].T) * (cache["preacts"][i - 1] > 0)
    grads.reverse()
    return grads


# ---------------------------------------------------------------------------
# epoch composition
# ---------------------------------------------------------------------------

SOURCE, TARGET = 0, 1


def mixing_epoch(
    n_source: int, n_target: int, cfg: MixConfig, g: np.random.Generator, with_replacement: bool = True
) -> np.ndarray:
    """One epoch of (dataset, row) index pairs, shuffled.

    TUP: all source rows plus ceil(p * n_source) target draws (p == 0 means
    every target row exactly once). VUP: a permutation of the source rows.
    UF: a permutation of the target rows.
    """
    if cfg.mode in ("VUP", "TUP") and n_source == 0:
        raise DataError(f"mode {cfg.mode} requires a non-empty source set")
    if cfg.mode in ("TUP", "UF") and n_target == 0:
        raise DataError(f"mode {cfg.mode} requires a non-empty target set")

    if cfg.mode == "VUP":
        idx = g.permutation(n_source)
        return np.column_stack([np.full(n_source, SOURCE), idx])
    if cfg.mode == "UF":
        idx = g.permutation(n_target)
        return np.column_stack([np.full(n_target, TARGET), idx])

    if cfg.p == 0:
        draws = np.arange(n_target)
    else:
        count = math.ceil(cfg.p * n_source)
        if with_replacement:
            draws = g.integers(0, n_target, size=count)
        else:
            if count > n_target:
                raise DataError(f"cannot draw {count} of {n_target} target samples without replacement")
            draws = g.choice(n_target, size=count, replace=False)
    epoch = np.concatenate(
        [
            np.column_stack([np.full(n_source, SOURCE), np.arange(n_source)]),
            np.column_stack([np.full(draws.size, TARGET), draws]),
        ]
    )
    return epoch[g.permutation(epoch.shape[0])]


def mixing_sampler(
    source: EmbeddingSet | None,
    target: EmbeddingSet | None,
    cfg: MixConfig,
    seed: int,
    with_replacement: bool = True,
) -> Iterator[np.ndarray]:
    """Endless iterator of epoch index arrays (columns: dataset flag, row)."""
    n_source = source.n if source is not None else 0
    n_target = target.n if target is not None else 0
    g = substream(seed, "pretrain/mix")
    while True:
        yield mixing_epoch(n_source, n_target, cfg, g, with_replacement)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    alignment: float
    uniformity: float


def _augment_views(x: np.ndarray, aug: AugmentationConfig, g: np.random.Generator) -> np.ndarray:
    """Interleaved 2n x D matrix: rows 2k, 2k+1 are two views of x[k]."""
    lo, hi = aug.scale_jitter
    out = np.empty((2 * x.shape[0], x.shape[1]))
    for view in range(2):
        jitter = g.uniform(lo, hi, size=(x.shape[0], 1))
        noise = g.normal(0.0, aug.noise_sigma, size=x.shape) if aug.noise_sigma > 0 else 0.0
        out[view::2] = x * jitter + noise
    return out


def pretrain(
    source: EmbeddingSet | None,
    target: EmbeddingSet | None,
    cfg: PretrainConfig,
    initial: EncoderMLP | None = None,
) -> tuple[EncoderMLP, list[EpochStats]]:
    """Train an encoder with SGD + momentum and a cosine learning-rate decay.

    Mode VUP trains on source only, TUP on the re-balanced mixture, UF
    continues from ``initial`` on target only at ``uf_lr_factor`` times the
    base learning rate. Returns the trained encoder and a per-epoch history
    of loss / alignment / uniformity.
    """
    mode = cfg.mix.mode
    if mode in ("VUP", "TUP") and source is None:
        raise DataError(f"mode {mode} requires a source set")
    if mode in ("TUP", "UF") and target is None:
        raise DataError(f"mode {mode} requires a target set")
    if mode == "UF" and initial is None:
        raise ContractError("mode UF requires an initial encoder")

    in_dim = source.dim if source is not None else target.dim  # type: ignore[union-attr]
    if source is not None and target is not None and source.dim != target.dim:
        raise ShapeError(f"source dim {source.dim} != target dim {target.dim}")

    if initial is not None:
        if initial.in_dim != in_dim:
            raise ShapeError(f"initial encoder expects dim {initial.in_dim}, data has {in_dim}")
        model = initial.copy()
    else:
        model = EncoderMLP.init(in_dim, cfg.encoder_hidden, cfg.encoder_out, cfg.seed)
    if cfg.epochs == 0:
        return model, []

    lr0 = cfg.lr * (cfg.uf_lr_factor if mode == "UF" else 1.0)
    tau = cfg.temperature.tau
    vel_w = [np.zeros_like(w) for w in model.weights]
    vel_b = [np.zeros_like(b) for b in model.biases]
    aug_g = substream(cfg.seed, "pretrain/augment")
    sampler = mixing_sampler(source, target, cfg.mix, cfg.seed)
    src = source.data if source is not None else None
    tgt = target.data if target is not None else None

    history: list[EpochStats] = []
    for epoch in range(cfg.epochs):
        lr = lr0 * 0.5 * (1.0 + math.cos(math.pi * epoch / cfg.epochs))
        order = next(sampler)
        sums = np.zeros(3)
        weight = 0
        for lo in range(0, order.shape[0], cfg.batch_pairs):
            batch = order[lo : lo + cfg.batch_pairs]
            if batch.shape[0] < 2:
                continue
            rows = np.empty((batch.shape[0], in_dim))
            s_mask = batch[:, 0] == SOURCE
            if s_mask.any():
                rows[s_mask] = src[batch[s_mask, 1]]  # type: ignore[index]
            if (~s_mask).any():
                rows[~s_mask] = tgt[batch[~s_mask, 1]]  # type: ignore[index]
            views = _augment_views(rows, cfg.augment, aug_g)
            z, cache = encoder_forward(model, views)
            loss, align, unif, grad_z = _loss_terms_grad(z, tau)
            grads = encoder_backward(cache, grad_z)
            for i, (gw, gb) in enumerate(grads):
                vel_w[i] = cfg.momentum * vel_w[i] - lr * gw
                vel_b[i] = cfg.momentum * vel_b[i] - lr * gb
                model.weights[i] += vel_w[i]
                model.biases[i] += vel_b[i]
            n2 = z.shape[0]
            sums += n2 * np.array([loss, align, unif])
            weight += n2
        if weight == 0:
            raise DataError("epoch produced no trainable batch")
        stats = EpochStats(epoch, *(sums / weight).tolist())
        if not (
            math.isfinite(stats.loss) and math.isfinite(stats.alignment) and math.isfinite(stats.uniformity)
        ):
            raise TrainingError(f"training diverged at epoch {epoch}")
        history.append(stats)
    return model, history


# ---------------------------------------------------------------------------
# encoder checkpoints and history export
# ---------------------------------------------------------------------------


def save_encoder(model: EncoderMLP, path: str | Path) -> None:
    """ENC1 container: layer dims then per-layer weights and biases (f64 LE)."""
    parts = [ENC_MAGIC, struct.pack("<II", ENC_VERSION, len(model.weights))]
    for w in model.weights:
        parts.append(struct.pack("<II", w.shape[0], w.shape[1]))
    for w, b in zip(model.weights, model.biases):
        parts.append(w.astype("<f8").tobytes(order="C"))
        parts.append(b.astype("<f8").tobytes(order="C"))
    Path(path).write_bytes(b"".join(parts))


def load_encoder(path: str | Path) -> EncoderMLP:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or 'cannot read'}") from None
    if len(blob) < 12 or blob[:4] != ENC_MAGIC:
        raise FormatError(f"{path}: not an ENC1 checkpoint")
    version, layers = struct.unpack_from("<II", blob, 4)
    if version != ENC_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    off = 12
    dims = []
    for _ in range(layers):
        dims.append(struct.unpack_from("<II", blob, off))
        off += 8
    weights, biases = [], []
    for din, dout in dims:
        w = np.frombuffer(blob, dtype="<f8", count=din * dout, offset=off).reshape(din, dout)
        off += 8 * din * dout
        b = np.frombuffer(blob, dtype="<f8", count=dout, offset=off)
        off += 8 * dout
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    if off != len(blob):
        raise FormatError(f"{path}: trailing bytes")
    return EncoderMLP(weights, biases)


def history_to_csv(history: list[EpochStats], path: str | Path) -> None:
    lines = ["epoch,loss,alignment,uniformity\n"]
    for row in history:
        lines.append(
            f"{row.epoch},{float(row.loss)!r},{float(row.alignment)!r},{float(row.uniformity)!r}\n"
        )
    Path(path).write_text("".join(lines), encoding="utf-8")
