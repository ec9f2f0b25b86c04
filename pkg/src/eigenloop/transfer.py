"""The progressive few-label transfer loop and its baselines.

One label per class seeds the loop; each evolution step clusters the
current feature space around anchors (the labeled samples), asks an oracle
to label one representative per free cluster, and finetunes a lightweight
adapter + head on everything labeled so far. The adapter's normalized
output becomes the next step's feature space, so labels, features and
clustering co-evolve under a fixed annotation budget.

The trainable surface is an adapter over frozen base features rather than
a deep backbone; re-embedding through the adapter plays the role of the
improved representation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from .clustering import (
    AnchorSet,
    ClusterState,
    KMeansConfig,
    ackmeans,
    bcubed_precision,
    inertia,
    select_eigen_samples,
)
from .core import (
    EmbeddingSet,
    LabeledSet,
    SampleId,
    derive_seed,
    normalize_rows,
    substream,
)
from .errors import ConfigError, ContractError, DataError, ShapeError, TrainingError

STATE_FORMAT = "eigenloop-evolution-state"
STATE_VERSION = 1


@dataclass(frozen=True)
class Budget:
    """Annotation budget: schedule[k] is the per-class label count b for
    evolution k+1, so that step requests K = b * classes new eigen-samples.

    The total extra annotation cost is classes * sum(schedule), i.e.
    epsilon * classes with epsilon = sum(schedule).
    """

    classes: int
    schedule: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.classes < 1:
            raise ConfigError(f"classes must be positive, got {self.classes}")
        if any(b < 1 for b in self.schedule):
            raise ConfigError(f"every per-step budget must be >= 1, got {self.schedule}")
        object.__setattr__(self, "schedule", tuple(int(b) for b in self.schedule))

    @classmethod
    def uniform(cls, b: int, classes: int, kappa_max: int) -> "Budget":
        if kappa_max < 0:
            raise ConfigError(f"kappa_max must be >= 0, got {kappa_max}")
        return cls(classes, (b,) * kappa_max)

    @property
    def kappa_max(self) -> int:
        return len(self.schedule)

    @property
    def epsilon(self) -> int:
        """Average extra labels per class over the whole run."""
        return sum(self.schedule)

    @property
    def total_extra(self) -> int:
        return self.classes * self.epsilon

    def K_at(self, kappa: int) -> int:
        if not 1 <= kappa <= self.kappa_max:
            raise ConfigError(f"kappa {kappa} outside [1, {self.kappa_max}]")
        return self.schedule[kappa - 1] * self.classes


@dataclass(frozen=True)
class FinetuneConfig:
    epochs: int = 60
    lr_head: float = 0.1
    lr_adapter: float = 1e-3
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr_head < 0 or self.lr_adapter < 0:
            raise ConfigError("learning rates must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")


class AdapterModel:
    """Trainable feature adapter plus a linear class head.

    The adapter is a rectified two-layer block initialized so the composite
    map is the identity exactly (relu(x) - relu(-x) == x): the untrained
    model reproduces the base feature space and finetuning perturbs it from
    there. Its L2-normalized output is the clustering feature space. The
    head is a zero-initialized affine map from that space to class scores.
    """

    PARAM_NAMES = ("w1", "b1", "w2", "b2", "wh", "bh")
    ADAPTER_PARAMS = ("w1", "b1", "w2", "b2")

    def __init__(self, w1, b1, w2, b2, wh, bh):
        self.w1 = np.array(w1, dtype=np.float64)
        self.b1 = np.array(b1, dtype=np.float64)
        self.w2 = np.array(w2, dtype=np.float64)
        self.b2 = np.array(b2, dtype=np.float64)
        self.wh = np.array(wh, dtype=np.float64)
        self.bh = np.array(bh, dtype=np.float64)
        if self.w1.shape[1] != self.b1.shape[0] or self.w1.shape[1] != self.w2.shape[0]:
            raise ShapeError("adapter layer widths do not chain")
        if self.w2.shape[1] != self.b2.shape[0] or self.w2.shape[1] != self.wh.shape[0]:
            raise ShapeError("head input width does not match adapter output")
        if self.wh.shape[1] != self.bh.shape[0]:
            raise ShapeError("head bias does not match class count")
        for name in self.PARAM_NAMES:
            if not np.isfinite(getattr(self, name)).all():
                raise DataError(f"non-finite parameter {name}")

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[1]

    @property
    def classes(self) -> int:
        return self.wh.shape[1]

    @classmethod
    def init(cls, in_dim: int, out_dim: int, classes: int) -> "AdapterModel":
        eye = np.eye(in_dim)
        sel = np.eye(in_dim, out_dim)
        return cls(
            np.hstack([eye, -eye]),
            np.zeros(2 * in_dim),
            np.vstack([sel, -sel]),
            np.zeros(out_dim),
            np.zeros((out_dim, classes)),
            np.zeros(classes),
        )

    def copy(self) -> "AdapterModel":
        return AdapterModel(*(getattr(self, n).copy() for n in self.PARAM_NAMES))

    def reinit_head(self) -> None:
        self.wh = np.zeros_like(self.wh)
        self.bh = np.zeros_like(self.bh)

    def transform(self, x: np.ndarray) -> np.ndarray:
        """Adapter output, L2-normalized row-wise."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"input must be (n, {self.in_dim}), got {x.shape}")
        a2 = np.maximum(x @ self.w1 + self.b1, 0.0) @ self.w2 + self.b2
        norms = np.linalg.norm(a2, axis=1, keepdims=True)
        if (norms == 0.0).any():
            raise DataError("adapter produced a zero output row")
        return a2 / norms

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, dict]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"input must be (n, {self.in_dim}), got {x.shape}")
        a1 = x @ self.w1 + self.b1
        h = np.maximum(a1, 0.0)
        a2 = h @ self.w2 + self.b2
        norms = np.linalg.norm(a2, axis=1, keepdims=True)
        if (norms == 0.0).any():
            raise DataError("adapter produced a zero output row")
        z = a2 / norms
        logits = z @ self.wh + self.bh
        return logits, {"x": x, "a1": a1, "h": h, "norms": norms, "z": z}

    def backward(self, cache: dict, grad_logits: np.ndarray) -> dict[str, np.ndarray]:
        z, norms = cache["z"], cache["norms"]
        gwh = z.T @ grad_logits
        gbh = grad_logits.sum(axis=0)
        gz = grad_logits @ self.wh.T
        ga2 = (gz - (gz * z).sum(axis=1, keepdims=True) * z) / norms
        gw2 = cache["h"].T @ ga2
        gb2 = ga2.sum(axis=0)
        ga1 = (ga2 @ self.w2.T) * (cache["a1"] > 0)
        gw1 = cache["x"].T @ ga1
        gb1 = ga1.sum(axis=0)
        return {"w1": gw1, "b1": gb1, "w2": gw2, "b2": gb2, "wh": gwh, "bh": gbh}

    def to_doc(self) -> dict:
        return {n: getattr(self, n).tolist() for n in self.PARAM_NAMES}

    @classmethod
    def from_doc(cls, doc: Mapping) -> "AdapterModel":
        return cls(*(np.array(doc[n], dtype=np.float64) for n in cls.PARAM_NAMES))


def softmax_cross_entropy(logits: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient with respect to logits."""
    m = logits.max(axis=1, keepdims=True)
    ex = np.exp(logits - m)
    total = ex.sum(axis=1, keepdims=True)
    n = logits.shape[0]
    loss = float(np.mean(np.log(total[:, 0]) - (logits - m)[np.arange(n), y]))
    grad = ex / total
    grad[np.arange(n), y] -= 1.0
    return loss, grad / n


def finetune(
    model: AdapterModel, features: EmbeddingSet, labels: LabeledSet, cfg: FinetuneConfig
) -> AdapterModel:
    """Full-batch SGD (momentum, no weight decay) on the labeled samples.

    The head trains at lr_head and the adapter at lr_adapter. Deterministic:
    the batch is the labeled set in ascending id order.
    """
    if len(labels) == 0:
        raise ContractError("cannot finetune on an empty labeled set")
    ids = labels.ids()
    x = features.rows(ids)
    y = np.array([labels.label(i) for i in ids], dtype=np.int64)
    out = model.copy()
    vel = {n: np.zeros_like(getattr(out, n)) for n in AdapterModel.PARAM_NAMES}
    for epoch in range(cfg.epochs):
        logits, cache = out.forward(x)
        loss, grad_logits = softmax_cross_entropy(logits, y)
        if not np.isfinite(loss):
            raise TrainingError(f"finetuning diverged at epoch {epoch}")
        grads = out.backward(cache, grad_logits)
        for name, g in grads.items():
            lr = cfg.lr_adapter if name in AdapterModel.ADAPTER_PARAMS else cfg.lr_head
            vel[name] = cfg.momentum * vel[name] - lr * g
            setattr(out, name, getattr(out, name) + vel[name])
    return out


def reembed(model: AdapterModel, base: EmbeddingSet) -> EmbeddingSet:
    """Push the base features through the adapter; ids are preserved."""
    return EmbeddingSet(base.ids, model.transform(base.data), normalized=True)


def evaluate(model: AdapterModel, test: EmbeddingSet, truth: LabeledSet) -> tuple[float, float]:
    """(top-1 accuracy, unweighted mean per-class recall) on held-out data.

    Classes absent from the test set are excluded from the mean. The caller
    guarantees the test set is disjoint from the training labels.
    """
    logits, _ = model.forward(test.data)
    pred = logits.argmax(axis=1)
    true = np.array([truth.label(i) for i in test.ids], dtype=np.int64)
    top1 = float(np.mean(pred == true))
    recalls = [float(np.mean(pred[true == c] == c)) for c in sorted(set(true.tolist()))]
    return top1, float(np.mean(recalls))


# ---------------------------------------------------------------------------
# oracles and selection helpers
# ---------------------------------------------------------------------------


class Oracle(Protocol):
    def answer(self, sample_ids: Sequence[SampleId]) -> dict[SampleId, int]: ...


class GroundTruthOracle:
    """Answers every query from a known labeling."""

    def __init__(self, truth: LabeledSet):
        self.truth = truth

    def answer(self, sample_ids: Sequence[SampleId]) -> dict[SampleId, int]:
        return {int(i): self.truth.label(i) for i in sample_ids}


def pick_indicators(features: EmbeddingSet, truth: LabeledSet, rule: str = "nearest-class-mean") -> LabeledSet:
    """One pre-labeled sample per class to seed the loop.

    Harness-only: the nearest-class-mean rule peeks at ground truth, which a
    real deployment does not have; there the indicators come from the user.
    """
    if rule != "nearest-class-mean":
        raise ConfigError(f"unknown indicator rule {rule!r}")
    by_class: dict[int, list[int]] = {}
    for sid, label in truth.items_sorted():
        if features.has_id(sid):
            by_class.setdefault(label, []).append(sid)
    out = LabeledSet(truth.num_classes)
    for c in range(truth.num_classes):
        members = by_class.get(c)
        if not members:
            raise DataError(f"class {c} has no samples to pick an indicator from")
        rows = features.rows(members)
        diff = rows - rows.mean(axis=0)
        d2 = np.einsum("nd,nd->n", diff, diff)
        best = d2.min()
        out.add(min(m for m, d in zip(members, d2) if d == best), c)
    return out


def draw_random_ids(pool: Sequence[SampleId], count: int, seed: int) -> list[int]:
    """Uniform draw without replacement, stable under pool ordering."""
    pool_sorted = sorted(int(i) for i in pool)
    if count > len(pool_sorted):
        raise ConfigError(f"cannot draw {count} from a pool of {len(pool_sorted)}")
    if count == 0:
        return []
    g = substream(seed, "baseline/draw")
    idx = g.choice(len(pool_sorted), size=count, replace=False)
    return sorted(pool_sorted[i] for i in idx)


def cluster_quality(
    features: EmbeddingSet,
    truth: LabeledSet,
    seed: int,
    label: str = "diag/0",
    k: int | None = None,
    t_max: int = 100,
    restarts: int = 8,
) -> float:
    """BCubed precision of a fresh K-cluster fit of the feature space.

    Runs several seeded restarts and scores the lowest-inertia fit, so the
    number reflects the space rather than one unlucky initialization.
    """
    k = truth.num_classes if k is None else k
    anchors = AnchorSet.empty(features.dim)
    best: ClusterState | None = None
    best_inertia = np.inf
    for r in range(max(1, restarts)):
        cfg = KMeansConfig(t_max=t_max, init="kmeans++", seed=derive_seed(seed, f"{label}/restart{r}"))
        state = ackmeans(features, k, anchors, cfg)
        j = inertia(features, state)
        if j < best_inertia:
            best, best_inertia = state, j
    assert best is not None
    return bcubed_precision({sid: int(c) for sid, c in zip(features.ids, best.assignment)}, truth)


# ---------------------------------------------------------------------------
# the loop
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HistoryRow:
    kappa: int
    labels_spent: int
    bcubed: float
    top1: float
    mean_per_class: float

    def as_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "labels_spent": self.labels_spent,
            "bcubed": self.bcubed,
            "top1": self.top1,
            "mean_per_class": self.mean_per_class,
        }


@dataclass(eq=False)
class EvolutionState:
    """Externalized ledger of a loop run."""

    kappa: int
    anchors: AnchorSet
    labeled: LabeledSet
    history: list[HistoryRow]
    queried: list[int]
    short_steps: list[int]
    status: str


def history_to_csv(rows: Sequence[HistoryRow], path: str | Path) -> None:
    lines = ["kappa,labels_spent,bcubed,top1,mean_per_class\n"]
    for r in rows:
        lines.append(
            f"{r.kappa},{r.labels_spent},{float(r.bcubed)!r},{float(r.top1)!r},{float(r.mean_per_class)!r}\n"
        )
    Path(path).write_text("".join(lines), encoding="utf-8")


class ProgressiveLoop:
    """State machine for the cluster -> annotate -> finetune co-evolution.

    Drive it directly (the HTTP service does) or through
    :func:`progressive_loop` with a synchronous oracle. All randomness is
    derived from (seed, step) named streams, so a run is a pure function of
    (data, config, seed, oracle answers) and can be suspended mid-annotation
    and resumed without changing the outcome.
    """

    def __init__(
        self,
        features: EmbeddingSet,
        truth: LabeledSet,
        test: EmbeddingSet,
        test_truth: LabeledSet,
        indicators: LabeledSet,
        budget: Budget,
        finetune_cfg: FinetuneConfig = FinetuneConfig(),
        kmeans_cfg: KMeansConfig = KMeansConfig(),
        seed: int = 0,
        normalize: bool = True,
    ):
        if len(indicators) != budget.classes:
            raise ConfigError(
                f"expected {budget.classes} indicator labels, got {len(indicators)}"
            )
        got = sorted(label for _, label in indicators.items_sorted())
        if got != list(range(budget.classes)):
            raise ConfigError("indicators must cover every class exactly once")
        for sid in indicators.ids():
            if not features.has_id(sid):
                raise DataError(f"indicator sample {sid} is not in the feature set")
        for sid in features.ids:
            if sid not in truth:
                raise DataError(f"sample {sid} has no ground-truth label for metrics")

        self.seed = int(seed)
        self.normalize = bool(normalize)
        self.budget = budget
        self.finetune_cfg = finetune_cfg
        self.kmeans_cfg = kmeans_cfg
        self._bind_data(features, truth, test, test_truth)
        self.model = AdapterModel.init(self.base.dim, self.base.dim, budget.classes)
        self.labeled = indicators.copy()
        self.kappa = 0
        self.history: list[HistoryRow] = []
        self.queried: list[int] = []
        self.short_steps: list[int] = []
        self.anchors = AnchorSet.from_labeled(self.base, self.labeled)
        self.features = self.base
        self.last_assignment: dict[int, int] | None = None
        self._pending: list[tuple[int, int]] = []
        self._answers: dict[int, int] = {}
        self._status = "created"

    def _bind_data(
        self, features: EmbeddingSet, truth: LabeledSet, test: EmbeddingSet, test_truth: LabeledSet
    ) -> None:
        self.base = normalize_rows(features) if self.normalize and not features.normalized else features
        self.truth = truth
        self.test = test
        self.test_truth = test_truth

    # -- lifecycle ---------------------------------------------------------

    @property
    def status(self) -> str:
        return self._status

    @property
    def pending(self) -> list[tuple[int, int]]:
        """Unanswered (cluster, sample_id) queries of the current step."""
        return [(c, s) for c, s in self._pending if s not in self._answers]

    @property
    def ready_to_step(self) -> bool:
        return self._status == "awaiting-labels" and not self.pending

    def start(self) -> "ProgressiveLoop":
        if self._status != "created":
            raise ContractError(f"start() called in status {self._status!r}")
        self._finetune_and_record()
        self._prepare_next()
        return self

    def submit_labels(
        self, answers: Mapping[SampleId, int]
    ) -> tuple[list[int], list[tuple[int, str]]]:
        """Record oracle/human answers for pending queries.

        Partial batches are fine; invalid items are rejected individually
        and do not block the rest.
        """
        if self._status != "awaiting-labels":
            raise ContractError(f"no labels expected in status {self._status!r}")
        pending_ids = {s for _, s in self._pending}
        accepted: list[int] = []
        rejected: list[tuple[int, str]] = []
        for sid, label in answers.items():
            sid, label = int(sid), int(label)
            if sid not in pending_ids:
                rejected.append((sid, "not pending"))
            elif sid in self._answers:
                rejected.append((sid, "already answered"))
            elif not 0 <= label < self.budget.classes:
                rejected.append((sid, "label out of range"))
            else:
                self._answers[sid] = label
                accepted.append(sid)
        return accepted, rejected

    def step(self) -> "ProgressiveLoop":
        """Fold the answered queries in: finetune, re-embed, next selection."""
        if not self.ready_to_step:
            raise ContractError("cannot step: unanswered queries remain")
        for sid, label in sorted(self._answers.items()):
            self.labeled.add(sid, label)
        self._pending, self._answers = [], {}
        self.kappa += 1
        self._finetune_and_record()
        self._prepare_next()
        return self

    def run_with_oracle(self, oracle: Oracle) -> "ProgressiveLoop":
        while self._status == "awaiting-labels":
            self.submit_labels(oracle.answer([s for _, s in self.pending]))
            self.step()
        return self

    # -- internals ---------------------------------------------------------

    def _finetune_and_record(self) -> None:
        self.model.reinit_head()  # class geometry changes as labels arrive
        self.model = finetune(self.model, self.base, self.labeled, self.finetune_cfg)
        self.features = reembed(self.model, self.base)
        self.anchors = AnchorSet.from_labeled(self.features, self.labeled)
        bcubed = cluster_quality(self.features, self.truth, self.seed, f"diag/{self.kappa}")
        top1, mpc = evaluate(self.model, self.test, self.test_truth)
        self.history.append(
            HistoryRow(self.kappa, len(self.labeled) - self.budget.classes, bcubed, top1, mpc)
        )

    def _prepare_next(self) -> None:
        while self.kappa < self.budget.kappa_max:
            nxt = self.kappa + 1
            k = self.budget.K_at(nxt)
            km = replace(self.kmeans_cfg, seed=derive_seed(self.seed, f"loop/ackmeans/{nxt}"))
            state = ackmeans(self.features, k, self.anchors, km)
            self.last_assignment = {
                int(sid): int(c) for sid, c in zip(self.features.ids, state.assignment)
            }
            picks, _skipped = select_eigen_samples(self.features, state, self.labeled.ids())
            if picks:
                if len(picks) < k:
                    self.short_steps.append(nxt)
                self._pending = picks
                self._answers = {}
                self.queried.extend(s for _, s in picks)
                self._status = "awaiting-labels"
                return
            # nothing annotatable this evolution; record it and move on
            self.short_steps.append(nxt)
            self.kappa = nxt
            self._finetune_and_record()
        self._status = "finished"

    # -- snapshots ---------------------------------------------------------

    def snapshot(self) -> EvolutionState:
        return EvolutionState(
            kappa=self.kappa,
            anchors=self.anchors,
            labeled=self.labeled.copy(),
            history=list(self.history),
            queried=list(self.queried),
            short_steps=list(self.short_steps),
            status=self._status,
        )

    def to_doc(self) -> dict:
        """Self-describing JSON document sufficient to resume the run."""
        return {
            "format": STATE_FORMAT,
            "version": STATE_VERSION,
            "seed": self.seed,
            "status": self._status,
            "kappa": self.kappa,
            "classes": self.budget.classes,
            "schedule": list(self.budget.schedule),
            "normalize": self.normalize,
            "finetune": {
                "epochs": self.finetune_cfg.epochs,
                "lr_head": self.finetune_cfg.lr_head,
                "lr_adapter": self.finetune_cfg.lr_adapter,
                "momentum": self.finetune_cfg.momentum,
                "seed": self.finetune_cfg.seed,
            },
            "kmeans": {
                "t_max": self.kmeans_cfg.t_max,
                "init": self.kmeans_cfg.init,
                "empty_policy": self.kmeans_cfg.empty_policy,
                "seed": self.kmeans_cfg.seed,
            },
            "labeled": self.labeled.items_sorted(),
            "pending": [[c, s] for c, s in self._pending],
            "answers": sorted(self._answers.items()),
            "queried": list(self.queried),
            "short_steps": list(self.short_steps),
            "history": [r.as_dict() for r in self.history],
            "adapter": self.model.to_doc(),
            "last_assignment": sorted(self.last_assignment.items())
            if self.last_assignment is not None
            else None,
        }

    @classmethod
    def from_doc(
        cls,
        doc: Mapping,
        features: EmbeddingSet,
        truth: LabeledSet,
        test: EmbeddingSet,
        test_truth: LabeledSet,
    ) -> "ProgressiveLoop":
        if doc.get("format") != STATE_FORMAT:
            raise DataError("not an evolution-state document")
        if doc.get("version") != STATE_VERSION:
            raise DataError(f"unsupported state version {doc.get('version')}")
        obj = cls.__new__(cls)
        obj.seed = int(doc["seed"])
        obj.normalize = bool(doc["normalize"])
        obj.budget = Budget(int(doc["classes"]), tuple(doc["schedule"]))
        obj.finetune_cfg = FinetuneConfig(**doc["finetune"])
        obj.kmeans_cfg = KMeansConfig(**doc["kmeans"])
        obj._bind_data(features, truth, test, test_truth)
        obj.model = AdapterModel.from_doc(doc["adapter"])
        obj.labeled = LabeledSet(obj.budget.classes, {int(s): int(l) for s, l in doc["labeled"]})
        obj.kappa = int(doc["kappa"])
        obj.history = [HistoryRow(**row) for row in doc["history"]]
        obj.queried = [int(s) for s in doc["queried"]]
        obj.short_steps = [int(s) for s in doc["short_steps"]]
        obj.features = reembed(obj.model, obj.base)
        obj.anchors = AnchorSet.from_labeled(obj.features, obj.labeled)
        la = doc.get("last_assignment")
        obj.last_assignment = {int(s): int(c) for s, c in la} if la is not None else None
        obj._pending = [(int(c), int(s)) for c, s in doc["pending"]]
        obj._answers = {int(s): int(l) for s, l in doc["answers"]}
        obj._status = str(doc["status"])
        return obj

    def save_state(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_doc(), indent=2), encoding="utf-8")

    @classmethod
    def load_state(
        cls,
        path: str | Path,
        features: EmbeddingSet,
        truth: LabeledSet,
        test: EmbeddingSet,
        test_truth: LabeledSet,
    ) -> "ProgressiveLoop":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_doc(doc, features, truth, test, test_truth)


def progressive_loop(
    base_features: EmbeddingSet,
    indicators: LabeledSet,
    budget: Budget,
    oracle: Oracle,
    *,
    truth: LabeledSet,
    test: EmbeddingSet,
    test_truth: LabeledSet,
    finetune_cfg: FinetuneConfig = FinetuneConfig(),
    kmeans_cfg: KMeansConfig = KMeansConfig(),
    seed: int = 0,
    normalize: bool = True,
) -> tuple[AdapterModel, EvolutionState]:
    """Run the full co-evolution with a synchronous oracle."""
    loop = ProgressiveLoop(
        base_features,
        truth,
        test,
        test_truth,
        indicators,
        budget,
        finetune_cfg,
        kmeans_cfg,
        seed,
        normalize,
    ).start()
    loop.run_with_oracle(oracle)
    return loop.model, loop.snapshot()


def random_baseline(
    base_features: EmbeddingSet,
    indicators: LabeledSet,
    total_extra: int,
    oracle: Oracle,
    *,
    truth: LabeledSet,
    test: EmbeddingSet,
    test_truth: LabeledSet,
    finetune_cfg: FinetuneConfig = FinetuneConfig(),
    seed: int = 0,
    normalize: bool = True,
) -> tuple[AdapterModel, HistoryRow]:
    """Spend the same budget on uniformly drawn samples, one finetune.

    Same model and config as the loop, so the comparison isolates the
    selection strategy.
    """
    base = normalize_rows(base_features) if normalize and not base_features.normalized else base_features
    pool = sorted(set(base.ids) - set(indicators.ids()))
    drawn = draw_random_ids(pool, total_extra, seed)
    labeled = indicators.copy()
    for sid, label in sorted(oracle.answer(drawn).items()):
        labeled.add(sid, label)
    model = AdapterModel.init(base.dim, base.dim, indicators.num_classes)
    model = finetune(model, base, labeled, finetune_cfg)
    features = reembed(model, base)
    bcubed = cluster_quality(features, truth, seed, "diag/0")
    top1, mpc = evaluate(model, test, test_truth)
    return model, HistoryRow(0, total_extra, bcubed, top1, mpc)
