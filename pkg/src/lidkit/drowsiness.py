"""Epoch aggregation and the standardize -> PCA -> kNN drowsiness classifier."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError, NotFittedError
from .features import BlinkFeatures

LABELS = ("alert", "low_vigilant", "drowsy")
FEATURE_NAMES = (
    "closing_d1",
    "closed_d2",
    "reopening_d3",
    "previous_time",
    "amplitude",
    "av_ratio",
    "normal_area",
    "perclos",
    "peropening",
)
VECTOR_NAMES = tuple(f"mean_{n}" for n in FEATURE_NAMES) + tuple(f"std_{n}" for n in FEATURE_NAMES)
K_NEIGHBORS = 10
N_COMPONENTS = 5
CLIP_SECONDS = 60.0
MODEL_FORMAT = "lidkit-drowsiness-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class EpochFeatureVector:
    """Mean then sample std of every blink feature over one epoch (see ``VECTOR_NAMES``)."""

    epoch_end_time: float
    values: np.ndarray
    blink_count: int
    label: str | None = None

    @property
    def usable(self) -> bool:
        return self.blink_count >= 1 and bool(np.all(np.isfinite(self.values)))


def binary_label(label: str) -> str:
    """Collapse the three-class labels to alert / drowsy."""
    return "alert" if label == "alert" else "drowsy"


def aggregate_epoch(
    features: Sequence[BlinkFeatures], epoch_end_time: float | None = None, label: str | None = None
) -> EpochFeatureVector:
    """Mean and sample standard deviation of each feature across an epoch's blinks.

    A feature with a single value has std 0. ``previous_time`` is skipped
    where absent; if every blink lacks it, that entry is NaN.
    """
    if len(features) == 0:
        raise InsufficientDataError("an epoch needs at least one blink")
    means, stds = [], []
    for name in FEATURE_NAMES:
        vals = np.array([getattr(f, name) for f in features if getattr(f, name) is not None], dtype=float)
        if len(vals) == 0:
            means.append(math.nan)
            stds.append(math.nan)
            continue
        means.append(float(vals.mean()))
        stds.append(float(vals.std(ddof=1)) if len(vals) > 1 else 0.0)
    if epoch_end_time is None:
        epoch_end_time = max(f.t4 for f in features)
    return EpochFeatureVector(epoch_end_time, np.array(means + stds), len(features), label)


def clip_vectors(
    features: Sequence[BlinkFeatures], label: str | None = None, clip: float = CLIP_SECONDS
) -> list[EpochFeatureVector]:
    """One vector per blink, aggregating the blinks that ended in the preceding ``clip`` seconds.

    Vectors with undefined entries (only the stream's first blink, which has
    no previous time) are dropped.
    """
    ends = np.array([f.t4 for f in features])
    out = []
    for f in features:
        members = [features[j] for j in np.flatnonzero((ends > f.t4 - clip) & (ends <= f.t4))]
        vec = aggregate_epoch(members, f.t4, label)
        if vec.usable:
            out.append(vec)
    return out


@dataclass(frozen=True)
class DrowsinessModel:
    """Fitted standardization, PCA basis and kNN training set."""

    kept: np.ndarray  # indices of raw dimensions with non-zero variance
    mean: np.ndarray
    scale: np.ndarray
    pca_mean: np.ndarray
    components: np.ndarray  # (n_components, len(kept)), orthonormal rows
    train_proj: np.ndarray
    train_labels: tuple[str, ...]
    k: int = K_NEIGHBORS
    dimension: int = len(VECTOR_NAMES)
    dropped: tuple[int, ...] = field(default=())

    def project(self, values) -> np.ndarray:
        x = np.atleast_2d(np.asarray(values, dtype=float))
        if x.shape[1] != self.dimension:
            raise ValueError(f"expected {self.dimension} features, got {x.shape[1]}")
        z = (x[:, self.kept] - self.mean) / self.scale
        return (z - self.pca_mean) @ self.components.T


def _stack(vectors: Sequence[EpochFeatureVector]) -> tuple[np.ndarray, list[str]]:
    x = np.array([v.values for v in vectors], dtype=float)
    labels = [v.label for v in vectors]
    if not np.all(np.isfinite(x)):
        raise ValueError("training vectors must be finite")
    return x, labels


def _fix_signs(components: np.ndarray) -> np.ndarray:
    out = components.copy()
    for row in out:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    return out


def fit(
    train: Sequence[EpochFeatureVector], k: int = K_NEIGHBORS, n_components: int = N_COMPONENTS
) -> DrowsinessModel:
    """Fit standardization and PCA on ``train`` and keep its projections for kNN.

    Raises:
        InsufficientDataError: fewer than ``k + 1`` vectors.
        ValueError: missing labels or only one class.
    """
    if len(train) < k + 1:
        raise InsufficientDataError(f"need at least {k + 1} training vectors, got {len(train)}")
    x, labels = _stack(train)
    if any(label is None for label in labels):
        raise ValueError("every training vector needs a label")
    if len(set(labels)) < 2:
        raise ValueError("training data must contain at least two classes")

    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    kept = np.flatnonzero(scale > 1e-12 * np.maximum(1.0, np.abs(mean)))
    if len(kept) == 0:
        raise ValueError("every feature is constant across the training data")
    dropped = tuple(int(i) for i in np.setdiff1d(np.arange(x.shape[1]), kept))
    z = (x[:, kept] - mean[kept]) / scale[kept]
    pca_mean = z.mean(axis=0)
    _, _, vt = np.linalg.svd(z - pca_mean, full_matrices=False)
    n = min(n_components, vt.shape[0])
    components = _fix_signs(vt[:n])
    return DrowsinessModel(
        kept=kept,
        mean=mean[kept],
        scale=scale[kept],
        pca_mean=pca_mean,
        components=components,
        train_proj=(z - pca_mean) @ components.T,
        train_labels=tuple(labels),
        k=k,
        dimension=x.shape[1],
        dropped=dropped,
    )


def _vote(labels: Sequence[str], dists: np.ndarray) -> str:
    counts = Counter(labels)
    best = max(counts.values())
    tied = [lab for lab in counts if counts[lab] == best]
    if len(tied) == 1:
        return tied[0]
    summed = {lab: float(sum(d for l2, d in zip(labels, dists) if l2 == lab)) for lab in tied}
    order = {lab: i for i, lab in enumerate(LABELS)}
    return min(tied, key=lambda lab: (summed[lab], order.get(lab, len(LABELS)), lab))


def predict(model: DrowsinessModel | None, vector: EpochFeatureVector | np.ndarray) -> str:
    """Majority label of the ``k`` nearest training vectors in PCA space.

    Ties go to the label with the smallest summed distance, then to the
    order alert < low_vigilant < drowsy.
    """
    if model is None:
        raise NotFittedError("model has not been fitted")
    values = vector.values if isinstance(vector, EpochFeatureVector) else vector
    q = model.project(values)[0]
    dist = np.linalg.norm(model.train_proj - q, axis=1)
    order = np.lexsort((np.arange(len(dist)), dist))[: model.k]
    return _vote([model.train_labels[i] for i in order], dist[order])


def accuracy(model: DrowsinessModel, vectors: Sequence[EpochFeatureVector]) -> float:
    if not vectors:
        raise InsufficientDataError("no vectors to score")
    return sum(predict(model, v) == v.label for v in vectors) / len(vectors)


@dataclass(frozen=True)
class CrossValidation:
    fold_accuracies: tuple[float, ...]
    fold_subjects: tuple[tuple[str, ...], ...]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))


def cross_validate(
    vectors: Sequence[EpochFeatureVector],
    subjects: Sequence[str],
    folds: int = 5,
    k: int = K_NEIGHBORS,
    n_components: int = N_COMPONENTS,
) -> CrossValidation:
    """Subject-wise k-fold cross validation.

    Subjects are sorted and dealt round-robin into ``folds`` groups, so no
    subject appears in both the training and the test side of a fold.
    """
    if len(vectors) != len(subjects):
        raise ValueError("one subject id per vector is required")
    unique = sorted(set(map(str, subjects)))
    if len(unique) < folds:
        raise InsufficientDataError(f"{len(unique)} subjects cannot fill {folds} folds")
    groups = [tuple(unique[i::folds]) for i in range(folds)]
    subj = np.array([str(s) for s in subjects])
    accs = []
    for held in groups:
        test_mask = np.isin(subj, held)
        train = [v for v, m in zip(vectors, test_mask) if not m]
        test = [v for v, m in zip(vectors, test_mask) if m]
        accs.append(accuracy(fit(train, k, n_components), test))
    return CrossValidation(tuple(accs), tuple(groups))


def save_model(model: DrowsinessModel, path: str | Path) -> None:
    """Write the model as versioned JSON; floats round-trip exactly."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "vector_names": list(VECTOR_NAMES),
        "dimension": model.dimension,
        "k": model.k,
        "kept": [int(i) for i in model.kept],
        "dropped": list(model.dropped),
        "mean": [float(v) for v in model.mean],
        "scale": [float(v) for v in model.scale],
        "pca_mean": [float(v) for v in model.pca_mean],
        "components": [[float(v) for v in row] for row in model.components],
        "train_proj": [[float(v) for v in row] for row in model.train_proj],
        "train_labels": list(model.train_labels),
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path: str | Path) -> DrowsinessModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a lidkit drowsiness model")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
    n_comp = len(doc["components"])
    return DrowsinessModel(
        kept=np.array(doc["kept"], dtype=int),
        mean=np.array(doc["mean"], dtype=float),
        scale=np.array(doc["scale"], dtype=float),
        pca_mean=np.array(doc["pca_mean"], dtype=float),
        components=np.array(doc["components"], dtype=float).reshape(n_comp, -1),
        train_proj=np.array(doc["train_proj"], dtype=float).reshape(-1, n_comp),
        train_labels=tuple(doc["train_labels"]),
        k=int(doc["k"]),
        dimension=int(doc["dimension"]),
        dropped=tuple(doc["dropped"]),
    )
