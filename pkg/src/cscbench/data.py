"""Synthetic Gaussian-cluster signals and a nearest-centroid head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateClassError, ShapeError


@dataclass
class SyntheticDatasetSpec:
    n_classes: int = 100
    dim: int = 100
    train_per_class: int = 100
    test_total: int = 2000
    noise_sigma: float = 0.3
    center_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.n_classes, self.dim, self.train_per_class, self.test_total) < 1:
            raise ShapeError("all dataset counts must be positive")
        if self.noise_sigma < 0:
            raise ShapeError("noise_sigma must be nonnegative")


@dataclass
class SyntheticDataset:
    centers: np.ndarray
    train_signals: np.ndarray
    train_labels: np.ndarray
    test_signals: np.ndarray
    test_labels: np.ndarray


def generate_dataset(spec):
    """Class centers from a seeded uniform cube; samples = center + noise.

    Deterministic given the seed; the test split is stratified as evenly
    as possible across classes (remainder goes to the lowest labels).
    """
    rng = np.random.default_rng(spec.seed)
    centers = rng.uniform(
        -spec.center_scale, spec.center_scale, size=(spec.n_classes, spec.dim)
    )
    train_labels = np.repeat(np.arange(spec.n_classes), spec.train_per_class)
    train_signals = centers[train_labels] + spec.noise_sigma * rng.standard_normal(
        (train_labels.size, spec.dim)
    )
    per_class = spec.test_total // spec.n_classes
    remainder = spec.test_total - per_class * spec.n_classes
    counts = np.full(spec.n_classes, per_class)
    counts[:remainder] += 1
    test_labels = np.repeat(np.arange(spec.n_classes), counts)
    test_signals = centers[test_labels] + spec.noise_sigma * rng.standard_normal(
        (test_labels.size, spec.dim)
    )
    return SyntheticDataset(
        centers=centers,
        train_signals=train_signals,
        train_labels=train_labels,
        test_signals=test_signals,
        test_labels=test_labels,
    )


def classify(train_codes, train_labels, test_codes, test_labels):
    """Nearest-class-centroid accuracy in code space."""
    train_codes = np.asarray(train_codes, dtype=float)
    test_codes = np.asarray(test_codes, dtype=float)
    train_labels = np.asarray(train_labels)
    test_labels = np.asarray(test_labels)
    if train_codes.shape[0] != train_labels.shape[0]:
        raise ShapeError("one label per training code required")
    if test_codes.shape[0] != test_labels.shape[0]:
        raise ShapeError("one label per test code required")
    classes = np.unique(np.concatenate([train_labels, test_labels]))
    centroids = np.empty((classes.size, train_codes.shape[1]))
    for idx, cls in enumerate(classes):
        members = train_codes[train_labels == cls]
        if members.shape[0] == 0:
            raise DegenerateClassError(f"class {cls} has no training samples")
        centroids[idx] = members.mean(axis=0)
    distances = (
        np.sum(test_codes**2, axis=1)[:, None]
        - 2.0 * test_codes @ centroids.T
        + np.sum(centroids**2, axis=1)[None, :]
    )
    predictions = classes[np.argmin(distances, axis=1)]
    return float(np.mean(predictions == test_labels))
