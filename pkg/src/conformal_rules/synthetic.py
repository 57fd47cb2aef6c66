"""Seeded synthetic multi-label data.

:func:`make_emotions_like` is the stand-in for the emotions benchmark when the
real ARFF file is unavailable: same shape (593 x 72, 6 labels), features driven
by a few latent factors, and labels that share those factors so they are
correlated (some positively, some negatively) and imbalanced.
"""

import numpy as np

from .data import MultiLabelDataset


def make_emotions_like(n: int = 593, n_features: int = 72, seed: int = 0,
                       n_latent: int = 4, feature_noise: float = 0.35,
                       label_noise: float = 0.6) -> MultiLabelDataset:
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, n_latent))
    mixing = rng.normal(size=(n_latent, n_features)) / np.sqrt(n_latent)
    features = z @ mixing + feature_noise * rng.normal(size=(n, n_features))
    # label loadings on the latent factors: pairs 0/3 and 1/4 pull in opposite
    # directions, 2 and 5 overlap with their neighbours
    loadings = np.array([
        [1.6, 0.0, 0.4, -1.6, 0.0, 0.8],
        [0.0, 1.6, 0.8, 0.0, -1.6, 0.0],
        [0.6, 0.6, 1.2, 0.0, 0.0, -1.2],
        [0.0, 0.0, 0.0, 0.8, 0.8, 0.8],
    ])[:n_latent]
    # negative offsets make positives the minority (about 30% per label)
    offsets = np.array([-0.9, -0.6, -1.0, -0.8, -1.1, -1.2])
    logits = z @ loadings + offsets + label_noise * rng.normal(size=(n, 6))
    labels = (logits > 0).astype(np.int8)
    return MultiLabelDataset(
        features=features,
        labels=labels,
        feature_names=[f"f{j}" for j in range(n_features)],
        label_names=[f"label{k}" for k in range(6)],
    )


def make_exchangeable(n: int = 600, n_features: int = 5, seed: int = 0) -> MultiLabelDataset:
    """i.i.d. rows with a single label that depends noisily on the first two features."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(n, n_features))
    p = 1.0 / (1.0 + np.exp(-6.0 * (x[:, 0] + x[:, 1] - 1.0)))
    y = (rng.uniform(size=n) < p).astype(np.int8)[:, None]
    return MultiLabelDataset(x, y, [f"x{j}" for j in range(n_features)], ["y"])


def make_two_clusters(n_per_cluster: int = 20, seed: int = 0) -> MultiLabelDataset:
    """Two well separated 2-D blobs; the label is 1 exactly on the blob around (0.8, 0.8)."""
    rng = np.random.default_rng(seed)
    pos = rng.normal(loc=0.8, scale=0.05, size=(n_per_cluster, 2))
    neg = rng.normal(loc=0.2, scale=0.05, size=(n_per_cluster, 2))
    x = np.vstack([pos, neg])
    y = np.r_[np.ones(n_per_cluster), np.zeros(n_per_cluster)].astype(np.int8)[:, None]
    return MultiLabelDataset(x, y, ["x0", "x1"], ["y"])
