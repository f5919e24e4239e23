"""Desk-scale dense classifier head.

Mean-pool over time of the frontend output, one rectified hidden layer,
C-way softmax.  Deliberately small: the gradient path through the frontend
is the object of study, the backend just has to be learnable in minutes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BackendModel:
    w1: np.ndarray  # (H, F)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (C, H)
    b2: np.ndarray  # (C,)

    @property
    def n_features(self):
        return self.w1.shape[1]

    @property
    def n_hidden(self):
        return self.w1.shape[0]

    @property
    def n_classes(self):
        return self.w2.shape[0]


def init_backend(n_features: int, n_hidden: int, n_classes: int, seed: int) -> BackendModel:
    """He-scaled weights for the rectified layer, zero biases."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0xB4C])))
    w1 = rng.standard_normal((n_hidden, n_features)) * np.sqrt(2.0 / n_features)
    w2 = rng.standard_normal((n_classes, n_hidden)) * np.sqrt(2.0 / n_hidden)
    return BackendModel(w1, np.zeros(n_hidden), w2, np.zeros(n_classes))


def backend_forward(model: BackendModel, features: np.ndarray):
    """features (B, F) -> (logits (B, C), hidden cache for backward)."""
    pre = features @ model.w1.T + model.b1
    hidden = np.maximum(pre, 0.0)
    logits = hidden @ model.w2.T + model.b2
    return logits, (features, pre, hidden)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch; returns (loss, dloss/dlogits, probs)."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    expv = np.exp(shifted)
    probs = expv / expv.sum(axis=1, keepdims=True)
    B = logits.shape[0]
    picked = probs[np.arange(B), labels]
    loss = float(-np.mean(np.log(picked)))
    dlogits = probs.copy()
    dlogits[np.arange(B), labels] -= 1.0
    return loss, dlogits / B, probs


def backend_backward(model: BackendModel, cache, dlogits: np.ndarray):
    """Gradients of the dense head; returns (dfeatures, dw1, db1, dw2, db2)."""
    features, pre, hidden = cache
    dw2 = dlogits.T @ hidden
    db2 = dlogits.sum(axis=0)
    dhidden = dlogits @ model.w2
    dpre = dhidden * (pre > 0.0)
    dw1 = dpre.T @ features
    db1 = dpre.sum(axis=0)
    dfeatures = dpre @ model.w1
    return dfeatures, dw1, db1, dw2, db2
