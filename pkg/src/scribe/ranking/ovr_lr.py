"""One-vs-rest logistic regression baselines for condition buckets.

Three variants share the machinery:

* TEXT_ONLY: per-bucket LR on the triage TF-IDF vector, trained against a
  1:1 seeded sample of negative rows.
* TEXT_EHR: trained only on rows where the bucket already appears in the
  patient history; at scoring time a bucket absent from history leaks
  through as eps_b, and both branches are multiplied by the bucket's
  empirical relevancy prior.
* TEXT_EHR_DELAY: TEXT_EHR plus the recency feature u = 1 - exp(-lambda_b d).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import sparse


class LrVariant(str, Enum):
    TEXT_ONLY = "TEXT_ONLY"
    TEXT_EHR = "TEXT_EHR"
    TEXT_EHR_DELAY = "TEXT_EHR_DELAY"


@dataclass
class LrConfig:
    iterations: int = 200
    learning_rate: float = 1.0
    l2: float = 1e-3
    min_positives: int = 10
    eps_leak: float = 1e-4
    seed: int = 0


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _fit_binary_lr(X: sparse.csr_matrix, y: np.ndarray, cfg: LrConfig):
    """Full-batch gradient descent; returns (weights, bias)."""
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(cfg.iterations):
        p = _sigmoid(np.asarray(X @ w) + b)
        err = (p - y) / n
        gw = np.asarray(X.T @ err) + cfg.l2 * w
        gb = err.sum()
        w -= cfg.learning_rate * gw
        b -= cfg.learning_rate * gb
    return w, float(b)


@dataclass
class OvrLrModel:
    variant: LrVariant
    weights: np.ndarray          # B x d; unlearned buckets stay zero
    biases: np.ndarray           # B
    learned: np.ndarray          # B, bool
    priors: np.ndarray           # B, empirical P(bucket relevant)
    eps_leak: float
    n_text_features: int
    excluded_buckets: tuple[int, ...] = ()
    delay_rates: dict[str, float] = field(default_factory=dict)

    @property
    def n_buckets(self) -> int:
        return len(self.biases)

    def bucket_scores(
        self, x_text: np.ndarray, ehr_presence: np.ndarray,
        delay: np.ndarray | None = None,
    ) -> np.ndarray:
        """Per-bucket relevancy scores for one context."""
        z = self.weights[:, : self.n_text_features] @ x_text + self.biases
        if self.variant is LrVariant.TEXT_EHR_DELAY:
            u = delay if delay is not None else np.zeros(self.n_buckets)
            z = z + self.weights[:, -1] * u
        p = _sigmoid(z)
        leak = self.eps_leak * self.priors
        if self.variant is LrVariant.TEXT_ONLY:
            return np.where(self.learned, p, leak)
        usable = self.learned & (ehr_presence > 0)
        return np.where(usable, p * self.priors, leak)

    def to_json(self) -> dict:
        return {
            "variant": self.variant.value,
            "weights": self.weights.tolist(),
            "biases": self.biases.tolist(),
            "learned": self.learned.astype(int).tolist(),
            "priors": self.priors.tolist(),
            "eps_leak": self.eps_leak,
            "n_text_features": self.n_text_features,
            "excluded_buckets": list(self.excluded_buckets),
            "delay_rates": self.delay_rates,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "OvrLrModel":
        return cls(
            variant=LrVariant(raw["variant"]),
            weights=np.array(raw["weights"]),
            biases=np.array(raw["biases"]),
            learned=np.array(raw["learned"], dtype=bool),
            priors=np.array(raw["priors"]),
            eps_leak=raw["eps_leak"],
            n_text_features=int(raw["n_text_features"]),
            excluded_buckets=tuple(raw.get("excluded_buckets", [])),
            delay_rates=dict(raw.get("delay_rates", {})),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "OvrLrModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def train_ovr_lr(
    X_text: sparse.spmatrix,
    X_ehr: np.ndarray,
    Y: np.ndarray,
    variant: LrVariant,
    config: LrConfig | None = None,
    delay_u: np.ndarray | None = None,
) -> OvrLrModel:
    """Fit one LR per bucket under the variant's training-row policy.

    Buckets with fewer than min_positives eligible positives are excluded
    from the learned set and score as eps_b * prior only.
    """
    cfg = config or LrConfig()
    X_text = sparse.csr_matrix(X_text)
    n, d_text = X_text.shape
    B = Y.shape[1]
    if variant is LrVariant.TEXT_EHR_DELAY and delay_u is None:
        raise ValueError("delay variant requires the delay feature matrix")
    d = d_text + (1 if variant is LrVariant.TEXT_EHR_DELAY else 0)

    rng = np.random.default_rng(cfg.seed)
    weights = np.zeros((B, d))
    biases = np.zeros(B)
    learned = np.zeros(B, dtype=bool)
    priors = Y.mean(axis=0)
    excluded: list[int] = []

    for b in range(B):
        y = Y[:, b]
        if variant is LrVariant.TEXT_ONLY:
            pos = np.flatnonzero(y == 1)
            neg = np.flatnonzero(y == 0)
            if len(pos) < cfg.min_positives or len(neg) == 0:
                excluded.append(b)
                continue
            take = rng.choice(neg, size=min(len(pos), len(neg)), replace=False)
            rows = np.concatenate([pos, take])
            Xb = X_text[rows]
            yb = y[rows]
        else:
            rows = np.flatnonzero(X_ehr[:, b] > 0)
            if (y[rows] == 1).sum() < cfg.min_positives:
                excluded.append(b)
                continue
            Xb = X_text[rows]
            yb = y[rows]
            if variant is LrVariant.TEXT_EHR_DELAY:
                Xb = sparse.hstack(
                    [Xb, sparse.csr_matrix(delay_u[rows, b][:, None])], format="csr"
                )
        w, bias = _fit_binary_lr(sparse.csr_matrix(Xb), yb, cfg)
        if variant is not LrVariant.TEXT_EHR_DELAY:
            weights[b, :d_text] = w
        else:
            weights[b] = w
        biases[b] = bias
        learned[b] = True

    return OvrLrModel(
        variant=variant,
        weights=weights,
        biases=biases,
        learned=learned,
        priors=priors,
        eps_leak=cfg.eps_leak,
        n_text_features=d_text,
        excluded_buckets=tuple(excluded),
    )
