"""Dual-branch feedforward network for condition-bucket relevancy.

Text branch and EHR branch pass through separate ReLU dense layers; the
concatenated hidden states feed one sigmoid output unit per relevancy bucket.
Training is plain mini-batch SGD on summed per-bucket binary cross-entropy,
with backpropagation written out by hand so the gradient path is testable
against finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse


@dataclass
class NetworkConfig:
    hidden_text: int = 64
    hidden_ehr: int = 32
    epochs: int = 120
    batch_size: int = 64
    learning_rate: float = 0.25
    momentum: float = 0.9
    l2: float = 2e-4
    seed: int = 0


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class ConditionNetwork:
    W_t: np.ndarray
    b_t: np.ndarray
    W_e: np.ndarray
    b_e: np.ndarray
    W_o: np.ndarray
    b_o: np.ndarray
    initial_loss: float = float("nan")
    final_loss: float = float("nan")
    config: NetworkConfig = field(default_factory=NetworkConfig)

    @property
    def n_buckets(self) -> int:
        return self.W_o.shape[1]

    @classmethod
    def init(cls, n_text: int, n_ehr: int, n_buckets: int,
             config: NetworkConfig) -> "ConditionNetwork":
        rng = np.random.default_rng(config.seed)
        h_t, h_e = config.hidden_text, config.hidden_ehr
        return cls(
            W_t=_glorot(rng, n_text, h_t), b_t=np.zeros(h_t),
            W_e=_glorot(rng, n_ehr, h_e), b_e=np.zeros(h_e),
            W_o=_glorot(rng, h_t + h_e, n_buckets), b_o=np.zeros(n_buckets),
            config=config,
        )

    def logits(self, x_text, x_ehr: np.ndarray) -> np.ndarray:
        h_t = np.maximum(x_text @ self.W_t + self.b_t, 0.0)
        h_e = np.maximum(x_ehr @ self.W_e + self.b_e, 0.0)
        h = np.concatenate([np.asarray(h_t), np.asarray(h_e)], axis=-1)
        return h @ self.W_o + self.b_o

    def predict_proba(self, x_text, x_ehr: np.ndarray) -> np.ndarray:
        return _sigmoid(self.logits(x_text, x_ehr))

    def bucket_logits(self, X_text, X_ehr: np.ndarray) -> np.ndarray:
        return self.logits(X_text, X_ehr)

    def bucket_scores(self, x_text, x_ehr: np.ndarray, delay=None) -> np.ndarray:
        return self.predict_proba(x_text, x_ehr)

    def loss_and_grads(self, X_text, X_ehr: np.ndarray, Y: np.ndarray):
        """Mean over rows of the per-bucket BCE sum, plus all parameter gradients."""
        n = Y.shape[0]
        Z_t = X_text @ self.W_t + self.b_t
        H_t = np.maximum(np.asarray(Z_t), 0.0)
        Z_e = X_ehr @ self.W_e + self.b_e
        H_e = np.maximum(Z_e, 0.0)
        H = np.concatenate([H_t, H_e], axis=1)
        logits = H @ self.W_o + self.b_o
        P = _sigmoid(logits)
        eps = 1e-12
        loss = float(-np.mean(
            np.sum(Y * np.log(P + eps) + (1 - Y) * np.log(1 - P + eps), axis=1)
        ))

        d_logits = (P - Y) / n
        g_W_o = H.T @ d_logits
        g_b_o = d_logits.sum(axis=0)
        dH = d_logits @ self.W_o.T
        h_t = self.W_t.shape[1]
        dH_t = dH[:, :h_t] * (H_t > 0)
        dH_e = dH[:, h_t:] * (H_e > 0)
        g_W_t = np.asarray(X_text.T @ dH_t)
        g_b_t = dH_t.sum(axis=0)
        g_W_e = X_ehr.T @ dH_e
        g_b_e = dH_e.sum(axis=0)
        grads = {"W_t": g_W_t, "b_t": g_b_t, "W_e": g_W_e, "b_e": g_b_e,
                 "W_o": g_W_o, "b_o": g_b_o}
        return loss, grads

    def to_json(self) -> dict:
        return {
            "W_t": self.W_t.tolist(), "b_t": self.b_t.tolist(),
            "W_e": self.W_e.tolist(), "b_e": self.b_e.tolist(),
            "W_o": self.W_o.tolist(), "b_o": self.b_o.tolist(),
            "initial_loss": self.initial_loss, "final_loss": self.final_loss,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "ConditionNetwork":
        return cls(
            W_t=np.array(raw["W_t"]), b_t=np.array(raw["b_t"]),
            W_e=np.array(raw["W_e"]), b_e=np.array(raw["b_e"]),
            W_o=np.array(raw["W_o"]), b_o=np.array(raw["b_o"]),
            initial_loss=raw.get("initial_loss", float("nan")),
            final_loss=raw.get("final_loss", float("nan")),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ConditionNetwork":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def train_condition_network(
    X_text: sparse.spmatrix,
    X_ehr: np.ndarray,
    Y: np.ndarray,
    config: NetworkConfig | None = None,
) -> ConditionNetwork:
    config = config or NetworkConfig()
    n, n_text = X_text.shape
    if X_ehr.shape[0] != n or Y.shape[0] != n:
        raise ValueError("row counts of text, ehr and target matrices differ")
    net = ConditionNetwork.init(n_text, X_ehr.shape[1], Y.shape[1], config)
    X_text = sparse.csr_matrix(X_text)
    Y = Y.astype(float)

    net.initial_loss, _ = net.loss_and_grads(X_text, X_ehr, Y)
    rng = np.random.default_rng(config.seed + 1)
    params = ("W_t", "b_t", "W_e", "b_e", "W_o", "b_o")
    velocity = {name: np.zeros_like(getattr(net, name)) for name in params}
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            loss, grads = net.loss_and_grads(X_text[idx], X_ehr[idx], Y[idx])
            if not math.isfinite(loss):
                raise RuntimeError(
                    f"non-finite training loss {loss} at batch starting {lo}; "
                    f"lr={config.learning_rate} l2={config.l2}"
                )
            for name in params:
                p = getattr(net, name)
                g = grads[name]
                if config.l2 and name.startswith("W"):
                    g = g + config.l2 * p
                v = velocity[name]
                v *= config.momentum
                v -= config.learning_rate * g
                p += v
    net.final_loss, _ = net.loss_and_grads(X_text, X_ehr, Y)
    return net


def gradient_check(net: ConditionNetwork, X_text: np.ndarray, X_ehr: np.ndarray,
                   Y: np.ndarray, step: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients."""
    X_sp = sparse.csr_matrix(X_text)
    _, grads = net.loss_and_grads(X_sp, X_ehr, Y)
    worst = 0.0
    for name in ("W_t", "b_t", "W_e", "b_e", "W_o", "b_o"):
        p = getattr(net, name)
        g = grads[name]
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            ix = it.multi_index
            orig = p[ix]
            p[ix] = orig + step
            lp, _ = net.loss_and_grads(X_sp, X_ehr, Y)
            p[ix] = orig - step
            lm, _ = net.loss_and_grads(X_sp, X_ehr, Y)
            p[ix] = orig
            num = (lp - lm) / (2 * step)
            denom = max(abs(num) + abs(g[ix]), 1e-8)
            worst = max(worst, abs(num - g[ix]) / denom)
            it.iternext()
    return worst
