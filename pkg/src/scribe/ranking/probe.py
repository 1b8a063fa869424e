"""L1-regularized linear approximation of a trained model's bucket logit.

Coordinate-descent lasso from named input features (vocabulary tokens plus
bucket-presence indicators) to the logit a model assigns one bucket; the
surviving weights name the inputs the model actually leans on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse


@dataclass(frozen=True)
class ProbeDataset:
    X_text: sparse.csr_matrix
    X_ehr: np.ndarray
    feature_names: tuple[str, ...]  # text features then bucket names

    def design_matrix(self) -> np.ndarray:
        return np.hstack([self.X_text.toarray(), self.X_ehr])


def lasso_coordinate_descent(
    X: np.ndarray, y: np.ndarray, l1_strength: float,
    max_sweeps: int = 200, tol: float = 1e-7,
) -> tuple[np.ndarray, float]:
    """Minimize (1/2n)||y - Xw - b||^2 + l1*||w||_1 by cyclic coordinate descent.

    Sweeps alternate between the full coordinate set and the current active
    set (nonzero weights); convergence is declared only by a clean full pass,
    so the solution matches plain cyclic descent.
    """
    X = np.asfortranarray(X)
    n, d = X.shape
    w = np.zeros(d)
    col_sq = (X * X).sum(axis=0) / n
    b = float(y.mean())
    r = y - b  # residual of y - Xw - b

    def sweep(cols) -> float:
        nonlocal b
        max_delta = 0.0
        for j in cols:
            wj = w[j]
            rho = (X[:, j] @ r) / n + col_sq[j] * wj
            new = np.sign(rho) * max(abs(rho) - l1_strength, 0.0) / col_sq[j]
            if new != wj:
                r[:] -= X[:, j] * (new - wj)
                max_delta = max(max_delta, abs(new - wj))
                w[j] = new
        new_b = b + r.mean()
        r[:] -= new_b - b
        max_delta = max(max_delta, abs(new_b - b))
        b = new_b
        return max_delta

    usable = np.flatnonzero(col_sq > 0)
    sweeps = 0
    while sweeps < max_sweeps:
        delta = sweep(usable)
        sweeps += 1
        if delta < tol:
            break
        while sweeps < max_sweeps:
            active = np.flatnonzero(w)
            if active.size == 0:
                break
            delta = sweep(active)
            sweeps += 1
            if delta < tol:
                break
    return w, b


def linear_probe(
    model, bucket: int, probe_dataset: ProbeDataset, l1_strength: float = 1e-3
) -> list[tuple[str, float]]:
    """Nonzero (feature name, weight) pairs sorted by weight descending.

    The model only needs a bucket_logits(X_text, X_ehr) method.
    """
    logits = np.asarray(model.bucket_logits(probe_dataset.X_text, probe_dataset.X_ehr))
    y = logits[:, bucket]
    if float(y.std()) == 0.0:
        raise ValueError(f"probe targets for bucket {bucket} are constant")
    X = probe_dataset.design_matrix()
    w, _ = lasso_coordinate_descent(X, y, l1_strength)
    out = [(probe_dataset.feature_names[j], float(w[j]))
           for j in np.flatnonzero(w)]
    out.sort(key=lambda kv: (-kv[1], kv[0]))
    return out
