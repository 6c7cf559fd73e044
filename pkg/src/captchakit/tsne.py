"""Exact O(n^2) t-SNE built from its pieces: perplexity-calibrated Gaussian
conditionals, symmetrized joint affinities, Student-t low-dimensional
affinities, and KL gradient descent with early exaggeration.

Affinity matrices keep a zero diagonal and are renormalized after the 1e-12
stability floor so they always sum to 1; sigma is the standard deviation of
the per-point Gaussian. Entropy for the perplexity equation is base 2.
"""

from __future__ import annotations

import csv

import numpy as np

from .rng import Rng

P_FLOOR = 1e-12
SIGMA_TOL = 1e-5
SIGMA_MAX_ITERS = 100


def pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances with an exactly zero diagonal."""
    x = np.asarray(x, dtype=np.float64)
    s = (x * x).sum(axis=1)
    d2 = s[:, None] + s[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def cond_p_row(d2_others: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian neighbor probabilities over the other points (the caller
    removes the self entry). Max-subtracted before exponentiation."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    d2 = np.asarray(d2_others, dtype=np.float64)
    if d2.size == 0:
        raise ValueError("a point needs at least one neighbor")
    z = -d2 / (2.0 * sigma * sigma)
    finite = np.isfinite(z)
    if not finite.any():
        raise ValueError("degenerate row: all neighbor distances are infinite")
    z = z - z[finite].max()
    p = np.where(finite, np.exp(z), 0.0)
    return p / p.sum()


def _row_entropy_bits(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def sigma_search(d2_others: np.ndarray, perplexity: float) -> float:
    """Bisection (with bracket doubling) for the sigma whose row entropy is
    log2(perplexity) within 1e-5 bits."""
    n = len(d2_others) + 1
    if not 1.0 < perplexity < n:
        raise ValueError(f"perplexity must be in (1, {n}), got {perplexity}")
    target = float(np.log2(perplexity))

    def entropy(sigma: float) -> float:
        return _row_entropy_bits(cond_p_row(d2_others, sigma))

    lo = hi = 1.0
    for _ in range(64):
        if entropy(hi) >= target:
            break
        hi *= 2.0
    for _ in range(64):
        if entropy(lo) <= target:
            break
        lo /= 2.0
    residual = np.inf
    for _ in range(SIGMA_MAX_ITERS):
        mid = (lo + hi) / 2.0
        h = entropy(mid)
        residual = h - target
        if abs(residual) < SIGMA_TOL:
            return mid
        if h > target:
            hi = mid
        else:
            lo = mid
    raise ValueError(
        f"sigma search did not converge in {SIGMA_MAX_ITERS} iterations, "
        f"entropy residual {residual:+.3e} bits"
    )


def cond_p_matrix(x: np.ndarray, perplexity: float) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic conditional affinities plus the calibrated sigmas."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    d2 = pairwise_sq_dists(x)
    cond = np.zeros((n, n), dtype=np.float64)
    sigmas = np.zeros(n, dtype=np.float64)
    others = np.arange(n)
    for i in range(n):
        mask = others != i
        sigmas[i] = sigma_search(d2[i, mask], perplexity)
        cond[i, mask] = cond_p_row(d2[i, mask], sigmas[i])
    return cond, sigmas


def _floor_and_normalize(m: np.ndarray) -> np.ndarray:
    off = ~np.eye(len(m), dtype=bool)
    m = np.where(off, np.maximum(m, P_FLOOR), 0.0)
    return m / m.sum()


def joint_p(cond: np.ndarray) -> np.ndarray:
    """Symmetrized joint distribution (p_ij + p_ji) / 2n, floored and
    renormalized."""
    cond = np.asarray(cond, dtype=np.float64)
    n = len(cond)
    if cond.shape != (n, n):
        raise ValueError(f"conditional matrix must be square, got {cond.shape}")
    if np.abs(cond.sum(axis=1) - 1.0).max() > 1e-9 or np.abs(np.diag(cond)).max() > 0:
        raise ValueError("conditional rows must sum to 1 with a zero diagonal")
    return _floor_and_normalize((cond + cond.T) / (2.0 * n))


def _student_numerators(y: np.ndarray) -> np.ndarray:
    num = 1.0 / (1.0 + pairwise_sq_dists(y))
    np.fill_diagonal(num, 0.0)
    return num


def q_student(y: np.ndarray) -> np.ndarray:
    """Student-t (1 degree of freedom) joint affinities of an embedding."""
    y = np.asarray(y, dtype=np.float64)
    if len(y) < 2:
        raise ValueError("need at least 2 embedded points")
    num = _student_numerators(y)
    return _floor_and_normalize(num / num.sum())


def kl_cost(p: np.ndarray, q: np.ndarray) -> float:
    """KL(P || Q); zero-probability p terms contribute nothing."""
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    mask = p > 0
    if (q[mask] == 0).any():
        raise ValueError("q is 0 where p > 0: KL divergence is infinite")
    return float((p[mask] * np.log(p[mask] / q[mask])).sum())


def kl_grad(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    """dC/dy for the Student-t embedding at fixed P."""
    num = _student_numerators(y)
    q = _floor_and_normalize(num / num.sum())
    w = (p - q) * num
    return 4.0 * (w.sum(axis=1)[:, None] * y - w @ y)


def embed(
    points: np.ndarray,
    dims: int = 2,
    perplexity: float = 30.0,
    iters: int = 1000,
    seed: int = 0,
) -> tuple[np.ndarray, list[float]]:
    """Gradient-descent embedding into 2 or 3 dimensions.

    P is exaggerated 4x for the first 50 iterations; momentum steps at 0.5
    until iteration 250 and 0.8 after; learning rate 100. The returned trace
    holds the KL cost per iteration, always measured against the plain P.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or len(x) < 4:
        raise ValueError(f"need at least 4 points as a 2-D array, got shape {x.shape}")
    if dims not in (2, 3):
        raise ValueError(f"embedding dims must be 2 or 3, got {dims}")
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")
    cond, _ = cond_p_matrix(x, perplexity)
    p = joint_p(cond)

    n = len(x)
    rng = Rng(seed)
    y = (rng.normal_block(n * dims) * 1e-4).reshape(n, dims)
    vel = np.zeros_like(y)
    trace: list[float] = []
    for it in range(iters):
        num = _student_numerators(y)
        q = _floor_and_normalize(num / num.sum())
        p_eff = p * 4.0 if it < 50 else p
        w = (p_eff - q) * num
        grad = 4.0 * (w.sum(axis=1)[:, None] * y - w @ y)
        momentum = 0.5 if it < 250 else 0.8
        vel = momentum * vel - 100.0 * grad
        y = y + vel
        trace.append(kl_cost(p, q))
    return y, trace


def write_embedding_csv(path, ids, labels, y: np.ndarray) -> None:
    """Rows of (id, label, y1, y2[, y3]) for external plotting."""
    if not (len(ids) == len(labels) == len(y)):
        raise ValueError(
            f"ids, labels, embedding disagree: {len(ids)}, {len(labels)}, {len(y)}"
        )
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "label"] + [f"y{d + 1}" for d in range(y.shape[1])])
        for i, lab, row in zip(ids, labels, y):
            writer.writerow([i, lab] + [f"{v:.8f}" for v in row])
