"""Independent reference implementations used to check the library."""

from __future__ import annotations

import itertools

import numpy as np

from gitm.nn import backward, forward


def km_enumerate(firings, consequents) -> tuple[float, float]:
    """Exact type-reduced interval: try every endpoint choice of every firing interval."""
    lo = np.array([f[0] for f in firings], dtype=float)
    hi = np.array([f[1] for f in firings], dtype=float)
    y = np.asarray(consequents, dtype=float)
    best_lo, best_hi = np.inf, -np.inf
    for pick in itertools.product((0, 1), repeat=len(y)):
        w = np.where(np.array(pick) == 1, hi, lo)
        if w.sum() <= 0:
            continue
        val = float(w @ y / w.sum())
        best_lo = min(best_lo, val)
        best_hi = max(best_hi, val)
    return best_lo, best_hi


def finite_difference_grads(net, x, proj, h=1e-5):
    """Central differences of ``sum(forward(net, x) * proj)`` w.r.t. params and input."""

    def loss(params=None, inp=None):
        saved = net.params.copy()
        if params is not None:
            net.params[...] = params
        stats = [(l.running_mean.copy(), l.running_var.copy()) for l in net.layers if hasattr(l, "running_mean")]
        out, _ = forward(net, x if inp is None else inp)
        # restore running statistics so every evaluation sees the same state
        for l, (m, v) in zip([l for l in net.layers if hasattr(l, "running_mean")], stats):
            l.running_mean[...] = m
            l.running_var[...] = v
        net.params[...] = saved
        return float((out * proj).sum())

    p0 = net.params.copy()
    gp = np.zeros_like(p0)
    for i in range(p0.size):
        up, dn = p0.copy(), p0.copy()
        up[i] += h
        dn[i] -= h
        gp[i] = (loss(params=up) - loss(params=dn)) / (2 * h)
    gx = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        up, dn = x.copy(), x.copy()
        up[idx] += h
        dn[idx] -= h
        gx[idx] = (loss(inp=up) - loss(inp=dn)) / (2 * h)
    return gp, gx


def analytic_grads(net, x, proj):
    _, cache = forward(net, x)
    gp, gx = backward(net, cache, proj)
    return gp.copy(), gx


def max_relative_error(a, b, floor=1e-4) -> float:
    """Largest ``|a - b| / max(|a|, |b|, floor)``.

    The floor keeps exactly-zero gradients (a bias feeding BatchNorm, say)
    from turning finite-difference rounding noise into a huge ratio.
    """
    a, b = np.ravel(a), np.ravel(b)
    if a.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float((np.abs(a - b) / scale).max())


def brute_force_kmeans(X, k=3) -> float:
    """Minimum within-cluster sum of squares over all k^n assignments with no empty cluster."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    best = np.inf
    for labels in itertools.product(range(k), repeat=n):
        labels = np.array(labels)
        if len(set(labels.tolist())) < k:
            continue
        total = 0.0
        for j in range(k):
            members = X[labels == j]
            total += ((members - members.mean(axis=0)) ** 2).sum()
        best = min(best, total)
    return float(best)


def covariance_eigen(X):
    """Eigenvalues (descending) and eigenvectors (rows) of the sample covariance."""
    C = np.cov(np.asarray(X, dtype=float), rowvar=False)
    vals, vecs = np.linalg.eigh(C)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order].T


def two_means_1d(values):
    """Lowest-cost split of 1-D values into two groups by checking every subset."""
    v = np.asarray(values, dtype=float)
    best, best_mask = np.inf, None
    for mask in itertools.product((False, True), repeat=v.size):
        m = np.array(mask)
        if m.all() or not m.any():
            continue
        cost = ((v[m] - v[m].mean()) ** 2).sum() + ((v[~m] - v[~m].mean()) ** 2).sum()
        if cost < best - 1e-15:
            best, best_mask = cost, m
    return best_mask


def adam_reference(p, grads, lr, b1, b2, eps):
    """Scalar Adam recurrence written out step by step."""
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1**t)
        vh = v / (1 - b2**t)
        p = p - lr * mh / (vh**0.5 + eps)
    return p
