"""Hot numeric kernels with a numba path and a pure-numpy path.

Both paths implement the same contracts:

``distance_matrix(refs, cands, final_only)``
    ``(P, S)`` matrix of ADE (or FDE when ``final_only``) between every
    reference ``refs[p]`` and candidate ``cands[s]``.
``risk_and_grad(points, weights, cands, k, final_only)``
    Weighted min-over-prefix risk and its subgradient w.r.t. ``cands``.
``adam_descent(...)``
    The full fixed-step Adam loop on ``risk_and_grad``.
``lloyd(X, centroids, max_iters)``
    Lloyd iterations on row vectors.

Argmin ties always resolve to the lowest index. Norms below ``NORM_EPS``
contribute a zero subgradient.

The backend is picked once at import from ``TRAJSAMPLER_NO_NUMBA``; both
sets stay reachable through :data:`NUMPY` and :data:`NUMBA` for testing
and benchmarking.
"""
from __future__ import annotations

from types import SimpleNamespace

import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA, njit

NORM_EPS = 1e-12


# ---------------------------------------------------------------------------
# numpy implementations

def _distance_matrix_np(refs, cands, final_only):
    if final_only:
        diff = refs[:, None, -1, :] - cands[None, :, -1, :]
        return np.sqrt(np.sum(diff * diff, axis=-1))
    diff = refs[:, None, :, :] - cands[None, :, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1)).mean(axis=-1)


def _risk_and_grad_np(points, weights, cands, k, final_only):
    P, T = points.shape[0], points.shape[1]
    grad = np.zeros_like(cands)
    active = cands[:k]
    rows = np.arange(P)
    if final_only:
        diff = active[None, :, -1, :] - points[:, None, -1, :]  # (P, k, 2)
        norms = np.sqrt(np.sum(diff * diff, axis=-1))
        dist = norms
    else:
        diff = active[None, :, :, :] - points[:, None, :, :]  # (P, k, T, 2)
        norms = np.sqrt(np.sum(diff * diff, axis=-1))  # (P, k, T)
        dist = norms.mean(axis=-1)
    best = np.argmin(dist, axis=1)
    risk = float(np.sum(weights * dist[rows, best]))

    sel_diff = diff[rows, best]
    sel_norm = norms[rows, best][..., None]
    safe = np.where(sel_norm > NORM_EPS, sel_norm, 1.0)
    unit = np.where(sel_norm > NORM_EPS, sel_diff / safe, 0.0)
    if final_only:
        np.add.at(grad[:, -1, :], best, weights[:, None] * unit)
    else:
        np.add.at(grad, best, (weights / T)[:, None, None] * unit)
    return risk, grad


def _adam_step_np(x, m, v, g, t, lr, beta1, beta2, eps):
    m = beta1 * m + (1.0 - beta1) * g
    v = beta2 * v + (1.0 - beta2) * (g * g)
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    x = x - lr * m_hat / (np.sqrt(v_hat) + eps)
    return x, m, v


def _adam_descent_np(points, weights, init, k, final_only, lrs, resets, beta1, beta2, eps,
                     stop_tol, stop_window):
    steps = lrs.shape[0]
    x = init.copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    risks = np.empty(steps + 1)
    best = x.copy()
    best_risk = np.inf
    best_step = 0
    n = 0
    t = 0
    for it in range(steps + 1):
        r, g = _risk_and_grad_np(points, weights, x, k, final_only)
        risks[it] = r
        n = it + 1
        if r < best_risk:
            best_risk = r
            best = x.copy()
            best_step = it
        if it == steps:
            break
        if stop_tol > 0.0 and it >= stop_window:
            ref = risks[it - stop_window]
            if ref - r < stop_tol * ref:
                break
        if resets[it]:
            m = np.zeros_like(x)
            v = np.zeros_like(x)
            t = 0
        t += 1
        x, m, v = _adam_step_np(x, m, v, g, t, lrs[it], beta1, beta2, eps)
    return best, x, risks[:n].copy(), best_step


def _lloyd_np(X, centroids, max_iters):
    c = centroids.copy()
    labels = np.full(X.shape[0], -1, dtype=np.int64)
    iters = 0
    for it in range(max_iters):
        d2 = np.sum((X[:, None, :] - c[None, :, :]) ** 2, axis=-1)
        new = np.argmin(d2, axis=1).astype(np.int64)
        iters = it + 1
        if np.array_equal(new, labels):
            break
        labels = new
        for j in range(c.shape[0]):
            members = labels == j
            if members.any():
                c[j] = X[members].mean(axis=0)
    return c, labels, iters


NUMPY = SimpleNamespace(
    name="numpy",
    distance_matrix=_distance_matrix_np,
    risk_and_grad=_risk_and_grad_np,
    adam_descent=_adam_descent_np,
    lloyd=_lloyd_np,
)


# ---------------------------------------------------------------------------
# numba implementations

@njit(cache=True)
def _distance_matrix_nb(refs, cands, final_only):
    P, T = refs.shape[0], refs.shape[1]
    S = cands.shape[0]
    out = np.empty((P, S))
    for p in range(P):
        for s in range(S):
            if final_only:
                dx = refs[p, T - 1, 0] - cands[s, T - 1, 0]
                dy = refs[p, T - 1, 1] - cands[s, T - 1, 1]
                out[p, s] = np.sqrt(dx * dx + dy * dy)
            else:
                acc = 0.0
                for t in range(T):
                    dx = refs[p, t, 0] - cands[s, t, 0]
                    dy = refs[p, t, 1] - cands[s, t, 1]
                    acc += np.sqrt(dx * dx + dy * dy)
                out[p, s] = acc / T
    return out


@njit(cache=True)
def _risk_and_grad_nb(points, weights, cands, k, final_only):
    P, T = points.shape[0], points.shape[1]
    grad = np.zeros_like(cands)
    risk = 0.0
    t0 = T - 1 if final_only else 0
    inv_t = 1.0 if final_only else 1.0 / T
    for p in range(P):
        best_s = 0
        best_d = np.inf
        for s in range(k):
            acc = 0.0
            for t in range(t0, T):
                dx = cands[s, t, 0] - points[p, t, 0]
                dy = cands[s, t, 1] - points[p, t, 1]
                acc += np.sqrt(dx * dx + dy * dy)
            d = acc * inv_t
            if d < best_d:
                best_d = d
                best_s = s
        w = weights[p]
        risk += w * best_d
        scale = w * inv_t
        for t in range(t0, T):
            dx = cands[best_s, t, 0] - points[p, t, 0]
            dy = cands[best_s, t, 1] - points[p, t, 1]
            nrm = np.sqrt(dx * dx + dy * dy)
            if nrm > NORM_EPS:
                grad[best_s, t, 0] += scale * dx / nrm
                grad[best_s, t, 1] += scale * dy / nrm
    return risk, grad


@njit(cache=True)
def _adam_descent_nb(points, weights, init, k, final_only, lrs, resets, beta1, beta2, eps,
                     stop_tol, stop_window):
    steps = lrs.shape[0]
    x = init.copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    risks = np.empty(steps + 1)
    best = x.copy()
    best_risk = np.inf
    best_step = 0
    n = 0
    flat_x = x.reshape(-1)
    flat_m = m.reshape(-1)
    flat_v = v.reshape(-1)
    t = 0
    for it in range(steps + 1):
        r, g = _risk_and_grad_nb(points, weights, x, k, final_only)
        risks[it] = r
        n = it + 1
        if r < best_risk:
            best_risk = r
            best[:] = x
            best_step = it
        if it == steps:
            break
        if stop_tol > 0.0 and it >= stop_window:
            ref = risks[it - stop_window]
            if ref - r < stop_tol * ref:
                break
        if resets[it]:
            flat_m[:] = 0.0
            flat_v[:] = 0.0
            t = 0
        t += 1
        lr = lrs[it]
        bc1 = 1.0 - beta1 ** t
        bc2 = 1.0 - beta2 ** t
        flat_g = g.reshape(-1)
        for i in range(flat_x.shape[0]):
            gi = flat_g[i]
            flat_m[i] = beta1 * flat_m[i] + (1.0 - beta1) * gi
            flat_v[i] = beta2 * flat_v[i] + (1.0 - beta2) * (gi * gi)
            m_hat = flat_m[i] / bc1
            v_hat = flat_v[i] / bc2
            flat_x[i] = flat_x[i] - lr * m_hat / (np.sqrt(v_hat) + eps)
    return best, x, risks[:n].copy(), best_step


@njit(cache=True)
def _lloyd_nb(X, centroids, max_iters):
    n, D = X.shape
    K = centroids.shape[0]
    c = centroids.copy()
    labels = np.full(n, -1, dtype=np.int64)
    sums = np.zeros((K, D))
    counts = np.zeros(K, dtype=np.int64)
    iters = 0
    for it in range(max_iters):
        iters = it + 1
        changed = False
        for i in range(n):
            best_j = 0
            best_d = np.inf
            for j in range(K):
                acc = 0.0
                for q in range(D):
                    diff = X[i, q] - c[j, q]
                    acc += diff * diff
                if acc < best_d:
                    best_d = acc
                    best_j = j
            if labels[i] != best_j:
                changed = True
                labels[i] = best_j
        if not changed:
            break
        sums[:] = 0.0
        counts[:] = 0
        for i in range(n):
            counts[labels[i]] += 1
            for q in range(D):
                sums[labels[i], q] += X[i, q]
        for j in range(K):
            if counts[j] > 0:
                for q in range(D):
                    c[j, q] = sums[j, q] / counts[j]
    return c, labels, iters


NUMBA = SimpleNamespace(
    name="numba",
    distance_matrix=_distance_matrix_nb,
    risk_and_grad=_risk_and_grad_nb,
    adam_descent=_adam_descent_nb,
    lloyd=_lloyd_nb,
) if HAVE_NUMBA else None

ACTIVE = NUMBA if USE_NUMBA else NUMPY


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def distance_matrix(refs, cands, final_only=False, backend=None):
    be = backend or ACTIVE
    return be.distance_matrix(_f64(refs), _f64(cands), bool(final_only))


def risk_and_grad(points, weights, cands, k, final_only=False, backend=None):
    be = backend or ACTIVE
    return be.risk_and_grad(_f64(points), _f64(weights), _f64(cands), int(k), bool(final_only))


def adam_descent(points, weights, init, k, final_only, lrs, resets, beta1, beta2, eps,
                 stop_tol=0.0, stop_window=32, backend=None):
    """Run ``len(lrs)`` Adam steps; step ``i`` uses learning rate ``lrs[i]``
    and first zeroes the moment estimates (and the bias-correction clock)
    when ``resets[i]`` is set.

    Returns ``(best, last, risks, best_step)`` where ``risks[i]`` is the risk
    after ``i`` steps.
    """
    be = backend or ACTIVE
    return be.adam_descent(
        _f64(points), _f64(weights), _f64(init), int(k), bool(final_only),
        _f64(lrs).reshape(-1), np.ascontiguousarray(resets, dtype=np.bool_).reshape(-1),
        float(beta1), float(beta2), float(eps),
        float(stop_tol), int(stop_window),
    )


def lloyd(X, centroids, max_iters, backend=None):
    be = backend or ACTIVE
    return be.lloyd(_f64(X), _f64(centroids), int(max_iters))
