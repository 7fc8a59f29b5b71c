"""Compiled inner loops for the solvers.

These kernels are called through the public functions in `solvers`; they
take plain arrays plus integer codes for the loss (0 squared, 1 logistic)
and regularizer (0 none, 1 l1, 2 l2_squared, 3 box). Feature matrices
arrive transposed (p, n) for the coordinate kernels so column sweeps are
contiguous. RNG draws use numpy Generators, which numba consumes with
bit-identical streams.
"""

import numpy as np
from numba import njit

# keep IEEE NaN/inf semantics: no nnan/ninf flags
FASTMATH = {"reassoc", "contract", "arcp", "nsz"}


@njit(cache=True, fastmath=FASTMATH, error_model="numpy", inline="always")
def _prox1(kind, v, tau, lo, hi):
    if kind == 0:
        return v
    if kind == 1:
        if v > tau:
            return v - tau
        if v < -tau:
            return v + tau
        return 0.0
    if kind == 2:
        return v / (1.0 + tau)
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


@njit(cache=True, fastmath=FASTMATH, error_model="numpy", inline="always")
def _clipped_mean_grad(XT, resid, y, j, loss, c, n):
    """Average over samples of the clipped j-th gradient coordinate.

    Clipping is min/max arithmetic, not branches: thresholds sit inside
    the data range, so branches here would be unpredictable.
    """
    s = 0.0
    if loss == 0:
        for i in range(n):
            g = 2.0 * XT[j, i] * resid[i]
            s += min(max(g, -c), c)
    else:
        for i in range(n):
            m = resid[i]
            if m > 0.0:
                e = np.exp(-m)
                f = e / (1.0 + e)
            else:
                f = 1.0 / (1.0 + np.exp(m))
            g = -y[i] * XT[j, i] * f
            s += min(max(g, -c), c)
    return s / n


@njit(cache=True, fastmath=FASTMATH, error_model="numpy")
def _refresh_resid(XT, y, w, resid, loss):
    p, n = XT.shape
    nonzero = False
    for j in range(p):
        if w[j] != 0.0:
            nonzero = True
            break
    if not nonzero:                      # common w = 0 start: skip the matvec
        for i in range(n):
            resid[i] = -y[i] if loss == 0 else 0.0
        return resid
    for i in range(n):
        z = 0.0
        for j in range(p):
            z += XT[j, i] * w[j]
        resid[i] = z - y[i] if loss == 0 else y[i] * z
    return resid


@njit(cache=True, fastmath=FASTMATH, error_model="numpy")
def dp_cd_kernel(XT, y, loss, reg, lam, lo, hi, gamma, sigma, thresh,
                 T, K, w0, snapshot_stride, snapshot_raw, rng):
    """Two-level noisy proximal coordinate descent.

    Outer t: theta starts at the current average point. Inner k: pick a
    uniform coordinate, perturb its clipped gradient with N(0, sigma_j^2),
    take a prox step. The average of the K inner iterates (theta^0
    excluded) becomes the next outer point. Snapshots are taken every
    `snapshot_stride` global iterations: the running inner average by
    default, the raw iterate when snapshot_raw is nonzero.

    Returns (w_priv, snapshots).
    """
    p, n = XT.shape
    theta = w0.copy()
    resid = np.empty(n)
    _refresh_resid(XT, y, theta, resid, loss)

    n_snaps = (T * K) // snapshot_stride
    snaps = np.empty((n_snaps, p))
    snap_idx = 0

    acc = np.zeros(p)          # lazy running sums of theta^1..theta^k per coordinate
    last = np.zeros(p, dtype=np.int64)
    updates = 0
    refresh_every = n * p

    for t in range(T):
        acc[:] = 0.0
        last[:] = 0
        for k in range(1, K + 1):
            j = rng.integers(0, p)
            grad = _clipped_mean_grad(XT, resid, y, j, loss, thresh[j], n)
            eta = sigma[j] * rng.standard_normal()
            v = theta[j] - gamma[j] * (grad + eta)
            new = _prox1(reg, v, gamma[j] * lam,
                         lo[j] if reg == 3 else 0.0,
                         hi[j] if reg == 3 else 0.0)
            d = new - theta[j]
            if d != 0.0:
                # bank theta_j's old value over iterates last[j]+1 .. k-1
                acc[j] += theta[j] * (k - 1 - last[j])
                acc[j] += new
                last[j] = k
                theta[j] = new
                if loss == 0:
                    for i in range(n):
                        resid[i] += d * XT[j, i]
                else:
                    for i in range(n):
                        resid[i] += d * y[i] * XT[j, i]
                updates += 1
                if updates >= refresh_every:
                    _refresh_resid(XT, y, theta, resid, loss)
                    updates = 0
            g_iter = t * K + k
            if g_iter % snapshot_stride == 0 and snap_idx < n_snaps:
                if snapshot_raw != 0:
                    for jj in range(p):
                        snaps[snap_idx, jj] = theta[jj]
                else:
                    for jj in range(p):
                        # flush so acc holds full sums through iterate k
                        acc[jj] += theta[jj] * (k - last[jj])
                        last[jj] = k
                        snaps[snap_idx, jj] = acc[jj] / k
                snap_idx += 1
        for jj in range(p):
            acc[jj] += theta[jj] * (K - last[jj])
            theta[jj] = acc[jj] / K          # theta becomes the new outer point
        if t < T - 1:
            _refresh_resid(XT, y, theta, resid, loss)
    return theta, snaps


@njit(cache=True, fastmath=FASTMATH, error_model="numpy")
def dp_sgd_kernel(X, y, row_norms, loss, reg, lam, lo, hi, step, clip,
                  noise_std, batch_norm, q, steps, w0, snapshot_stride, rng):
    """Noisy projected/proximal SGD over Poisson-sampled batches.

    Each step releases the average of per-sample gradients clipped to
    l2-norm `clip`, normalized by the expected batch size `batch_norm`,
    plus N(0, noise_std^2 I). Snapshots record the iterate every
    `snapshot_stride` steps. Returns (w, snapshots).
    """
    n, p = X.shape
    w = w0.copy()
    grad = np.empty(p)
    perm = np.arange(n)

    n_snaps = steps // snapshot_stride
    snaps = np.empty((n_snaps, p))
    snap_idx = 0

    for s in range(steps):
        # Poisson sampling: Binomial batch size + uniform distinct indices
        if q >= 1.0:
            k = n
        else:
            k = rng.binomial(n, q)
        w_zero = True
        for jj in range(p):
            grad[jj] = 0.0
            if w[jj] != 0.0:
                w_zero = False
        for t in range(k):
            swap = t + rng.integers(0, n - t)
            tmp = perm[t]
            perm[t] = perm[swap]
            perm[swap] = tmp
            i = perm[t]
            z = 0.0
            if not w_zero:
                for jj in range(p):
                    z += X[i, jj] * w[jj]
            if loss == 0:
                a = 2.0 * (z - y[i])
            else:
                m = y[i] * z
                if m > 0.0:
                    e = np.exp(-m)
                    f = e / (1.0 + e)
                else:
                    f = 1.0 / (1.0 + np.exp(m))
                a = -y[i] * f
            gnorm = np.abs(a) * row_norms[i]
            if gnorm > clip:
                a *= clip / gnorm
            for jj in range(p):
                grad[jj] += a * X[i, jj]
        if noise_std > 0.0:
            noise = rng.standard_normal(p)
            for jj in range(p):
                grad[jj] = grad[jj] / batch_norm + noise_std * noise[jj]
        else:
            for jj in range(p):
                grad[jj] /= batch_norm
        for jj in range(p):
            v = w[jj] - step * grad[jj]
            w[jj] = _prox1(reg, v, step * lam,
                           lo[jj] if reg == 3 else 0.0,
                           hi[jj] if reg == 3 else 0.0)
        if (s + 1) % snapshot_stride == 0 and snap_idx < n_snaps:
            for jj in range(p):
                snaps[snap_idx, jj] = w[jj]
            snap_idx += 1
    return w, snaps


@njit(cache=True, fastmath=FASTMATH, error_model="numpy")
def reference_cd_kernel(XT, y, loss, reg, lam, lo, hi, gamma, tol, max_cycles, w0):
    """Cyclic exact proximal coordinate descent to high precision.

    Stops when the objective decrease over one full cycle drops below
    tol relative to the current objective, or after max_cycles cycles.
    Returns (w, objective, converged_flag, cycles_run).
    """
    p, n = XT.shape
    w = w0.copy()
    resid = np.empty(n)
    _refresh_resid(XT, y, w, resid, loss)

    def_obj = _objective_from_resid(resid, y, loss, n)
    prev = def_obj + _penalty(reg, lam, w, lo, hi)
    cycles = 0
    converged = False
    updates = 0
    refresh_every = n * p
    while cycles < max_cycles:
        for j in range(p):
            grad = _clipped_mean_grad(XT, resid, y, j, loss, np.inf, n)
            v = w[j] - gamma[j] * grad
            new = _prox1(reg, v, gamma[j] * lam,
                         lo[j] if reg == 3 else 0.0,
                         hi[j] if reg == 3 else 0.0)
            d = new - w[j]
            if d != 0.0:
                w[j] = new
                if loss == 0:
                    for i in range(n):
                        resid[i] += d * XT[j, i]
                else:
                    for i in range(n):
                        resid[i] += d * y[i] * XT[j, i]
                updates += 1
        if updates >= refresh_every:
            _refresh_resid(XT, y, w, resid, loss)
            updates = 0
        cycles += 1
        cur = _objective_from_resid(resid, y, loss, n) + _penalty(reg, lam, w, lo, hi)
        if prev - cur < tol * max(abs(prev), 1e-300):
            converged = True
            prev = cur
            break
        prev = cur
    _refresh_resid(XT, y, w, resid, loss)
    final = _objective_from_resid(resid, y, loss, n) + _penalty(reg, lam, w, lo, hi)
    return w, final, converged, cycles


@njit(cache=True, fastmath=FASTMATH, error_model="numpy")
def _objective_from_resid(resid, y, loss, n):
    s = 0.0
    if loss == 0:
        for i in range(n):
            s += resid[i] * resid[i]
    else:
        for i in range(n):
            m = resid[i]
            if m > 0.0:
                s += np.log1p(np.exp(-m))
            else:
                s += -m + np.log1p(np.exp(m))
    return s / n


@njit(cache=True, fastmath=FASTMATH, error_model="numpy")
def _penalty(reg, lam, w, lo, hi):
    p = w.shape[0]
    if reg == 0:
        return 0.0
    if reg == 1:
        s = 0.0
        for j in range(p):
            s += abs(w[j])
        return lam * s
    if reg == 2:
        s = 0.0
        for j in range(p):
            s += w[j] * w[j]
        return 0.5 * lam * s
    for j in range(p):
        if w[j] < lo[j] or w[j] > hi[j]:
            return np.inf
    return 0.0
