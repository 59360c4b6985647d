"""Hot numeric kernels for the D2D power-control suite.

Every kernel has two implementations with identical semantics: a numba
@njit loop version and a vectorized pure-numpy version. The active one is
picked at import time by RECONXFER_BACKEND (see reconxfer.backend); both
stay importable so tests and the benchmark can compare them directly.

Conventions: gains are linear power gains with g[i, j] the gain from
transmitter j to receiver i, powers/noise in watts, rates in bit/s/Hz
(log base 2, bandwidth applied by callers).
"""

import numpy as np

from .backend import NUMBA_ENABLED, njit

_LN2 = float(np.log(2.0))


# ---------------------------------------------------------------------------
# link rates


def _link_rates_np(gains, powers, noise):
    total = np.einsum("bij,bj->bi", gains, powers) + noise
    direct = np.einsum("bii->bi", gains) * powers
    interf = total - direct
    return np.log2(total / interf)


@njit
def _link_rates_nb(gains, powers, noise):
    nsamples, n, _ = gains.shape
    rates = np.empty((nsamples, n))
    for b in range(nsamples):
        for i in range(n):
            tot = noise
            for j in range(n):
                tot += gains[b, i, j] * powers[b, j]
            direct = gains[b, i, i] * powers[b, i]
            rates[b, i] = np.log2(tot / (tot - direct))
    return rates


# ---------------------------------------------------------------------------
# rate objectives and their gradients w.r.t. transmit powers


def _sum_rate_grad_np(gains, powers, noise):
    total = np.einsum("bij,bj->bi", gains, powers) + noise
    gdiag = np.einsum("bii->bi", gains)
    direct = gdiag * powers
    interf = total - direct
    rates = np.log2(total / interf)
    inv_t = 1.0 / total
    inv_i = 1.0 / interf
    # d(sum_i r_i)/dp_k = [sum_i g_ik/T_i - sum_{i != k} g_ik/I_i] / ln 2
    gt_a = np.einsum("bij,bi->bj", gains, inv_t)
    gt_c = np.einsum("bij,bi->bj", gains, inv_i)
    grad = (gt_a - gt_c + gdiag * inv_i) / _LN2
    return rates, grad


@njit
def _sum_rate_grad_nb(gains, powers, noise):
    nsamples, n, _ = gains.shape
    rates = np.empty((nsamples, n))
    grad = np.zeros((nsamples, n))
    for b in range(nsamples):
        total = np.empty(n)
        interf = np.empty(n)
        for i in range(n):
            tot = noise
            for j in range(n):
                tot += gains[b, i, j] * powers[b, j]
            total[i] = tot
            interf[i] = tot - gains[b, i, i] * powers[b, i]
            rates[b, i] = np.log2(tot / interf[i])
        for k in range(n):
            acc = 0.0
            for i in range(n):
                acc += gains[b, i, k] / total[i]
                if i != k:
                    acc -= gains[b, i, k] / interf[i]
            grad[b, k] = acc / _LN2
    return rates, grad


def _min_rate_grad_np(gains, powers, noise):
    total = np.einsum("bij,bj->bi", gains, powers) + noise
    gdiag = np.einsum("bii->bi", gains)
    direct = gdiag * powers
    interf = total - direct
    rates = np.log2(total / interf)
    worst = np.argmin(rates, axis=1)
    rows = np.arange(gains.shape[0])
    g_w = gains[rows, worst, :]
    grad = g_w / total[rows, worst, None] - g_w / interf[rows, worst, None]
    grad[rows, worst] += gdiag[rows, worst] / interf[rows, worst]
    return rates, grad / _LN2


@njit
def _min_rate_grad_nb(gains, powers, noise):
    nsamples, n, _ = gains.shape
    rates = np.empty((nsamples, n))
    grad = np.zeros((nsamples, n))
    for b in range(nsamples):
        total = np.empty(n)
        interf = np.empty(n)
        worst = 0
        for i in range(n):
            tot = noise
            for j in range(n):
                tot += gains[b, i, j] * powers[b, j]
            total[i] = tot
            interf[i] = tot - gains[b, i, i] * powers[b, i]
            rates[b, i] = np.log2(tot / interf[i])
            if rates[b, i] < rates[b, worst]:
                worst = i
        for k in range(n):
            val = gains[b, worst, k] / total[worst]
            if k != worst:
                val -= gains[b, worst, k] / interf[worst]
            grad[b, k] = val / _LN2
    return rates, grad


# ---------------------------------------------------------------------------
# fractional-programming sum-rate solver (quadratic transform)
#
# The iteration is monotone but only reaches a stationary point; on small,
# strongly coupled networks the global optimum often shuts links off. The
# solver therefore runs one full-power start plus one single-link start per
# link (a link started at zero power stays off, so these polish the
# shut-off corners) and keeps the best final allocation.


def _fp_iterate_np(gains, p, pmax, noise, iters):
    gdiag = np.einsum("bii->bi", gains)
    for _ in range(iters):
        total = np.einsum("bij,bj->bi", gains, p) + noise
        direct = gdiag * p
        gamma = direct / (total - direct)
        y = np.sqrt(direct * (1.0 + gamma)) / total
        y2 = y * y
        denom = np.einsum("bij,bi->bj", gains, y2) ** 2
        p = np.minimum(y2 * (1.0 + gamma) * gdiag / denom, pmax)
    return p


def _fp_solve_np(gains, pmax, noise, iters):
    nsamples, n, _ = gains.shape
    best_p = _fp_iterate_np(gains, np.broadcast_to(pmax, (nsamples, n)).copy(),
                            pmax, noise, iters)
    best_val = _link_rates_np(gains, best_p, noise).sum(axis=1)
    for k in range(n):
        p0 = np.zeros((nsamples, n))
        p0[:, k] = pmax[k]
        p = _fp_iterate_np(gains, p0, pmax, noise, iters)
        val = _link_rates_np(gains, p, noise).sum(axis=1)
        better = val > best_val
        best_p[better] = p[better]
        best_val[better] = val[better]
    return best_p / pmax


@njit
def _fp_iterate_nb(gb, p, pmax, noise, iters):
    n = gb.shape[0]
    total = np.empty(n)
    gamma = np.empty(n)
    y2 = np.empty(n)
    for _ in range(iters):
        for i in range(n):
            tot = noise
            for j in range(n):
                tot += gb[i, j] * p[j]
            total[i] = tot
        for i in range(n):
            direct = gb[i, i] * p[i]
            gamma[i] = direct / (total[i] - direct)
            y = np.sqrt(direct * (1.0 + gamma[i])) / total[i]
            y2[i] = y * y
        for i in range(n):
            den = 0.0
            for j in range(n):
                den += gb[j, i] * y2[j]
            p[i] = min(y2[i] * (1.0 + gamma[i]) * gb[i, i] / (den * den), pmax[i])
    return p


@njit
def _fp_sum_rate_nb(gb, p, noise):
    n = gb.shape[0]
    val = 0.0
    for i in range(n):
        tot = noise
        for j in range(n):
            tot += gb[i, j] * p[j]
        val += np.log2(tot / (tot - gb[i, i] * p[i]))
    return val


@njit
def _fp_solve_nb(gains, pmax, noise, iters):
    nsamples, n, _ = gains.shape
    x = np.empty((nsamples, n))
    for b in range(nsamples):
        gb = gains[b]
        best_p = _fp_iterate_nb(gb, pmax.copy(), pmax, noise, iters)
        best_val = _fp_sum_rate_nb(gb, best_p, noise)
        for k in range(n):
            p0 = np.zeros(n)
            p0[k] = pmax[k]
            p = _fp_iterate_nb(gb, p0, pmax, noise, iters)
            val = _fp_sum_rate_nb(gb, p, noise)
            if val > best_val:
                best_val = val
                best_p = p
        for i in range(n):
            x[b, i] = best_p[i] / pmax[i]
    return x


# ---------------------------------------------------------------------------
# max-min rate via SINR-target bisection + interference fixed point


def _maxmin_solve_np(gains, pmax, noise, rate_tol, fp_iters):
    nsamples, n, _ = gains.shape
    gdiag = np.einsum("bii->bi", gains)
    offdiag = gains - gdiag[:, :, None] * np.eye(n)
    lo = np.zeros(nsamples)
    hi = np.log2(1.0 + np.min(gdiag * pmax / noise, axis=1))
    best = np.zeros((nsamples, n))
    while True:
        active = (hi - lo) > rate_tol
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        target = np.exp2(mid) - 1.0
        p = np.zeros((nsamples, n))
        feasible = np.ones(nsamples, dtype=bool)
        converged = ~active
        for _ in range(fp_iters):
            live = feasible & ~converged
            if not live.any():
                break
            interf = np.einsum("bij,bj->bi", offdiag[live], p[live]) + noise
            p_new = target[live, None] * interf / gdiag[live]
            over = (p_new > pmax).any(axis=1)
            done = np.abs(p_new - p[live]).max(axis=1) <= 1e-14 * pmax.max()
            p[live] = p_new
            idx = np.flatnonzero(live)
            feasible[idx[over]] = False
            converged[idx[done & ~over]] = True
        feasible &= converged
        ok = active & feasible
        lo[ok] = mid[ok]
        best[ok] = p[ok]
        bad = active & ~feasible
        hi[bad] = mid[bad]
    return best / pmax


@njit
def _maxmin_feasible_nb(gb, target, pmax, noise, fp_iters):
    n = gb.shape[0]
    p = np.zeros(n)
    nxt = np.empty(n)
    tol = 1e-14 * pmax.max()
    for _ in range(fp_iters):
        delta = 0.0
        for i in range(n):
            interf = noise
            for j in range(n):
                if j != i:
                    interf += gb[i, j] * p[j]
            nxt[i] = target * interf / gb[i, i]
            if nxt[i] > pmax[i]:
                return False, p
            d = abs(nxt[i] - p[i])
            if d > delta:
                delta = d
        for i in range(n):
            p[i] = nxt[i]
        if delta <= tol:
            return True, p
    return False, p


@njit
def _maxmin_solve_nb(gains, pmax, noise, rate_tol, fp_iters):
    nsamples, n, _ = gains.shape
    x = np.zeros((nsamples, n))
    for b in range(nsamples):
        gb = gains[b]
        lo = 0.0
        hi = np.log2(1.0 + gb[0, 0] * pmax[0] / noise)
        for i in range(1, n):
            r1 = np.log2(1.0 + gb[i, i] * pmax[i] / noise)
            if r1 < hi:
                hi = r1
        while (hi - lo) > rate_tol:
            mid = 0.5 * (lo + hi)
            target = 2.0 ** mid - 1.0
            ok, p = _maxmin_feasible_nb(gb, target, pmax, noise, fp_iters)
            if ok:
                lo = mid
                for i in range(n):
                    x[b, i] = p[i] / pmax[i]
            else:
                hi = mid
    return x


# ---------------------------------------------------------------------------
# dispatch


def link_rates(gains, powers, noise):
    """Per-link achievable rates in bit/s/Hz for a batch of networks."""
    if NUMBA_ENABLED:
        return _link_rates_nb(gains, powers, noise)
    return _link_rates_np(gains, powers, noise)


def sum_rate_grad(gains, powers, noise):
    """Rates plus the gradient of sum_i r_i w.r.t. the power vector."""
    if NUMBA_ENABLED:
        return _sum_rate_grad_nb(gains, powers, noise)
    return _sum_rate_grad_np(gains, powers, noise)


def min_rate_grad(gains, powers, noise):
    """Rates plus the (sub)gradient of min_i r_i taken at the worst link."""
    if NUMBA_ENABLED:
        return _min_rate_grad_nb(gains, powers, noise)
    return _min_rate_grad_np(gains, powers, noise)


def fp_solve(gains, pmax, noise, iters=100):
    """Sum-rate power control by the quadratic-transform iteration.

    Starts from full power; returns power fractions in [0, 1]. The sum
    rate is non-decreasing across iterations.
    """
    pmax = np.asarray(pmax, dtype=np.float64)
    if NUMBA_ENABLED:
        return _fp_solve_nb(gains, pmax, noise, iters)
    return _fp_solve_np(gains, pmax, noise, iters)


def maxmin_solve(gains, pmax, noise, rate_tol=1e-4, fp_iters=5000):
    """Max-min rate power control.

    Bisection on the common rate target; each candidate SINR target is
    checked with the standard-interference fixed point started from zero
    power (monotone, so exceeding pmax at any sweep proves infeasibility).
    Returns the allocation of the highest feasible target, whose min rate
    is within rate_tol (bit/s/Hz) of the optimum.
    """
    pmax = np.asarray(pmax, dtype=np.float64)
    if NUMBA_ENABLED:
        return _maxmin_solve_nb(gains, pmax, noise, rate_tol, fp_iters)
    return _maxmin_solve_np(gains, pmax, noise, rate_tol, fp_iters)
