"""Hot kernels with numba and pure-numpy implementations.

Every public function here dispatches on :func:`dyadicw._config.jit_enabled`.
The two paths compute the same quantities.  Both MVEE solvers use constraint
generation, but the numba one warm-starts each batch entry from the support
of the previous one, so the two may land on different (equally valid)
tol-approximate solutions.
"""

from __future__ import annotations

import numba
import numpy as np
from numba import njit, prange

# the bundled TBB is too old on some systems; prefer OpenMP and avoid the warning
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

from ._config import jit_enabled

# ---------------------------------------------------------------------------
# symmetric eigendecomposition (cyclic Jacobi)


@njit(cache=True)
def _jacobi_one(A, w, Q, tol, max_sweeps):
    n = A.shape[0]
    for i in range(n):
        for j in range(n):
            Q[i, j] = 1.0 if i == j else 0.0
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += A[i, j] * A[i, j]
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * A[i, j] * A[i, j]
        if off <= tol * tol * fro:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                for k in range(n):
                    qkp = Q[k, p]
                    qkq = Q[k, q]
                    Q[k, p] = c * qkp - s * qkq
                    Q[k, q] = s * qkp + c * qkq
    for i in range(n):
        w[i] = A[i, i]


@njit(cache=True, parallel=True)
def _jacobi_batch(A, tol, max_sweeps):
    b, n, _ = A.shape
    w = np.empty((b, n))
    Q = np.empty((b, n, n))
    for i in prange(b):
        work = A[i].copy()
        _jacobi_one(work, w[i], Q[i], tol, max_sweeps)
    return w, Q


def sym_eig(A: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors of a stack of real symmetric matrices.

    Returns eigenvalues in ascending order per matrix, with eigenvectors in
    the columns of the second output.
    """
    A = np.asarray(A, dtype=float)
    shape = A.shape
    flat = np.ascontiguousarray(A.reshape((-1,) + shape[-2:]))
    flat = 0.5 * (flat + np.swapaxes(flat, 1, 2))
    if jit_enabled():
        w, Q = _jacobi_batch(flat, tol, 60)
        order = np.argsort(w, axis=1)
        w = np.take_along_axis(w, order, axis=1)
        Q = np.take_along_axis(Q, order[:, None, :], axis=2)
    else:
        w, Q = np.linalg.eigh(flat)
    return w.reshape(shape[:-1]), Q.reshape(shape)


# ---------------------------------------------------------------------------
# per-cube power sums  mean_{cells c in I} |P_c e_i|^p


@njit(cache=True, parallel=True)
def _power_sums_jit(P, E, p, level):
    ncell, n, _ = P.shape
    m = E.shape[0]
    nc = 1 << level
    per = ncell // nc
    out = np.zeros((nc, m))
    half = 0.5 * p
    for q in prange(nc):
        v = np.empty(n)
        for c in range(q * per, (q + 1) * per):
            for i in range(m):
                s = 0.0
                for a in range(n):
                    t = 0.0
                    for b in range(n):
                        t += P[c, a, b] * E[i, b]
                    s += t * t
                if half == 1.0:
                    out[q, i] += s
                else:
                    out[q, i] += s ** half
        for i in range(m):
            out[q, i] /= per
    return out


def _power_sums_np(P, E, p, level, chunk=1 << 14):
    ncell = P.shape[0]
    per = ncell // (1 << level)
    vals = np.empty((ncell, E.shape[0]))
    for s in range(0, ncell, chunk):
        v = np.einsum("cab,mb->cma", P[s:s + chunk], E)
        vals[s:s + chunk] = ((v * v).sum(axis=2)) ** (0.5 * p)
    return vals.reshape(1 << level, per, -1).mean(axis=1)


def power_sums(P: np.ndarray, E: np.ndarray, p: float, level: int) -> np.ndarray:
    """Averages over each level-``level`` cube of ``|P_c e_i|^p``.

    Parameters
    ----------
    P : ndarray (2**L, n, n)
        Cellwise matrices.
    E : ndarray (m, n)
        Directions.
    """
    P = np.ascontiguousarray(P, dtype=float)
    E = np.ascontiguousarray(E, dtype=float)
    if jit_enabled():
        return _power_sums_jit(P, E, float(p), int(level))
    return _power_sums_np(P, E, float(p), int(level))


# ---------------------------------------------------------------------------
# centered minimum-volume enclosing ellipsoid, dual log-barrier Newton
#
# maximise log det X(u) + mu * sum log u_i over the simplex, X(u) = sum u_i y_i y_i^T,
# driving mu -> 0 until max_i y_i^T X^{-1} y_i <= n (1 + tol).  The Hessian of
# log det X(u) is -(G o G) with G = Y X^{-1} Y^T of rank n, so each Newton step
# costs O(k r^2) through the Woodbury identity with r = n(n+1)/2.


@njit(cache=True)
def _chol(A, n):
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= A[j, k] * A[j, k]
        if not s > 0.0:
            return False
        d = np.sqrt(s)
        A[j, j] = d
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= A[i, k] * A[j, k]
            A[i, j] = s / d
    return True


@njit(cache=True)
def _moments(Y, idx, k, u, L, Z, M):
    n = Y.shape[1]
    for a in range(n):
        for b in range(a + 1):
            s = 0.0
            for t in range(k):
                i = idx[t]
                s += u[t] * Y[i, a] * Y[i, b]
            L[a, b] = s
    if not _chol(L, n):
        return -np.inf
    ld = 0.0
    for a in range(n):
        ld += 2.0 * np.log(L[a, a])
    for t in range(k):
        i = idx[t]
        mm = 0.0
        for a in range(n):
            s = Y[i, a]
            for q in range(a):
                s -= L[a, q] * Z[t, q]
            s /= L[a, a]
            Z[t, a] = s
            mm += s * s
        M[t] = mm
    return ld


@njit(cache=True)
def _barrier(Y, idx, k, tol, max_newton, u, un, L, Ln, Z, Zn, M, Mn, Phi, g, linv, d, S, rhs):
    n = Y.shape[1]
    r = n * (n + 1) // 2
    for t in range(k):
        u[t] = 1.0 / k
    mu = 1.0 / k
    ld = _moments(Y, idx, k, u, L, Z, M)
    if ld == -np.inf:
        return -1
    slog = k * np.log(1.0 / k)
    sq2 = np.sqrt(2.0)
    it = 0
    while it < max_newton:
        mmax = 0.0
        for t in range(k):
            if M[t] > mmax:
                mmax = M[t]
        if mmax <= n * (1.0 + tol):
            return it
        if mu < 1e-300:
            return -4
        for a in range(r):
            for b in range(r):
                S[a, b] = 1.0 if a == b else 0.0
            rhs[a, 0] = 0.0
            rhs[a, 1] = 0.0
        for t in range(k):
            q = 0
            for a in range(n):
                for b in range(a, n):
                    Phi[t, q] = Z[t, a] * Z[t, a] if a == b else sq2 * Z[t, a] * Z[t, b]
                    q += 1
            g[t] = M[t] + mu / u[t]
            w = u[t] * u[t] / mu
            linv[t] = w
            for a in range(r):
                pa = Phi[t, a] * w
                rhs[a, 0] += pa * g[t]
                rhs[a, 1] += pa
                for b in range(a + 1):
                    S[a, b] += pa * Phi[t, b]
        _chol(S, r)
        for c in range(2):
            for a in range(r):
                s = rhs[a, c]
                for q in range(a):
                    s -= S[a, q] * rhs[q, c]
                rhs[a, c] = s / S[a, a]
            for a in range(r - 1, -1, -1):
                s = rhs[a, c]
                for q in range(a + 1, r):
                    s -= S[q, a] * rhs[q, c]
                rhs[a, c] = s / S[a, a]
        sg = 0.0
        s1 = 0.0
        for t in range(k):
            pg = 0.0
            p1 = 0.0
            for a in range(r):
                pg += Phi[t, a] * rhs[a, 0]
                p1 += Phi[t, a] * rhs[a, 1]
            Mn[t] = linv[t] * (g[t] - pg)
            d[t] = linv[t] * (1.0 - p1)
            sg += Mn[t]
            s1 += d[t]
        nu = sg / s1
        lam2 = 0.0
        tmax = 1.0
        for t in range(k):
            d[t] = Mn[t] - nu * d[t]
            lam2 += d[t] * (g[t] - nu)
            if d[t] < 0.0:
                tt = -0.99 * u[t] / d[t]
                if tt < tmax:
                    tmax = tt
        if not lam2 >= 0.0:
            return -2
        dec = np.sqrt(lam2 / mu)
        step = tmax
        phi0 = ld + mu * slog
        ok = False
        ldn = 0.0
        sl = 0.0
        for _ in range(60):
            sl = 0.0
            for t in range(k):
                un[t] = u[t] + step * d[t]
                sl += np.log(un[t])
            ldn = _moments(Y, idx, k, un, Ln, Zn, Mn)
            if ldn + mu * sl >= phi0 + 0.25 * step * lam2 - 1e-13 * (1.0 + abs(phi0)):
                ok = True
                break
            step *= 0.5
        if not ok:
            return -2
        ld = ldn
        slog = sl
        for t in range(k):
            u[t] = un[t]
            M[t] = Mn[t]
            for a in range(n):
                Z[t, a] = Zn[t, a]
        for a in range(n):
            for b in range(n):
                L[a, b] = Ln[a, b]
        it += 1
        if dec < 0.25:
            mu *= 0.1
    return -3


@njit(cache=True)
def _mvee_batch_jit(Ys, tol, max_newton, start):
    nb, m, n = Ys.shape
    r = n * (n + 1) // 2
    Ls = np.zeros((nb, n, n))
    Mmax = np.empty(nb)
    Mmin = np.empty(nb)
    iters = np.zeros(nb, np.int64)
    u = np.empty(m)
    un = np.empty(m)
    L = np.zeros((n, n))
    Ln = np.zeros((n, n))
    Z = np.empty((m, n))
    Zn = np.empty((m, n))
    M = np.empty(m)
    Mn = np.empty(m)
    Phi = np.empty((m, r))
    g = np.empty(m)
    linv = np.empty(m)
    d = np.empty(m)
    S = np.empty((r, r))
    rhs = np.empty((r, 2))
    active = np.zeros(m, np.bool_)
    prev = np.zeros(m, np.bool_)
    idx = np.empty(m, np.int64)
    z = np.empty(n)
    stride = max(1, m // start)
    for b in range(nb):
        Y = Ys[b]
        total = 0
        done = False
        mx = 0.0
        mn = np.inf
        k = 0
        for attempt in range(2):
            for i in range(m):
                if attempt == 0:
                    active[i] = prev[i] or (i % stride == 0)
                else:
                    active[i] = True
            for _ in range(m + 1):
                k = 0
                for i in range(m):
                    if active[i]:
                        idx[k] = i
                        k += 1
                it = _barrier(Y, idx, k, tol, max_newton, u, un, L, Ln, Z, Zn, M, Mn, Phi, g, linv, d, S, rhs)
                if it < 0:
                    break
                total += it
                added = 0
                mx = 0.0
                mn = np.inf
                for i in range(m):
                    mm = 0.0
                    for a in range(n):
                        s = Y[i, a]
                        for q in range(a):
                            s -= L[a, q] * z[q]
                        s /= L[a, a]
                        z[a] = s
                        mm += s * s
                    if mm > mx:
                        mx = mm
                    if mm < mn:
                        mn = mm
                    if mm > n * (1.0 + tol) and not active[i]:
                        active[i] = True
                        added += 1
                if added == 0:
                    done = True
                    break
            if done:
                break
        iters[b] = total if done else -1
        for i in range(m):
            prev[i] = False
        if done:
            for t in range(k):
                if u[t] > 1e-3 / k:
                    prev[idx[t]] = True
        Mmax[b] = mx
        Mmin[b] = mn
        for a in range(n):
            for c in range(n):
                Ls[b, a, c] = L[a, c]
    return Ls, Mmax, Mmin, iters


def _barrier_np(Ys, active, tol, max_newton):
    # masked, batched version of _barrier: points outside ``active`` carry zero weight
    nb, m, n = Ys.shape
    iu, ju = np.triu_indices(n)
    wts = np.where(iu == ju, 1.0, np.sqrt(2.0))
    r = len(iu)
    k = active.sum(axis=1).astype(float)
    u = np.where(active, 1.0 / k[:, None], 0.0)
    mu = 1.0 / k
    iters = np.zeros(nb, dtype=np.int64)
    done = np.zeros(nb, dtype=bool)
    failed = np.zeros(nb, dtype=bool)
    tiny = np.finfo(float).tiny

    def moments(uu, Y):
        X = np.einsum("bm,bmi,bmj->bij", uu, Y, Y)
        good = np.all(np.linalg.eigvalsh(X) > 0, axis=1)
        L = np.full_like(X, np.nan)
        if good.any():
            L[good] = np.linalg.cholesky(X[good])
        Z = np.swapaxes(np.linalg.solve(L, np.swapaxes(Y, 1, 2)), 1, 2)
        M = (Z * Z).sum(axis=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            ld = 2.0 * np.log(np.abs(np.diagonal(L, axis1=1, axis2=2))).sum(axis=1)
        ld = np.where(good & np.isfinite(ld), ld, -np.inf)
        return L, M, ld, Z

    def logsum(uu, act):
        return np.where(act, np.log(np.where(act, uu, 1.0)), 0.0).sum(axis=1)

    L, M, ld, Z = moments(u, Ys)
    failed |= ~np.isfinite(ld)
    for _ in range(max_newton):
        conv = np.where(active, M, 0.0).max(axis=1) <= n * (1.0 + tol)
        done |= conv & ~failed
        act = np.nonzero(~done & ~failed)[0]
        if act.size == 0:
            break
        ua, Za, Ma, mua, Ya, msk = u[act], Z[act], M[act], mu[act], Ys[act], active[act]
        Phi = Za[:, :, iu] * Za[:, :, ju] * wts
        safe_u = np.where(msk, ua, 1.0)
        g = np.where(msk, Ma + mua[:, None] / safe_u, 0.0)
        linv = np.where(msk, ua * ua / mua[:, None], 0.0)
        S = np.eye(r) + np.einsum("bt,bta,btc->bac", linv, Phi, Phi)
        rhs = np.stack([np.einsum("bt,bta,bt->ba", linv, Phi, g), np.einsum("bt,bta->ba", linv, Phi)], axis=2)
        sol = np.linalg.solve(S, rhs)
        Kg = linv * (g - np.einsum("bta,ba->bt", Phi, sol[:, :, 0]))
        K1 = linv * (1.0 - np.einsum("bta,ba->bt", Phi, sol[:, :, 1]))
        nu = Kg.sum(axis=1) / K1.sum(axis=1)
        dvec = np.where(msk, Kg - nu[:, None] * K1, 0.0)
        lam2 = (dvec * np.where(msk, g - nu[:, None], 0.0)).sum(axis=1)
        neg = dvec < 0
        ratio = np.where(neg, -0.99 * ua / np.where(neg, dvec, -1.0), np.inf)
        step = np.minimum(1.0, ratio.min(axis=1))
        phi0 = ld[act] + mua * logsum(ua, msk)
        accepted = np.zeros(act.size, dtype=bool)
        newu = ua.copy()
        for _ls in range(60):
            pend = ~accepted
            if not pend.any():
                break
            trial = np.where(msk[pend], ua[pend] + step[pend, None] * dvec[pend], 0.0)
            trial = np.where(msk[pend], np.maximum(trial, tiny), 0.0)
            _, _, ldt, _ = moments(trial, Ya[pend])
            phit = ldt + mua[pend] * logsum(trial, msk[pend])
            ok = phit >= phi0[pend] + 0.25 * step[pend] * lam2[pend] - 1e-13 * (1.0 + np.abs(phi0[pend]))
            idx = np.nonzero(pend)[0]
            newu[idx[ok]] = trial[ok]
            accepted[idx[ok]] = True
            step[idx[~ok]] *= 0.5
        failed[act[~accepted | ~(lam2 >= 0)]] = True
        u[act[accepted]] = newu[accepted]
        iters[act] += 1
        dec = np.sqrt(np.maximum(lam2, 0.0) / mua)
        mu[act] = np.where(dec < 0.25, mua * 0.1, mua)
        failed[act[mu[act] < 1e-300]] = True
        L, M, ld, Z = moments(u, Ys)
    conv = np.where(active, M, 0.0).max(axis=1) <= n * (1.0 + tol)
    iters = np.where(conv & ~failed, iters, -1)
    return L, M, iters


def _mvee_batch_np(Ys, tol, max_newton, start):
    nb, m, n = Ys.shape
    stride = max(1, m // start)
    active = np.zeros((nb, m), dtype=bool)
    active[:, ::stride] = True
    Ls = np.zeros((nb, n, n))
    M = np.zeros((nb, m))
    total = np.zeros(nb, dtype=np.int64)
    status = np.zeros(nb, dtype=np.int64)  # 0 pending, 1 done, -1 failed
    full = np.zeros(nb, dtype=bool)
    for _ in range(2 * (m + 1)):
        pend = np.nonzero(status == 0)[0]
        if pend.size == 0:
            break
        L, Mp, it = _barrier_np(Ys[pend], active[pend], tol, max_newton)
        bad = it < 0
        # a failed subset solve restarts once from the full point set
        retry = pend[bad & ~full[pend]]
        active[retry] = True
        full[retry] = True
        status[pend[bad & ~np.isin(pend, retry)]] = -1
        okb = ~bad
        idx = pend[okb]
        total[idx] += it[okb]
        Ls[idx] = L[okb]
        M[idx] = Mp[okb]
        viol = (Mp[okb] > n * (1.0 + tol)) & ~active[idx]
        active[idx] |= viol
        status[idx[~viol.any(axis=1)]] = 1
    iters = np.where(status == 1, total, -1)
    return Ls, M.max(axis=1), M.min(axis=1), iters


def mvee_batch(Ys: np.ndarray, tol: float = 1e-7, max_newton: int = 400, start: int = 8):
    """Centered minimum-volume enclosing ellipsoids for a batch of point sets.

    Parameters
    ----------
    Ys : ndarray (b, m, n)
        Point sets; points and their negatives define the same constraint so
        only one representative of each antipodal pair is needed.
    tol : float
        Stop when ``max_i y_i^T X^{-1} y_i <= n (1 + tol)``.

    Returns
    -------
    L : ndarray (b, n, n)
        Lower Cholesky factor of ``X = sum u_i y_i y_i^T``.
    mmax, mmin : ndarray (b,)
        Extremes of ``y_i^T X^{-1} y_i`` over all points.
    iters : ndarray (b,)
        Newton steps used; -1 marks a batch entry that did not converge.
    """
    Ys = np.ascontiguousarray(Ys, dtype=float)
    if jit_enabled():
        return _mvee_batch_jit(Ys, float(tol), int(max_newton), int(start))
    return _mvee_batch_np(Ys, float(tol), int(max_newton), int(start))


# ---------------------------------------------------------------------------
# double-sum A_p integral per cube


@njit(cache=True, inline="always")
def _sv_max2(a, b, c, d):
    # largest singular value of [[a, b], [c, d]] without cancellation
    return 0.5 * (np.sqrt((a + d) ** 2 + (c - b) ** 2) + np.sqrt((a - d) ** 2 + (b + c) ** 2))


@njit(cache=True)
def _opnorm_prod(P, Q, a, t, n, work):
    # spectral norm of P[a] @ Q[t]
    for i in range(n):
        for j in range(n):
            s = 0.0
            for k in range(n):
                s += P[a, i, k] * Q[t, k, j]
            work[i, j] = s
    if n == 1:
        return abs(work[0, 0])
    if n == 2:
        return _sv_max2(work[0, 0], work[0, 1], work[1, 0], work[1, 1])
    return np.linalg.norm(work, 2)


@njit(cache=True, inline="always")
def _pow_sq(s2, half):
    # (s2)**half with cheap paths for the exponents the default p values hit
    if half == 1.0:
        return s2
    if half == 0.5:
        return np.sqrt(s2)
    if half == 1.5:
        return s2 * np.sqrt(s2)
    if half == 0.75:
        r = np.sqrt(s2)
        return r * np.sqrt(r)
    return s2 ** half


@njit(cache=True, parallel=True)
def _ap_integral_jit(P, Q, p, level):
    ncell, n, _ = P.shape
    nc = 1 << level
    per = ncell // nc
    pp = p / (p - 1.0)
    half = 0.5 * pp
    outer_exp = p / pp
    out = np.empty(nc)
    for q in prange(nc):
        work = np.empty((n, n))
        lo = q * per
        outer = 0.0
        for a in range(lo, lo + per):
            inner = 0.0
            if n == 2:
                a00 = P[a, 0, 0]
                a01 = P[a, 0, 1]
                a10 = P[a, 1, 0]
                a11 = P[a, 1, 1]
                for t in range(lo, lo + per):
                    b00 = Q[t, 0, 0]
                    b01 = Q[t, 0, 1]
                    b10 = Q[t, 1, 0]
                    b11 = Q[t, 1, 1]
                    c00 = a00 * b00 + a01 * b10
                    c01 = a00 * b01 + a01 * b11
                    c10 = a10 * b00 + a11 * b10
                    c11 = a10 * b01 + a11 * b11
                    s = _sv_max2(c00, c01, c10, c11)
                    inner += _pow_sq(s * s, half)
            elif n == 1:
                pa = P[a, 0, 0]
                for t in range(lo, lo + per):
                    c = pa * Q[t, 0, 0]
                    inner += _pow_sq(c * c, half)
            else:
                for t in range(lo, lo + per):
                    inner += _opnorm_prod(P, Q, a, t, n, work) ** pp
            inner /= per
            outer += inner ** outer_exp
        out[q] = outer / per
    return out


def _spectral_norm_np(M):
    n = M.shape[-1]
    if n == 1:
        return np.abs(M[..., 0, 0])
    if n == 2 and not np.iscomplexobj(M):
        a, b, c, d = M[..., 0, 0], M[..., 0, 1], M[..., 1, 0], M[..., 1, 1]
        return 0.5 * (np.hypot(a + d, c - b) + np.hypot(a - d, b + c))
    return np.linalg.norm(M, 2, axis=(-2, -1))


def _ap_integral_np(P, Q, p, level, chunk=1 << 22):
    ncell, n, _ = P.shape
    nc = 1 << level
    per = ncell // nc
    pp = p / (p - 1.0)
    out = np.empty(nc)
    Pb = P.reshape(nc, per, n, n)
    Qb = Q.reshape(nc, per, n, n)
    if per * per <= chunk:
        rows = chunk // (per * per)
        for s in range(0, nc, rows):
            prod = np.einsum("qaij,qtjk->qatik", Pb[s:s + rows], Qb[s:s + rows])
            inner = (_spectral_norm_np(prod) ** pp).mean(axis=2)
            out[s:s + rows] = (inner ** (p / pp)).mean(axis=1)
        return out
    block = max(1, chunk // per)
    for q in range(nc):
        acc = 0.0
        for a0 in range(0, per, block):
            prod = np.einsum("aij,tjk->atik", Pb[q, a0:a0 + block], Qb[q])
            inner = (_spectral_norm_np(prod) ** pp).mean(axis=1)
            acc += (inner ** (p / pp)).sum()
        out[q] = acc / per
    return out


def ap_integral_level(P: np.ndarray, Q: np.ndarray, p: float, level: int) -> np.ndarray:
    """Per-cube value of the double-integral A_p expression at one level.

    ``|I|^{-1} sum_a (|I|^{-1} sum_t ||P_a Q_t||^{p'})^{p/p'}`` with the sums
    over cells of each level-``level`` cube (cell measure cancels).
    """
    P = np.ascontiguousarray(P, dtype=float)
    Q = np.ascontiguousarray(Q, dtype=float)
    if jit_enabled():
        return _ap_integral_jit(P, Q, float(p), int(level))
    return _ap_integral_np(P, Q, float(p), int(level))


spectral_norm = _spectral_norm_np
