"""Hot kernels, each in two flavours: numba ``@njit`` and plain numpy.

The numba path is used when numba imports and ``PABANDITS_DISABLE_NUMBA`` is
unset (or ``0``). Both paths consume the same pre-drawn random numbers, so a
run gives the same trajectory whichever backend executes it.

Kernels
-------
maximize
    Exact maximisation of a linear form over ``ball ∩ halfspaces ∩ affine``
    (Seidel's incremental algorithm; the problem is LP-type with the ball as
    the bounding constraint, so every subproblem has a finite optimum).
fibres_feasible
    Batched test of whether affine fibres ``x + span(U)`` meet the body.
widths
    Batched widths (``max - min`` of a linear form) over the same body.
hit_and_run
    Hit-and-run walk in the projection of ``ball ∩ halfspaces`` onto the
    orthogonal complement of a set of orthonormal directions.
ucb_play
    The bandit-phase loop of a fixed-horizon UCB principal facing a greedy
    agent.
eps_principal_play
    The whole game for the decaying epsilon-greedy principal baseline.
"""
from __future__ import annotations

import math
import os
from contextlib import contextmanager

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

TOL = 1e-12
_TINY = 1e-15

ADVERSARIAL = 0
LEXICOGRAPHIC = 1

_env_off = os.environ.get("PABANDITS_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")
_backend = "numpy" if (numba is None or _env_off) else "numba"


def backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and numba is None:
        raise RuntimeError("numba is not importable")
    _backend = name


@contextmanager
def using_backend(name: str):
    old = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(old)


def _njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True)(fn)


# ---------------------------------------------------------------------------
# agent best response (scalar, shared by both UCB loops)


def _greedy_arm_py(s, target, amount, tie):
    # The incentive is compared with the reward gap ``s_other - s_target``
    # rather than added to ``s_target``: the sum can round onto a tie that the
    # exact arithmetic does not have, and the gap is exactly how the optimal
    # incentive ``max(s) - s_target`` is evaluated.
    other = -1
    for a in range(s.shape[0]):
        if a != target and (other < 0 or s[a] > s[other]):
            other = a
    if other < 0:
        return target
    gap = s[other] - s[target]
    if amount > gap:
        return target
    if amount < gap:
        return other
    if tie == LEXICOGRAPHIC and target < other:
        return target
    return other


_greedy_arm_nb = _njit(_greedy_arm_py)


# ---------------------------------------------------------------------------
# Seidel maximisation over ball ∩ halfspaces restricted to c + span(U)


def _complement_np(n):
    # Householder reflector mapping e1 to ±n; its other columns span n^perp.
    k = n.shape[0]
    v = n.copy()
    v[0] += 1.0 if n[0] >= 0 else -1.0
    H = np.eye(k) - (2.0 / (v @ v)) * np.outer(v, v)
    return H[:, 1:]


def _seidel_np(G, b, order, count, w, c, U):
    k = U.shape[1]
    r2 = 1.0 - c @ c
    if r2 < -TOL:
        return False, c
    r = math.sqrt(max(r2, 0.0))
    x = c.copy()
    if k > 0:
        wy = U.T @ w
        nw = math.sqrt(wy @ wy)
        if nw > _TINY:
            x = c + U @ (wy * (r / nw))
    j = 0
    while j < count:
        idx = order[j:count]
        bad = np.flatnonzero(G[idx] @ x - b[idx] > TOL)
        if bad.size == 0:
            break
        j += int(bad[0])
        i = order[j]
        if k == 0:
            return False, x
        h = U.T @ G[i]
        nh = math.sqrt(h @ h)
        if nh < _TINY:
            return False, x
        n = h / nh
        off = (b[i] - G[i] @ c) / nh
        c1 = c + U @ (off * n)
        U1 = U @ _complement_np(n)
        ok, x = _seidel_np(G, b, order, j, w, c1, U1)
        if not ok:
            return False, x
        j += 1
    return True, x


def _seidel_nb_impl(G, b, order, count, w, c, U):
    d = c.shape[0]
    k = U.shape[1]
    r2 = 0.0
    for p in range(d):
        r2 += c[p] * c[p]
    r2 = 1.0 - r2
    x = c.copy()
    if r2 < -TOL:
        return False, x
    r = math.sqrt(max(r2, 0.0))
    if k > 0:
        wy = np.zeros(k)
        for q in range(k):
            acc = 0.0
            for p in range(d):
                acc += U[p, q] * w[p]
            wy[q] = acc
        nw = 0.0
        for q in range(k):
            nw += wy[q] * wy[q]
        nw = math.sqrt(nw)
        if nw > _TINY:
            for p in range(d):
                acc = 0.0
                for q in range(k):
                    acc += U[p, q] * wy[q]
                x[p] = c[p] + acc * (r / nw)
    for j in range(count):
        i = order[j]
        gx = 0.0
        for p in range(d):
            gx += G[i, p] * x[p]
        if gx - b[i] <= TOL:
            continue
        if k == 0:
            return False, x
        h = np.zeros(k)
        nh = 0.0
        for q in range(k):
            acc = 0.0
            for p in range(d):
                acc += U[p, q] * G[i, p]
            h[q] = acc
            nh += acc * acc
        nh = math.sqrt(nh)
        if nh < _TINY:
            return False, x
        gc = 0.0
        for p in range(d):
            gc += G[i, p] * c[p]
        off = (b[i] - gc) / nh
        for q in range(k):
            h[q] /= nh
        # Householder complement of h inside span(U)
        v = h.copy()
        v[0] += 1.0 if h[0] >= 0 else -1.0
        vv = 0.0
        for q in range(k):
            vv += v[q] * v[q]
        Hc = np.empty((k, k - 1))
        for q in range(k):
            for s in range(1, k):
                e = 1.0 if q == s else 0.0
                Hc[q, s - 1] = e - 2.0 * v[q] * v[s] / vv
        c1 = c.copy()
        U1 = np.zeros((d, k - 1))
        for p in range(d):
            acc = 0.0
            for q in range(k):
                acc += U[p, q] * h[q]
            c1[p] += off * acc
            for s in range(k - 1):
                acc2 = 0.0
                for q in range(k):
                    acc2 += U[p, q] * Hc[q, s]
                U1[p, s] = acc2
        ok, x = _seidel_nb(G, b, order, j, w, c1, U1)
        if not ok:
            return False, x
    return True, x


_seidel_nb = _njit(_seidel_nb_impl)


def maximize(G, b, w, c=None, U=None, order=None):
    """Maximise ``<w, s>`` over ``{s = c + U y : |s| <= 1, G s <= b}``.

    Returns ``(feasible, argmax)``. ``U`` must have orthonormal columns;
    ``c=None, U=None`` means the whole space. Constraints are scanned in
    ``order`` (default: newest first, which keeps the incremental algorithm
    close to linear time when later cuts are the tight ones).
    """
    G = np.ascontiguousarray(G, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    d = w.shape[0]
    if U is None:
        U = np.eye(d)
    U = np.ascontiguousarray(U, dtype=np.float64)
    c = np.zeros(d) if c is None else np.asarray(c, dtype=np.float64)
    c = np.ascontiguousarray(c - U @ (U.T @ c))
    if order is None:
        order = np.arange(G.shape[0] - 1, -1, -1, dtype=np.int64)
    if G.shape[0] == 0:
        G = np.zeros((0, d))
    if _backend == "numba":
        return _seidel_nb(G, b, order, order.shape[0], w, c, U)
    return _seidel_np(G, b, order, order.shape[0], w, c, U)


def _widths_np(G, b, W):
    d = W.shape[1]
    order = np.arange(G.shape[0] - 1, -1, -1, dtype=np.int64)
    c = np.zeros(d)
    U = np.eye(d)
    out = np.empty(W.shape[0])
    for k in range(W.shape[0]):
        ok1, p1 = _seidel_np(G, b, order, order.shape[0], W[k], c, U)
        ok2, p2 = _seidel_np(G, b, order, order.shape[0], -W[k], c, U)
        out[k] = W[k] @ (p1 - p2) if (ok1 and ok2) else np.nan
    return out


def _widths_nb_impl(G, b, W):
    d = W.shape[1]
    m = G.shape[0]
    order = np.arange(m - 1, -1, -1)
    c = np.zeros(d)
    U = np.eye(d)
    out = np.empty(W.shape[0])
    for k in range(W.shape[0]):
        w = W[k].copy()
        ok1, p1 = _seidel_nb(G, b, order, m, w, c, U)
        ok2, p2 = _seidel_nb(G, b, order, m, -w, c, U)
        if ok1 and ok2:
            acc = 0.0
            for p in range(d):
                acc += w[p] * (p1[p] - p2[p])
            out[k] = acc
        else:
            out[k] = np.nan
    return out


_widths_nb = _njit(_widths_nb_impl)


def widths(G, b, W):
    """Width of ``ball ∩ {G s <= b}`` along each (unit) row of ``W``; NaN if empty."""
    W = np.ascontiguousarray(W, dtype=np.float64)
    d = W.shape[1]
    G = np.ascontiguousarray(G, dtype=np.float64).reshape(-1, d)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if _backend == "numba":
        return _widths_nb(G, b, W)
    return _widths_np(G, b, W)


def _fibres_np(G, b, X, U):
    order = np.arange(G.shape[0] - 1, -1, -1, dtype=np.int64)
    w = np.zeros(X.shape[1])
    out = np.empty(X.shape[0], dtype=np.bool_)
    for k in range(X.shape[0]):
        c = X[k] - U @ (U.T @ X[k])
        out[k], _ = _seidel_np(G, b, order, order.shape[0], w, c, U)
    return out


def _fibres_nb_impl(G, b, X, U):
    m = G.shape[0]
    d = X.shape[1]
    k_ = U.shape[1]
    order = np.arange(m - 1, -1, -1)
    w = np.zeros(d)
    out = np.empty(X.shape[0], dtype=np.bool_)
    for k in range(X.shape[0]):
        c = X[k].copy()
        for q in range(k_):
            acc = 0.0
            for p in range(d):
                acc += U[p, q] * X[k, p]
            for p in range(d):
                c[p] -= acc * U[p, q]
        ok, _ = _seidel_nb(G, b, order, m, w, c, U)
        out[k] = ok
    return out


_fibres_nb = _njit(_fibres_nb_impl)


def fibres_feasible(G, b, X, U):
    """For each row ``x`` of ``X``: does ``x + span(U)`` meet ``ball ∩ {G s <= b}``?"""
    X = np.ascontiguousarray(X, dtype=np.float64)
    d = X.shape[1]
    G = np.ascontiguousarray(G, dtype=np.float64).reshape(-1, d)
    b = np.ascontiguousarray(b, dtype=np.float64)
    U = np.ascontiguousarray(U, dtype=np.float64).reshape(d, -1)
    if _backend == "numba":
        return _fibres_nb(G, b, X, U)
    return _fibres_np(G, b, X, U)


# ---------------------------------------------------------------------------
# hit-and-run


def _chord_ball_halfspaces_np(G, b, x, u):
    xu = x @ u
    disc = xu * xu - (x @ x) + 1.0
    if disc < 0.0:
        return 0.0, 0.0
    sq = math.sqrt(disc)
    lo, hi = -xu - sq, -xu + sq
    if G.shape[0]:
        gu = G @ u
        slack = b - G @ x
        pos = gu > _TINY
        neg = gu < -_TINY
        if pos.any():
            hi = min(hi, float(np.min(slack[pos] / gu[pos])))
        if neg.any():
            lo = max(lo, float(np.max(slack[neg] / gu[neg])))
    return lo, hi


def _hit_and_run_np(G, b, x0, V, gauss, unif, burn_in, thin, n_samples):
    d = x0.shape[0]
    x = x0.copy()
    out = np.empty((n_samples, d))
    order = np.arange(G.shape[0] - 1, -1, -1, dtype=np.int64)
    k = 0
    for step in range(gauss.shape[0]):
        u = gauss[step].copy()
        if V.shape[0]:
            u -= V.T @ (V @ u)
        nu = math.sqrt(u @ u)
        if nu > _TINY:
            u /= nu
            if V.shape[0] == 0:
                lo, hi = _chord_ball_halfspaces_np(G, b, x, u)
            else:
                U = np.empty((d, 1 + V.shape[0]))
                U[:, 0] = u
                U[:, 1:] = V.T
                c = x - u * (u @ x)
                ok1, p1 = _seidel_np(G, b, order, order.shape[0], u, c, U)
                ok2, p2 = _seidel_np(G, b, order, order.shape[0], -u, c, U)
                if ok1 and ok2:
                    hi = u @ p1 - u @ x
                    lo = u @ p2 - u @ x
                else:
                    lo = hi = 0.0
            if hi > lo:
                x = x + (lo + unif[step] * (hi - lo)) * u
        m = step - burn_in
        if m >= 0 and m % thin == thin - 1:
            out[k] = x
            k += 1
            if k == n_samples:
                break
    return out


def _hit_and_run_nb_impl(G, b, x0, V, gauss, unif, burn_in, thin, n_samples):
    d = x0.shape[0]
    m = G.shape[0]
    nv = V.shape[0]
    x = x0.copy()
    out = np.empty((n_samples, d))
    order = np.arange(m - 1, -1, -1)
    u = np.empty(d)
    k = 0
    for step in range(gauss.shape[0]):
        for p in range(d):
            u[p] = gauss[step, p]
        for i in range(nv):
            dot = 0.0
            for p in range(d):
                dot += V[i, p] * u[p]
            for p in range(d):
                u[p] -= dot * V[i, p]
        nu = 0.0
        for p in range(d):
            nu += u[p] * u[p]
        nu = math.sqrt(nu)
        if nu > _TINY:
            for p in range(d):
                u[p] /= nu
            xu = 0.0
            xx = 0.0
            for p in range(d):
                xu += x[p] * u[p]
                xx += x[p] * x[p]
            lo = 0.0
            hi = 0.0
            if nv == 0:
                disc = xu * xu - xx + 1.0
                if disc >= 0.0:
                    sq = math.sqrt(disc)
                    lo = -xu - sq
                    hi = -xu + sq
                    for i in range(m):
                        gu = 0.0
                        gx = 0.0
                        for p in range(d):
                            gu += G[i, p] * u[p]
                            gx += G[i, p] * x[p]
                        sl = b[i] - gx
                        if gu > _TINY:
                            t = sl / gu
                            if t < hi:
                                hi = t
                        elif gu < -_TINY:
                            t = sl / gu
                            if t > lo:
                                lo = t
            else:
                U = np.empty((d, 1 + nv))
                c = np.empty(d)
                for p in range(d):
                    U[p, 0] = u[p]
                    c[p] = x[p] - u[p] * xu
                    for i in range(nv):
                        U[p, 1 + i] = V[i, p]
                ok1, p1 = _seidel_nb(G, b, order, m, u, c, U)
                ok2, p2 = _seidel_nb(G, b, order, m, -u, c, U)
                if ok1 and ok2:
                    for p in range(d):
                        hi += u[p] * p1[p]
                        lo += u[p] * p2[p]
                    hi -= xu
                    lo -= xu
            if hi > lo:
                t = lo + unif[step] * (hi - lo)
                for p in range(d):
                    x[p] += t * u[p]
        r = step - burn_in
        if r >= 0 and r % thin == thin - 1:
            for p in range(d):
                out[k, p] = x[p]
            k += 1
            if k == n_samples:
                break
    return out


_hit_and_run_nb = _njit(_hit_and_run_nb_impl)


def hit_and_run(G, b, x0, V, rng, n_samples, burn_in=200, thin=1):
    """Run a hit-and-run chain; returns ``(n_samples, d)`` points.

    ``x0`` must lie strictly inside the projected body and in ``V^perp``.
    """
    d = x0.shape[0]
    steps = burn_in + n_samples * thin
    gauss = rng.standard_normal((steps, d))
    unif = rng.random(steps)
    G = np.ascontiguousarray(G, dtype=np.float64).reshape(-1, d)
    b = np.ascontiguousarray(b, dtype=np.float64)
    V = np.ascontiguousarray(V, dtype=np.float64).reshape(-1, d)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    if _backend == "numba":
        return _hit_and_run_nb(G, b, x0, V, gauss, unif, burn_in, thin, n_samples)
    return _hit_and_run_np(G, b, x0, V, gauss, unif, burn_in, thin, n_samples)


# ---------------------------------------------------------------------------
# UCB bandit phase


def _ucb_play_np(theta, s, offers, sigma, z, horizon, tie, obey):
    K = theta.shape[0]
    n = z.shape[0]
    counts = np.zeros(K)
    sums = np.zeros(K)
    rec = np.empty(n, dtype=np.int64)
    chosen = np.empty(n, dtype=np.int64)
    reward = np.empty(n)
    paid = np.empty(n)
    log_h = math.log(horizon)
    for i in range(n):
        if i < K:
            a = i
        else:
            a = int(np.argmax(sums / counts + 2.0 * np.sqrt(log_h / counts)))
        c = a if obey else _greedy_arm_py(s, a, offers[a], tie)
        x = theta[c] + sigma * z[i]
        rec[i] = a
        chosen[i] = c
        reward[i] = x
        paid[i] = offers[a] if c == a else 0.0
        counts[a] += 1.0
        sums[a] += x - offers[a]
    return rec, chosen, reward, paid


def _ucb_play_nb_impl(theta, s, offers, sigma, z, horizon, tie, obey):
    K = theta.shape[0]
    n = z.shape[0]
    counts = np.zeros(K)
    sums = np.zeros(K)
    rec = np.empty(n, dtype=np.int64)
    chosen = np.empty(n, dtype=np.int64)
    reward = np.empty(n)
    paid = np.empty(n)
    log_h = math.log(horizon)
    for i in range(n):
        if i < K:
            a = i
        else:
            a = 0
            best = -np.inf
            for j in range(K):
                idx = sums[j] / counts[j] + 2.0 * math.sqrt(log_h / counts[j])
                if idx > best:
                    best = idx
                    a = j
        c = a if obey else _greedy_arm_nb(s, a, offers[a], tie)
        x = theta[c] + sigma * z[i]
        rec[i] = a
        chosen[i] = c
        reward[i] = x
        paid[i] = offers[a] if c == a else 0.0
        counts[a] += 1.0
        sums[a] += x - offers[a]
    return rec, chosen, reward, paid


_ucb_play_nb = _njit(_ucb_play_nb_impl)


def ucb_play(theta, s, offers, sigma, z, horizon, tie=ADVERSARIAL, obey=False):
    """Play ``len(z)`` rounds of fixed-horizon UCB on the shifted instance.

    Each round the recommended arm ``a`` is offered ``offers[a]``; the agent
    best-responds (or simply complies when ``obey``), the principal draws
    ``theta[chosen] + sigma * z[i]`` and UCB is fed that draw minus
    ``offers[a]``. Returns ``(recommended, chosen, reward, paid)``.
    """
    args = (
        np.ascontiguousarray(theta, dtype=np.float64),
        np.ascontiguousarray(s, dtype=np.float64),
        np.ascontiguousarray(offers, dtype=np.float64),
        float(sigma),
        np.ascontiguousarray(z, dtype=np.float64),
        float(horizon),
        int(tie),
        bool(obey),
    )
    if _backend == "numba":
        return _ucb_play_nb(*args)
    return _ucb_play_np(*args)


# ---------------------------------------------------------------------------
# decaying epsilon-greedy principal (baseline)


def _eps_principal_py(theta, s, sigma, z, coin, pick, m, alpha, T, tie):
    K = theta.shape[0]
    n = z.shape[0]
    lower = np.zeros(K)
    upper = np.ones(K)
    counts = np.zeros(K)
    sums = np.zeros(K)
    target = np.empty(n, dtype=np.int64)
    amount = np.empty(n)
    chosen = np.empty(n, dtype=np.int64)
    reward = np.empty(n)
    paid = np.empty(n)
    margin = 1.0 / T
    for i in range(n):
        p = m * K / (alpha * (i + 1))
        if coin[i] < p:
            a = pick[i]
            amt = 1.0
        else:
            a = 0
            best = -np.inf
            for j in range(K):
                v = sums[j] / counts[j] - upper[j] if counts[j] > 0 else np.inf
                if v > best:
                    best = v
                    a = j
            if upper[a] - lower[a] > margin:
                amt = lower[a] + (upper[a] - lower[a]) / 2
            else:
                amt = upper[a] + margin
        # agent best response (inlined copy of _greedy_arm_py so the same source compiles under numba)
        other = -1
        for j in range(K):
            if j != a and (other < 0 or s[j] > s[other]):
                other = j
        if other < 0:
            c = a
        else:
            gap = s[other] - s[a]
            if amt > gap or (amt == gap and tie == LEXICOGRAPHIC and a < other):
                c = a
            else:
                c = other
        x = theta[c] + sigma * z[i]
        if c == a:
            if amt < upper[a]:
                upper[a] = amt
            paid[i] = amt
        else:
            if amt > lower[a]:
                lower[a] = min(amt, upper[a])
            lower[c] = 0.0
            upper[c] = 0.0
            paid[i] = 0.0
        counts[c] += 1.0
        sums[c] += x
        target[i] = a
        amount[i] = amt
        chosen[i] = c
        reward[i] = x
    return target, amount, chosen, reward, paid


_eps_principal_nb = _njit(_eps_principal_py)


def eps_principal_play(theta, s, sigma, z, coin, pick, m, alpha, T, tie=ADVERSARIAL):
    """Decaying epsilon-greedy principal that learns incentives by bracketing.

    Round ``i`` explores with probability ``min(1, m K / (alpha (i+1)))``
    (``coin[i]`` below it), offering 1 on arm ``pick[i]``. Otherwise it targets
    the arm maximising the empirical mean of observed rewards minus the upper
    incentive bracket, offering the bracket midpoint while the bracket is wider
    than ``1/T`` and ``upper + 1/T`` afterwards. Every answer refines the
    brackets; an agent that declines reveals its own favourite arm, whose
    optimal incentive is 0. Returns ``(target, amount, chosen, reward, paid)``.
    """
    args = (
        np.ascontiguousarray(theta, dtype=np.float64),
        np.ascontiguousarray(s, dtype=np.float64),
        float(sigma),
        np.ascontiguousarray(z, dtype=np.float64),
        np.ascontiguousarray(coin, dtype=np.float64),
        np.ascontiguousarray(pick, dtype=np.int64),
        float(m),
        float(alpha),
        float(T),
        int(tie),
    )
    if _backend == "numba":
        return _eps_principal_nb(*args)
    return _eps_principal_py(*args)
