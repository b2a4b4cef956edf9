"""Compiled inner loops for the per-step hot path.

Array conventions (0-based): ``X[j]`` is vertex x_{j+1}; edge ``j`` joins
``X[j-1]`` and ``X[j]``; vertex ``j`` sits between edges ``j`` and ``j+1``.
Angle arrays keep the 1-based offset of the scheme: ``nu[m]`` is nu_m for
m = 0..N+2 and ``nustar[m]`` is nu*_m for m = 0..N+1.
"""

import numpy as np
from numba import njit

OK = 0
ZERO_EDGE = 1
ANTIPODAL = 2


@njit(cache=True)
def lift_angles(t):
    """Return ``(nu, code, index)`` for unit tangents ``t`` of shape (N, 2)."""
    n = t.shape[0]
    nu = np.empty(n + 3)
    t11 = min(1.0, max(-1.0, t[0, 0]))
    if t[0, 1] < 0.0:
        nu[1] = 2.0 * np.pi - np.arccos(t11)
    else:
        nu[1] = np.arccos(t11)
    for i in range(1, n + 1):
        a0 = t[i - 1, 0]
        a1 = t[i - 1, 1]
        b0 = t[i % n, 0]
        b1 = t[i % n, 1]
        d = a0 * b1 - a1 * b0
        c = a0 * b0 + a1 * b1
        if d == 0.0 and c < 0.0:
            return nu, ANTIPODAL, i - 1
        d = min(1.0, max(-1.0, d))
        c = min(1.0, max(-1.0, c))
        if c > 0.0:
            nu[i + 1] = nu[i] + np.arcsin(d)
        elif d > 0.0:
            nu[i + 1] = nu[i] + np.arccos(c)
        else:
            nu[i + 1] = nu[i] - np.arccos(c)
    nu[0] = nu[1] - (nu[n + 1] - nu[n])
    nu[n + 2] = nu[n + 1] + (nu[2] - nu[1])
    return nu, OK, -1


@njit(cache=True)
def geometry(X):
    n = X.shape[0]
    r = np.empty(n)
    t = np.empty((n, 2))
    mid = np.empty((n, 2))
    for j in range(n):
        dx = X[j, 0] - X[j - 1, 0]
        dy = X[j, 1] - X[j - 1, 1]
        rj = np.sqrt(dx * dx + dy * dy)
        if rj == 0.0:
            empty = np.empty(0)
            return (r, t, empty, empty, empty, empty, empty, mid, ZERO_EDGE, j)
        r[j] = rj
        t[j, 0] = dx / rj
        t[j, 1] = dy / rj
        mid[j, 0] = 0.5 * (X[j - 1, 0] + X[j, 0])
        mid[j, 1] = 0.5 * (X[j - 1, 1] + X[j, 1])
    nu, code, idx = lift_angles(t)
    if code != OK:
        empty = np.empty(0)
        return (r, t, nu, empty, empty, empty, empty, mid, code, idx)
    nustar = np.empty(n + 2)
    for m in range(n + 2):
        nustar[m] = 0.5 * (nu[m] + nu[m + 1])
    k = np.empty(n)
    for j in range(n):
        k[j] = (nustar[j + 1] - nustar[j]) / r[j]
    kstar = np.empty(n)
    rstar = np.empty(n)
    for j in range(n):
        jp = (j + 1) % n
        kstar[j] = 0.5 * (k[jp] + k[j])
        rstar[j] = 0.5 * (r[j] + r[jp])
    return (r, t, nu, nustar, k, kstar, rstar, mid, OK, -1)


@njit(cache=True)
def tangential(r, rstar, k, beta, phi_e, dphi_e, phi_v, omega):
    """Closed-form solution of the discrete redistribution equation.

    Returns ``(alpha, psi)``; ``psi[0]`` is evaluated with the same formula as
    the other entries so callers can check that the full cycle sums to zero.
    """
    n = r.shape[0]
    length = 0.0
    for j in range(n):
        length += r[j]
    dsb = np.empty(n)
    for j in range(n):
        dsb[j] = (beta[(j + 1) % n] - beta[j]) / rstar[j]
    f = np.empty(n)
    sum_f = 0.0
    sum_phi = 0.0
    for j in range(n):
        d2 = (dsb[j] - dsb[j - 1]) / r[j]
        f[j] = (d2 + k[j] * k[j] * beta[j]) * dphi_e[j] - k[j] * beta[j] * phi_e[j]
        sum_f += f[j] * r[j]
        sum_phi += phi_e[j] * r[j]
    mean_f = sum_f / length
    mean_phi = sum_phi / length
    ratio = mean_f / mean_phi
    relax = length * mean_phi / n
    psi = np.empty(n)
    for j in range(n):
        pr = phi_e[j] * r[j]
        psi[j] = ratio * pr - f[j] * r[j] + (relax - pr) * omega
    cum = np.empty(n)
    cum[0] = 0.0
    acc = 0.0
    for j in range(1, n):
        cum[j] = cum[j - 1] + psi[j]
        acc += cum[j] * rstar[j]
    base = -acc / length
    alpha = np.empty(n)
    for j in range(n):
        alpha[j] = (base + cum[j]) / phi_v[j]
    return alpha, psi


@njit(cache=True)
def assemble(r, rstar, alpha, wstar, tau):
    """Return ``(lower, diag, upper, bad_row)``; ``bad_row`` is -1 when every
    row is strictly diagonally dominant."""
    n = r.shape[0]
    lo = np.empty(n)
    di = np.empty(n)
    up = np.empty(n)
    bad = -1
    for j in range(n):
        a = alpha[j] / (2.0 * rstar[j])
        b = wstar[j] / rstar[j]
        am = b / r[j] - a
        ap = b / r[(j + 1) % n] + a
        lo[j] = -am * tau
        up[j] = -ap * tau
        di[j] = 1.0 + (am + ap) * tau
        if bad < 0 and not di[j] > abs(lo[j]) + abs(up[j]):
            bad = j
    return lo, di, up, bad


@njit(cache=True)
def _thomas(lo, di, up, rhs):
    n = di.shape[0]
    m = rhs.shape[1]
    cp = np.empty(n)
    x = np.empty_like(rhs)
    piv = di[0]
    if piv == 0.0:
        return x, False
    cp[0] = up[0] / piv
    for c in range(m):
        x[0, c] = rhs[0, c] / piv
    for i in range(1, n):
        piv = di[i] - lo[i] * cp[i - 1]
        if piv == 0.0 or not np.isfinite(piv):
            return x, False
        cp[i] = up[i] / piv
        for c in range(m):
            x[i, c] = (rhs[i, c] - lo[i] * x[i - 1, c]) / piv
    for i in range(n - 2, -1, -1):
        for c in range(m):
            x[i, c] -= cp[i] * x[i + 1, c]
    return x, True


@njit(cache=True)
def cyclic_solve(lo, di, up, rhs):
    """Solve a periodic tridiagonal system for several right-hand sides.

    Row ``i`` reads ``lo[i] x[i-1] + di[i] x[i] + up[i] x[i+1] = rhs[i]`` with
    indices taken mod n. Sherman-Morrison rank-one correction on top of the
    Thomas algorithm. Returns ``(x, ok)``.
    """
    n = di.shape[0]
    m = rhs.shape[1]
    corner_top = lo[0]
    corner_bot = up[n - 1]
    gamma = -di[0]
    d = di.copy()
    d[0] = di[0] - gamma
    d[n - 1] = di[n - 1] - corner_bot * corner_top / gamma
    ext = np.zeros((n, m + 1))
    for i in range(n):
        for c in range(m):
            ext[i, c] = rhs[i, c]
    ext[0, m] = gamma
    ext[n - 1, m] = corner_bot
    sol, ok = _thomas(lo, d, up, ext)
    x = np.empty_like(rhs)
    if not ok:
        return x, False
    denom = 1.0 + sol[0, m] + corner_top * sol[n - 1, m] / gamma
    if denom == 0.0:
        return x, False
    for c in range(m):
        fact = (sol[0, c] + corner_top * sol[n - 1, c] / gamma) / denom
        for i in range(n):
            x[i, c] = sol[i, c] - fact * sol[i, m]
    return x, True


# --- fully compiled fixed-step loop ---------------------------------------

LAW_CURVE_SHORTENING = 0
LAW_POWER = 1
LAW_SELFSIM_WEIGHTED = 2
LAW_COSINE_WEIGHT = 3

SHAPE_UNIT = 0
SHAPE_SMOOTHED = 1
SHAPE_POWER = 2

FAIL_GEOMETRY = 1
FAIL_SHAPE = 2
FAIL_DOMINANCE = 3
FAIL_SOLVE = 4


@njit(cache=True)
def _law_weight(code, lp, nu, k):
    if code == LAW_POWER:
        ak = abs(k)
        if lp[0] < 1.0 and ak < lp[1]:
            ak = lp[1]
        return ak ** (lp[0] - 1.0)
    if code == LAW_SELFSIM_WEIGHTED:
        a, b, T = lp[0], lp[1], lp[2]
        s = np.sin(nu)
        c = np.cos(nu)
        return a * a * b * b / (2.0 * T * (a * a * s * s + b * b * c * c))
    if code == LAW_COSINE_WEIGHT:
        return 1.0 - lp[0] * np.cos(lp[1] * (nu - lp[2]))
    return 1.0


@njit(cache=True)
def _shape(code, sp, k):
    if code == SHAPE_SMOOTHED:
        e = sp[0]
        root = np.sqrt(1.0 - e + e * k * k)
        phi = 1.0 - e + e * root
        d = e * e * k / root if root > 0.0 else 0.0
        return phi, d
    if code == SHAPE_POWER:
        p, floor = sp[0], sp[1]
        ak = abs(k)
        raw = ak**p
        if raw > floor:
            return raw, p * np.sign(k) * ak ** (p - 1.0)
        return floor, 0.0
    return 1.0, 0.0


@njit(cache=True)
def step_core(X, law_code, lp, shape_code, sp, kappa1, kappa2, tau, phi_floor):
    """One complete step for a kernel-expressible law. Returns (X_new, fail)."""
    n = X.shape[0]
    r, t, nu, nustar, k, kstar, rstar, mid, code, idx = geometry(X)
    if code != OK:
        return X, FAIL_GEOMETRY
    beta = np.empty(n)
    phi_e = np.empty(n)
    dphi_e = np.empty(n)
    phi_v = np.empty(n)
    wstar = np.empty(n)
    length = 0.0
    kb = 0.0
    for j in range(n):
        beta[j] = _law_weight(law_code, lp, nu[j + 1], k[j]) * k[j]
        phi_e[j], dphi_e[j] = _shape(shape_code, sp, k[j])
        pv, _ = _shape(shape_code, sp, kstar[j])
        if not pv > phi_floor:
            return X, FAIL_SHAPE
        phi_v[j] = pv
        wstar[j] = _law_weight(law_code, lp, nustar[j + 1], kstar[j])
        length += r[j]
        kb += k[j] * beta[j] * r[j]
    omega = kappa1 + kappa2 * kb / length
    alpha, psi = tangential(r, rstar, k, beta, phi_e, dphi_e, phi_v, omega)
    lo, di, up, bad = assemble(r, rstar, alpha, wstar, tau)
    if bad >= 0:
        return X, FAIL_DOMINANCE
    new, ok = cyclic_solve(lo, di, up, X)
    if not ok:
        return X, FAIL_SOLVE
    return new, OK


@njit(cache=True)
def run_fixed(X0, law_code, lp, shape_code, sp, kappa1, kappa2, tau, sample_steps, phi_floor):
    """Step ``X0`` with fixed ``tau`` and record vertices at the (sorted) step
    counts in ``sample_steps``. Returns ``(samples, fail, fail_step)``."""
    m = sample_steps.shape[0]
    n = X0.shape[0]
    samples = np.empty((m, n, 2))
    X = X0.copy()
    s = 0
    count = 0
    while s < m and sample_steps[s] == 0:
        samples[s] = X
        s += 1
    while s < m:
        X, fail = step_core(X, law_code, lp, shape_code, sp, kappa1, kappa2, tau, phi_floor)
        if fail != OK:
            return samples[:s], fail, count
        count += 1
        while s < m and sample_steps[s] == count:
            samples[s] = X
            s += 1
    return samples, OK, count
