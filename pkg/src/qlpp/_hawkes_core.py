"""Compiled single-pass kernels for the exponential Hawkes model.

Everything here works in the full natural parameter layout
(nu_1..nu_d, C row-major, A row-major), length d + 2 d^2; callers select
active coordinates afterwards. All passes share one state recursion:

    E  = sum over past events of c exp(-a age)     (plus decayed E0)
    H  = same sum weighted by age                   (equals -dE/da)
    Z  = same sum weighted by age^2                 (equals -dH/da)
    D  = decayed initial excitation E0 only
    HD = age-weighted decayed E0 only

D and HD split the event-born part (proportional to c) from the carried
initial state, which is treated as a fixed quantity when differentiating.
All passes advance strictly forward through the event times, so the cost is
O(n d^2) plus quadrature nodes.
"""
from __future__ import annotations

import numpy as np
from numba import njit

# status codes shared by the passes
OK = 0
# positive status: 1-based index of an event whose intensity vanished
QUAD_FAIL = -1
BOUND_VIOLATION = 1
CAP_EXCEEDED = 2
ROOT_FAIL = 3


@njit(cache=True)
def _decay(E, H, Z, D, HD, A, dt, order):
    d = E.shape[0]
    for i in range(d):
        for j in range(d):
            ed = np.exp(-A[i, j] * dt)
            if order >= 2:
                Z[i, j] = (Z[i, j] + 2.0 * dt * H[i, j] + dt * dt * E[i, j]) * ed
                HD[i, j] = (HD[i, j] + dt * D[i, j]) * ed
            if order >= 1:
                H[i, j] = (H[i, j] + dt * E[i, j]) * ed
                D[i, j] = D[i, j] * ed
            E[i, j] = E[i, j] * ed


@njit(cache=True)
def hawkes_pass(times, marks, t0, T, nu, C, A, E0, order):
    """Log likelihood on (t0, T] from starting excitation E0, plus derivatives.

    order 0 computes the value only, 1 adds the gradient, 2 adds the
    hessian. Returns (status, value, grad, hess); a positive status is the
    1-based index of an event with vanishing intensity and the value is
    meaningless. Coordinates with c == 0 get zero derivative entries; they
    are structurally absent and must be dropped by the caller.
    """
    d = nu.size
    n_nat = d + 2 * d * d
    grad = np.zeros(n_nat)
    hess = np.zeros((n_nat, n_nat))
    E = E0.copy()
    D = E0.copy()
    H = np.zeros((d, d))
    HD = np.zeros((d, d))
    Z = np.zeros((d, d))
    nb = 1 + 2 * d
    glam = np.zeros(nb)
    gidx = np.zeros(nb, np.int64)
    val = 0.0
    prev = t0
    for i in range(times.size):
        t = times[i]
        k = marks[i]
        _decay(E, H, Z, D, HD, A, t - prev, order)
        lam = nu[k]
        for b in range(d):
            lam += E[k, b]
        if lam < 1e-300:
            return i + 1, 0.0, grad, hess
        val += np.log(lam)
        if order >= 1:
            il = 1.0 / lam
            grad[k] += il
            for b in range(d):
                cc = C[k, b]
                gc = (E[k, b] - D[k, b]) / cc if cc > 0.0 else 0.0
                ga = -H[k, b]
                grad[d + k * d + b] += gc * il
                grad[d + d * d + k * d + b] += ga * il
                glam[1 + b] = gc
                glam[1 + d + b] = ga
            if order >= 2:
                glam[0] = 1.0
                gidx[0] = k
                for b in range(d):
                    gidx[1 + b] = d + k * d + b
                    gidx[1 + d + b] = d + d * d + k * d + b
                il2 = il * il
                for p in range(nb):
                    gp = glam[p] * il2
                    for q in range(p, nb):
                        hpq = -gp * glam[q]
                        hess[gidx[p], gidx[q]] += hpq
                        if q != p:
                            hess[gidx[q], gidx[p]] += hpq
                # curvature of lambda itself: only (c, a) and (a, a) pairs survive
                for b in range(d):
                    cc = C[k, b]
                    ic = d + k * d + b
                    ia = d + d * d + k * d + b
                    if cc > 0.0:
                        v = -(H[k, b] - HD[k, b]) / cc * il
                        hess[ic, ia] += v
                        hess[ia, ic] += v
                    hess[ia, ia] += Z[k, b] * il
        for al in range(d):
            E[al, k] += C[al, k]
        prev = t
    _decay(E, H, Z, D, HD, A, T - prev, order)

    counts = np.zeros(d)
    for i in range(times.size):
        counts[marks[i]] += 1.0
    span = T - t0
    for al in range(d):
        val -= nu[al] * span
        if order >= 1:
            grad[al] -= span
        for b in range(d):
            aa = A[al, b]
            cc = C[al, b]
            # integral of this kernel's excitation over (t0, T] in closed form
            G = (E0[al, b] + cc * counts[b] - E[al, b]) / aa
            val -= G
            if order >= 1:
                ic = d + al * d + b
                ia = d + d * d + al * d + b
                u = cc * counts[b] - E[al, b] + D[al, b]
                dc = u / (aa * cc) if cc > 0.0 else 0.0
                da = (H[al, b] - G) / aa
                grad[ic] -= dc
                grad[ia] -= da
                if order >= 2:
                    if cc > 0.0:
                        dca = (H[al, b] - HD[al, b]) / (aa * cc) - u / (aa * aa * cc)
                        hess[ic, ia] -= dca
                        hess[ia, ic] -= dca
                    daa = -Z[al, b] / aa - 2.0 * da / aa
                    hess[ia, ia] -= daa
    return 0, val, grad, hess


@njit(cache=True)
def hawkes_fisher_pass(times, marks, t0, T, nu, C, A, E0, rtol, gl_x, gl_w):
    """Integral of (dlam)(dlam)^T / lam over (t0, T], full natural layout.

    Gauss-Legendre panels per inter-event interval, bisected until two
    successive refinements agree to rtol in max norm. Returns
    (status, integral); the caller divides by the span. Status QUAD_FAIL
    reports an interval that failed to stabilize at the panel cap.
    """
    d = nu.size
    nb = 1 + 2 * d
    n_nat = d + 2 * d * d
    nq = gl_x.size
    gamma = np.zeros((n_nat, n_nat))
    E = E0.copy()
    D = E0.copy()
    H = np.zeros((d, d))
    HD = np.zeros((d, d))
    Z = np.zeros((d, d))
    v = np.zeros(nb)
    prevI = np.zeros((d, nb, nb))
    newI = np.zeros((d, nb, nb))
    status = 0
    prev = t0
    n = times.size
    for iev in range(n + 1):
        t_end = times[iev] if iev < n else T
        h = t_end - prev
        if h > 0.0:
            m = 1
            first = True
            while True:
                for al in range(d):
                    for p in range(nb):
                        for q in range(nb):
                            newI[al, p, q] = 0.0
                step = h / m
                for pan in range(m):
                    mid = pan * step + 0.5 * step
                    half = 0.5 * step
                    for iq in range(nq):
                        x = mid + half * gl_x[iq]
                        w = half * gl_w[iq]
                        for al in range(d):
                            lam = nu[al]
                            for b in range(d):
                                ed = np.exp(-A[al, b] * x)
                                ex = E[al, b] * ed
                                lam += ex
                                cc = C[al, b]
                                if cc > 0.0:
                                    v[1 + b] = (ex - D[al, b] * ed) / cc
                                else:
                                    v[1 + b] = 0.0
                                v[1 + d + b] = -(H[al, b] + x * E[al, b]) * ed
                            v[0] = 1.0
                            wl = w / lam
                            for p in range(nb):
                                vp = v[p] * wl
                                for q in range(p, nb):
                                    newI[al, p, q] += vp * v[q]
                if first:
                    first = False
                else:
                    num = 0.0
                    den = 0.0
                    for al in range(d):
                        for p in range(nb):
                            for q in range(p, nb):
                                diff = abs(newI[al, p, q] - prevI[al, p, q])
                                if diff > num:
                                    num = diff
                                mag = abs(newI[al, p, q])
                                if mag > den:
                                    den = mag
                    if num <= rtol * den or den == 0.0:
                        break
                    if m >= 4096:
                        status = QUAD_FAIL
                        break
                tmp = prevI
                prevI = newI
                newI = tmp
                m *= 2
            for al in range(d):
                for p in range(nb):
                    if p == 0:
                        gp = al
                    elif p <= d:
                        gp = d + al * d + (p - 1)
                    else:
                        gp = d + d * d + al * d + (p - 1 - d)
                    for q in range(p, nb):
                        if q == 0:
                            gq = al
                        elif q <= d:
                            gq = d + al * d + (q - 1)
                        else:
                            gq = d + d * d + al * d + (q - 1 - d)
                        gamma[gp, gq] += newI[al, p, q]
                        if gq != gp:
                            gamma[gq, gp] += newI[al, p, q]
        # step the state across the event
        _decay(E, H, Z, D, HD, A, h, 1)
        if iev < n:
            k = marks[iev]
            for al in range(d):
                E[al, k] += C[al, k]
        prev = t_end
    return status, gamma


@njit(cache=True)
def hawkes_compensator_at_events(times, marks, t0, T, nu, C, A, E0):
    """Cumulative integrated intensity per component at each event and at T.

    Row i < n holds Lambda(t_i) - Lambda(t0); the final row is at T.
    """
    d = nu.size
    n = times.size
    out = np.zeros((n + 1, d))
    E = E0.copy()
    run = np.zeros(d)
    prev = t0
    for i in range(n + 1):
        t = times[i] if i < n else T
        dt = t - prev
        for al in range(d):
            inc = nu[al] * dt
            for b in range(d):
                inc += E[al, b] * -np.expm1(-A[al, b] * dt) / A[al, b]
            run[al] += inc
            out[i, al] = run[al]
        for al in range(d):
            for b in range(d):
                E[al, b] *= np.exp(-A[al, b] * dt)
        if i < n:
            k = marks[i]
            for al in range(d):
                E[al, k] += C[al, k]
        prev = t
    return out


@njit(cache=True)
def hawkes_intensity_on_grid(times, marks, grid, nu, C, A, E0, t0):
    """Left-limit intensity vectors at sorted query times >= t0."""
    d = nu.size
    out = np.empty((grid.size, d))
    E = E0.copy()
    prev = t0
    j = 0
    for g in range(grid.size):
        tg = grid[g]
        while j < times.size and times[j] < tg:
            dt = times[j] - prev
            for al in range(d):
                for b in range(d):
                    E[al, b] *= np.exp(-A[al, b] * dt)
            k = marks[j]
            for al in range(d):
                E[al, k] += C[al, k]
            prev = times[j]
            j += 1
        dt = tg - prev
        for al in range(d):
            lam = nu[al]
            for b in range(d):
                lam += E[al, b] * np.exp(-A[al, b] * dt)
            out[g, al] = lam
    return out


@njit(cache=True)
def _grow(times, marks, n):
    nt = np.empty(times.size * 2)
    nm = np.empty(marks.size * 2, np.int64)
    for i in range(n):
        nt[i] = times[i]
        nm[i] = marks[i]
    return nt, nm


@njit(cache=True)
def hawkes_thinning_path(gen, nu, C, A, E0, total, cap):
    """Ogata thinning on (0, total]; returns (status, times, marks, count).

    The proposal bound is the current total intensity, refreshed at every
    proposal; it dominates until the next event because excitations only
    decay in between. The bound is asserted at every proposal; status
    BOUND_VIOLATION would mean a state-update bug, CAP_EXCEEDED a runaway
    (supercritical) configuration.
    """
    d = nu.size
    E = E0.copy()
    times = np.empty(256)
    marks = np.empty(256, np.int64)
    n = 0
    base = 0.0
    for al in range(d):
        base += nu[al]
    t = 0.0
    while True:
        M = base
        for al in range(d):
            for b in range(d):
                M += E[al, b]
        dt = gen.standard_exponential() / M
        if t + dt > total:
            return 0, times, marks, n
        t = t + dt
        lam_tot = base
        for al in range(d):
            for b in range(d):
                E[al, b] *= np.exp(-A[al, b] * dt)
                lam_tot += E[al, b]
        if lam_tot > M * (1.0 + 1e-12):
            return BOUND_VIOLATION, times, marks, n
        u = gen.random() * M
        if u <= lam_tot:
            acc = 0.0
            k = d - 1
            for al in range(d):
                lam_al = nu[al]
                for b in range(d):
                    lam_al += E[al, b]
                acc += lam_al
                if u <= acc:
                    k = al
                    break
            for al in range(d):
                E[al, k] += C[al, k]
            if n == times.size:
                times, marks = _grow(times, marks, n)
            times[n] = t
            marks[n] = k
            n += 1
            if n >= cap:
                return CAP_EXCEEDED, times, marks, n


@njit(cache=True)
def hawkes_exact_path(gen, nu, C, A, E0, total, cap):
    """Inversion sampler on (0, total]; returns (status, times, marks, count).

    Each interarrival solves M(s) = e for a standard-exponential e, where
    M(s) = nubar s + sum_ab (E_ab / a_ab)(1 - exp(-a_ab s)) is the
    integrated total intensity ahead of the current state. M is increasing
    and concave, so Newton from a point left of the root converges
    monotonically; iteration stops once M is within 1e-12 of the target,
    which bounds the inversion error by 1e-12 in CDF space. The mark is
    drawn from the per-component intensities at the solved time.
    """
    d = nu.size
    E = E0.copy()
    times = np.empty(256)
    marks = np.empty(256, np.int64)
    n = 0
    nubar = 0.0
    for al in range(d):
        nubar += nu[al]
    t = 0.0
    while True:
        target = gen.standard_exponential()
        remain = total - t
        # integrated intensity up to the horizon; if it cannot reach the
        # target, the next event falls beyond the observation window
        m_end = nubar * remain
        mu0 = nubar
        for al in range(d):
            for b in range(d):
                m_end += E[al, b] * (1.0 - np.exp(-A[al, b] * remain)) / A[al, b]
                mu0 += E[al, b]
        if m_end < target:
            return 0, times, marks, n
        # Newton from below: M(s) <= mu(0) s gives a left starting point
        s = target / mu0
        g = -target
        it = 0
        while True:
            g = nubar * s - target
            mu = nubar
            for al in range(d):
                for b in range(d):
                    ed = np.exp(-A[al, b] * s)
                    g += E[al, b] * (1.0 - ed) / A[al, b]
                    mu += E[al, b] * ed
            if -g <= 1e-12 or it >= 100:
                break
            s = s - g / mu
            it += 1
        if -g > 1e-9:
            return ROOT_FAIL, times, marks, n
        # decay to the event time, then draw the mark from the ratios
        mu_tot = nubar
        for al in range(d):
            for b in range(d):
                E[al, b] *= np.exp(-A[al, b] * s)
                mu_tot += E[al, b]
        u = gen.random() * mu_tot
        acc = 0.0
        k = d - 1
        for al in range(d):
            mu_al = nu[al]
            for b in range(d):
                mu_al += E[al, b]
            acc += mu_al
            if u <= acc:
                k = al
                break
        for al in range(d):
            E[al, k] += C[al, k]
        t = t + s
        if n == times.size:
            times, marks = _grow(times, marks, n)
        times[n] = t
        marks[n] = k
        n += 1
        if n >= cap:
            return CAP_EXCEEDED, times, marks, n
