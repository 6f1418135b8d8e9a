"""Hand-rolled reference implementations shared by the test modules.

Everything here is deliberately independent of the package internals: direct
double sums, adaptive quadrature, central finite differences. Slow and
obviously correct beats fast and clever when producing expected values.
"""
import numpy as np
from scipy import integrate

from qlpp.models import HawkesModel, HawkesParams


def hawkes_1d() -> HawkesParams:
    # canonical univariate setting: branching ratio 0.5, stationary mean rate 2
    return HawkesParams(
        nu=np.array([1.0]), c=np.array([[1.0]]), a=np.array([[2.0]])
    )


def hawkes_2d() -> HawkesParams:
    # mildly asymmetric bivariate setting, spectral radius ~ 0.36
    return HawkesParams(
        nu=np.array([0.5, 0.3]),
        c=np.array([[0.6, 0.2], [0.1, 0.4]]),
        a=np.array([[2.0, 1.5], [1.0, 2.5]]),
    )


def model_for(params: HawkesParams) -> HawkesModel:
    return HawkesModel(params.d, params.sparsity_mask)


def brute_intensity(params, times, marks, t):
    """Left-limit intensity at t by summing the kernel over every past event.

    One vectorized sum over the whole history, no recursion involved.
    """
    past = times < t
    ti = np.asarray(times)[past]
    mi = np.asarray(marks)[past]
    lam = params.nu.astype(np.float64).copy()
    if ti.size:
        lam += np.sum(
            params.c[:, mi] * np.exp(-params.a[:, mi] * (t - ti)[None, :]), axis=1
        )
    return lam


def brute_loglik(stream, params):
    """Event term by direct summation, integral term in closed form."""
    total = 0.0
    for i in range(stream.n):
        lam = brute_intensity(params, stream.times, stream.marks, stream.times[i])
        total += np.log(lam[stream.marks[i]])
    T = stream.horizon
    comp = params.nu * T
    for ti, mi in zip(stream.times, stream.marks):
        comp = comp + (params.c[:, mi] / params.a[:, mi]) * (
            1.0 - np.exp(-params.a[:, mi] * (T - ti))
        )
    return total - comp.sum()


def quad_loglik(stream, params):
    """Like brute_loglik but integrates the intensity by adaptive quadrature
    on every inter-event interval, avoiding the closed-form compensator."""
    total = 0.0
    for i in range(stream.n):
        lam = brute_intensity(params, stream.times, stream.marks, stream.times[i])
        total += np.log(lam[stream.marks[i]])
    knots = np.unique(np.concatenate([[0.0], stream.times, [stream.horizon]]))
    for comp in range(params.d):
        for lo, hi in zip(knots[:-1], knots[1:]):
            val, _ = integrate.quad(
                lambda s: brute_intensity(params, stream.times, stream.marks, s)[comp],
                lo,
                hi,
                epsabs=1e-13,
                epsrel=1e-13,
                limit=200,
            )
            total -= val
    return total


def num_grad(f, x, h=1e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def num_jac(f, x, h=1e-6):
    """Central-difference Jacobian of a vector function (rows index outputs)."""
    x = np.asarray(x, dtype=np.float64)
    cols = []
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h
        cols.append((f(x + e) - f(x - e)) / (2.0 * h))
    return np.column_stack(cols)


def rel_err(a, b):
    """Frobenius-norm relative discrepancy, safe near zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return np.linalg.norm(a - b) / denom


def random_hawkes_params(gen, d, rho_max=0.85):
    """Draw strictly stationary parameters with decently spread magnitudes."""
    while True:
        nu = gen.uniform(0.2, 2.0, size=d)
        a = gen.uniform(0.5, 4.0, size=(d, d))
        c = gen.uniform(0.05, 1.5, size=(d, d))
        phi = c / a
        rho = np.max(np.abs(np.linalg.eigvals(phi)))
        if rho < rho_max:
            return HawkesParams(nu=nu, c=c, a=a)


def random_schedule(gen, d, horizon, n_events):
    """Sorted tie-free event times with uniform random marks."""
    times = np.sort(gen.uniform(0.0, horizon, size=n_events))
    times = np.unique(times)
    while times.size < n_events:
        extra = gen.uniform(0.0, horizon, size=n_events - times.size)
        times = np.unique(np.concatenate([times, extra]))
    marks = gen.integers(0, d, size=times.size)
    return times, marks
