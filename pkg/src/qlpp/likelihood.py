"""Log likelihood, derivatives and information matrices for event streams.

Everything here evaluates sums of log-intensities at events minus integrated
intensities, for whichever model family the caller hands in. The Hawkes
family runs through compiled single-pass recursions; the Poisson and
order-book families have closed forms. All derivative output is restricted
to the model's free coordinates (structural zeros are dropped).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _hawkes_core as core
from .events import EventStream
from .models import (
    HawkesModel,
    HawkesState,
    LinearLOBModel,
    PoissonModel,
)

__all__ = [
    "ZeroIntensityAtEvent",
    "QuadratureError",
    "LikelihoodEvaluation",
    "RatioFieldSample",
    "log_likelihood",
    "score",
    "observed_information",
    "empirical_fisher",
    "evaluate",
    "ratio_field",
    "compensator_path",
    "intensity_path",
]

# 8-point Gauss-Legendre on [-1, 1]; panels are bisected until two successive
# refinements of the information integral agree to _FISHER_RTOL in max norm.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_FISHER_RTOL = 1e-9


class ZeroIntensityAtEvent(ValueError):
    """An observed event sits where the model puts (numerically) zero rate.

    The offending event's position in the stream is in ``index``. The
    likelihood is -inf there, so evaluation stops instead of returning junk.
    """

    def __init__(self, index: int, mark: int, time: float):
        self.index = int(index)
        self.mark = int(mark)
        self.time = float(time)
        super().__init__(
            f"event {index} (component {mark} at t={time:.6g}) has zero intensity"
        )


class QuadratureError(RuntimeError):
    """Adaptive panel refinement hit its cap without stabilizing."""


@dataclass(frozen=True)
class LikelihoodEvaluation:
    """One-stop likelihood evaluation at a fixed parameter point.

    ``score`` and the matrices are laid out in the model's free-coordinate
    order. ``empirical_fisher`` is None when not requested.
    """

    value: float
    score: np.ndarray
    observed_info: np.ndarray
    empirical_fisher: np.ndarray | None


@dataclass(frozen=True)
class RatioFieldSample:
    """Time-normalized log-likelihood differences around a reference point.

    values[i] = (l(thetas[i]) - l(ref_theta)) / horizon; nonpositive values
    at every off-reference grid point are what a well-separated maximum
    looks like. min_curvature is min_i -values[i] / |thetas[i] - ref|^2 over
    off-reference points (None when the grid has none).
    """

    thetas: np.ndarray
    values: np.ndarray
    ref_theta: np.ndarray
    ref_value: float
    min_curvature: float | None


def _check_stream(stream: EventStream, d_expected: int, what: str):
    if stream.d != d_expected:
        raise ValueError(
            f"stream has {stream.d} components but {what} expects {d_expected}"
        )


def _initial_exc(model: HawkesModel, initial_state):
    if initial_state is None:
        return np.zeros((model.d, model.d))
    if not isinstance(initial_state, HawkesState):
        raise TypeError("initial_state must be a HawkesState")
    if initial_state.d != model.d:
        raise ValueError(
            f"initial state is {initial_state.d}-dimensional, model is {model.d}"
        )
    return initial_state.exc.copy()


def _hawkes_pass(stream, model, theta, initial_state, order):
    params = model.unpack(theta)
    e0 = _initial_exc(model, initial_state)
    status, val, grad, hess = core.hawkes_pass(
        stream.times, stream.marks, 0.0, stream.horizon,
        params.nu, params.c, params.a, e0, order,
    )
    if status > 0:
        i = status - 1
        raise ZeroIntensityAtEvent(i, stream.marks[i], stream.times[i])
    idx = model.natural_indices()
    return val, grad[idx], hess[np.ix_(idx, idx)]


@njit(cache=True)
def _lob_replay_core(times, marks, q0, n_bid, horizon, want_path):
    # Signed-depth book walk. Market rates enter as indicators times the
    # constant: arrivals against an empty side never produce an event.
    m = q0.size
    K = 2 * m + 2
    n = times.size
    q = q0.copy()
    counts = np.zeros(K)
    sum_log_g = np.zeros(K)
    int_g = np.zeros(K)
    path = np.zeros((n + 1, K)) if want_path else np.zeros((1, K))
    # structural factor per type at unit coefficient
    g = np.empty(K)
    for j in range(m):
        g[j] = 1.0
        g[m + j] = abs(q[j])
    g[2 * m] = 0.0
    for j in range(n_bid):
        if q[j] != 0:
            g[2 * m] = 1.0
            break
    g[2 * m + 1] = 0.0
    for j in range(n_bid, m):
        if q[j] != 0:
            g[2 * m + 1] = 1.0
            break
    prev = 0.0
    for i in range(n):
        t = times[i]
        k = marks[i]
        dt = t - prev
        for j in range(K):
            int_g[j] += g[j] * dt
        if g[k] <= 0.0:
            # cancel at an empty level or market against an empty side
            return counts, sum_log_g, int_g, path, i + 1
        counts[k] += 1.0
        sum_log_g[k] += np.log(g[k])
        if k < m:
            q[k] += -1 if k < n_bid else 1
        elif k < 2 * m:
            lvl = k - m
            q[lvl] += 1 if q[lvl] < 0 else -1
        elif k == 2 * m:
            for j in range(n_bid - 1, -1, -1):
                if q[j] != 0:
                    q[j] += 1
                    break
        else:
            for j in range(n_bid, m):
                if q[j] != 0:
                    q[j] -= 1
                    break
        for j in range(m):
            g[m + j] = abs(q[j])
        g[2 * m] = 0.0
        for j in range(n_bid):
            if q[j] != 0:
                g[2 * m] = 1.0
                break
        g[2 * m + 1] = 0.0
        for j in range(n_bid, m):
            if q[j] != 0:
                g[2 * m + 1] = 1.0
                break
        if want_path:
            for j in range(K):
                path[i, j] = int_g[j]
        prev = t
    dt = horizon - prev
    for j in range(K):
        int_g[j] += g[j] * dt
    if want_path:
        for j in range(K):
            path[n, j] = int_g[j]
    return counts, sum_log_g, int_g, path, 0


def _lob_replay(stream, model, want_path=False):
    """Deterministic replay of the book through the stream.

    Returns (counts, sum_log_g, int_g, path) where int_g integrates the
    per-type structural factor over (0, horizon] and sum_log_g adds its log
    at each event of that type. path (when asked for) holds the cumulative
    int_g row at every event time plus the horizon, for residual analysis.
    The parameter-free split works because every rate is theta_k times a
    factor depending only on the book.
    """
    m = model.m
    K = 2 * m + 2
    _check_stream(stream, K, "the order-book model")
    counts, sum_log_g, int_g, path, status = _lob_replay_core(
        stream.times, stream.marks, model.x0.queues, m // 2,
        stream.horizon, want_path,
    )
    if status > 0:
        i = status - 1
        raise ZeroIntensityAtEvent(i, stream.marks[i], stream.times[i])
    return counts, sum_log_g, int_g, (path if want_path else None)


def log_likelihood(stream, model, theta, initial_state=None) -> float:
    """Log likelihood of the stream on (0, horizon] at parameter theta.

    For the Hawkes family, initial_state supplies the excitation standing at
    time zero (treated as fixed data, e.g. carried over from an earlier
    window); by default the process starts empty.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if isinstance(model, HawkesModel):
        _check_stream(stream, model.d, "the model")
        val, _, _ = _hawkes_pass(stream, model, theta, initial_state, 0)
        return float(val)
    if isinstance(model, PoissonModel):
        _check_stream(stream, model.d, "the model")
        rate = model.unpack(theta).rate
        counts = stream.counts().astype(np.float64)
        return float(np.sum(counts * np.log(rate)) - stream.horizon * rate.sum())
    if isinstance(model, LinearLOBModel):
        rates = model.pack(model.unpack(theta))
        counts, sum_log_g, int_g, _ = _lob_replay(stream, model)
        # a zero rate is only admissible when no event of that type occurred
        with np.errstate(divide="ignore"):
            log_rates = np.log(rates)
        pos = counts > 0.0
        return float(
            np.sum(counts[pos] * log_rates[pos])
            + sum_log_g.sum()
            - np.dot(rates, int_g)
        )
    raise TypeError(f"unsupported model {model!r}")


def _positive_lob_rates(model, theta):
    rates = model.pack(model.unpack(theta))
    if np.any(rates <= 0.0):
        raise ValueError("derivatives need strictly positive order-book rates")
    return rates


def score(stream, model, theta, initial_state=None) -> np.ndarray:
    """Gradient of the log likelihood in the model's free coordinates."""
    theta = np.asarray(theta, dtype=np.float64)
    if isinstance(model, HawkesModel):
        _check_stream(stream, model.d, "the model")
        _, grad, _ = _hawkes_pass(stream, model, theta, initial_state, 1)
        return grad
    if isinstance(model, PoissonModel):
        _check_stream(stream, model.d, "the model")
        rate = model.unpack(theta).rate
        counts = stream.counts().astype(np.float64)
        return counts / rate - stream.horizon
    if isinstance(model, LinearLOBModel):
        rates = _positive_lob_rates(model, theta)
        counts, _, int_g, _ = _lob_replay(stream, model)
        return counts / rates - int_g
    raise TypeError(f"unsupported model {model!r}")


def observed_information(stream, model, theta, initial_state=None) -> np.ndarray:
    """Negative hessian of the log likelihood, free coordinates, NOT divided
    by the horizon."""
    theta = np.asarray(theta, dtype=np.float64)
    if isinstance(model, HawkesModel):
        _check_stream(stream, model.d, "the model")
        _, _, hess = _hawkes_pass(stream, model, theta, initial_state, 2)
        return -hess
    if isinstance(model, PoissonModel):
        _check_stream(stream, model.d, "the model")
        rate = model.unpack(theta).rate
        counts = stream.counts().astype(np.float64)
        return np.diag(counts / rate**2)
    if isinstance(model, LinearLOBModel):
        rates = _positive_lob_rates(model, theta)
        counts, _, _, _ = _lob_replay(stream, model)
        return np.diag(counts / rates**2)
    raise TypeError(f"unsupported model {model!r}")


def empirical_fisher(stream, model, theta, initial_state=None) -> np.ndarray:
    """Time-averaged information matrix (1/T) int (dlam)(dlam)^T / lam dt.

    Per-component contributions are exactly block diagonal across components
    because component alpha's intensity only involves its own row of
    parameters. Hawkes integrals run on adaptive Gauss-Legendre panels; the
    Poisson and order-book cases are exact.
    """
    theta = np.asarray(theta, dtype=np.float64)
    T = stream.horizon
    if isinstance(model, HawkesModel):
        _check_stream(stream, model.d, "the model")
        params = model.unpack(theta)
        e0 = _initial_exc(model, initial_state)
        status, gamma = core.hawkes_fisher_pass(
            stream.times, stream.marks, 0.0, T,
            params.nu, params.c, params.a, e0,
            _FISHER_RTOL, _GL_NODES, _GL_WEIGHTS,
        )
        if status == core.QUAD_FAIL:
            raise QuadratureError(
                "information integral failed to stabilize at the panel cap"
            )
        idx = model.natural_indices()
        return gamma[np.ix_(idx, idx)] / T
    if isinstance(model, PoissonModel):
        _check_stream(stream, model.d, "the model")
        rate = model.unpack(theta).rate
        return np.diag(1.0 / rate)
    if isinstance(model, LinearLOBModel):
        rates = _positive_lob_rates(model, theta)
        _, _, int_g, _ = _lob_replay(stream, model)
        return np.diag(int_g / (T * rates))
    raise TypeError(f"unsupported model {model!r}")


def evaluate(
    stream, model, theta, initial_state=None, with_fisher=True
) -> LikelihoodEvaluation:
    """Value, score, observed information and (optionally) the time-averaged
    information matrix in a single call."""
    theta = np.asarray(theta, dtype=np.float64)
    if isinstance(model, HawkesModel):
        _check_stream(stream, model.d, "the model")
        val, grad, hess = _hawkes_pass(stream, model, theta, initial_state, 2)
        fisher = (
            empirical_fisher(stream, model, theta, initial_state)
            if with_fisher
            else None
        )
        return LikelihoodEvaluation(
            value=float(val), score=grad, observed_info=-hess,
            empirical_fisher=fisher,
        )
    val = log_likelihood(stream, model, theta, initial_state)
    return LikelihoodEvaluation(
        value=val,
        score=score(stream, model, theta, initial_state),
        observed_info=observed_information(stream, model, theta, initial_state),
        empirical_fisher=(
            empirical_fisher(stream, model, theta, initial_state)
            if with_fisher
            else None
        ),
    )


def ratio_field(stream, model, theta_ref, thetas, initial_state=None) -> RatioFieldSample:
    """Log-likelihood differences l(theta) - l(theta_ref) over a grid.

    Points where the likelihood is -inf (an observed event with zero rate)
    come back as -inf rather than raising; the reference point itself must
    be evaluable.
    """
    theta_ref = np.asarray(theta_ref, dtype=np.float64)
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    if thetas.shape[1] != theta_ref.size:
        raise ValueError(
            f"grid rows have length {thetas.shape[1]}, reference {theta_ref.size}"
        )
    ref_value = log_likelihood(stream, model, theta_ref, initial_state)
    values = np.empty(thetas.shape[0])
    for i in range(thetas.shape[0]):
        try:
            values[i] = log_likelihood(stream, model, thetas[i], initial_state)
        except ZeroIntensityAtEvent:
            values[i] = -np.inf
    values = (values - ref_value) / stream.horizon
    dist2 = np.sum((thetas - theta_ref) ** 2, axis=1)
    off = dist2 > 0.0
    chi0 = float(np.min(-values[off] / dist2[off])) if np.any(off) else None
    return RatioFieldSample(
        thetas=thetas, values=values, ref_theta=theta_ref,
        ref_value=float(ref_value), min_curvature=chi0,
    )


def compensator_path(stream, model, theta, initial_state=None) -> np.ndarray:
    """Cumulative integrated intensity per component, one row per event plus
    a final row at the horizon. Feeds time-rescaling residuals."""
    theta = np.asarray(theta, dtype=np.float64)
    if isinstance(model, HawkesModel):
        _check_stream(stream, model.d, "the model")
        params = model.unpack(theta)
        e0 = _initial_exc(model, initial_state)
        return core.hawkes_compensator_at_events(
            stream.times, stream.marks, 0.0, stream.horizon,
            params.nu, params.c, params.a, e0,
        )
    if isinstance(model, PoissonModel):
        _check_stream(stream, model.d, "the model")
        rate = model.unpack(theta).rate
        ts = np.append(stream.times, stream.horizon)
        return ts[:, None] * rate[None, :]
    if isinstance(model, LinearLOBModel):
        params = model.unpack(theta)
        rates = model.pack(params)
        _, _, _, path = _lob_replay(stream, model, want_path=True)
        return path * rates[None, :]
    raise TypeError(f"unsupported model {model!r}")


def intensity_path(stream, model, theta, grid, initial_state=None) -> np.ndarray:
    """Left-limit intensity vectors at the (sorted, in-horizon) grid times."""
    theta = np.asarray(theta, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or np.any(np.diff(grid) < 0):
        raise ValueError("grid must be a sorted 1-D array")
    if grid.size and (grid[0] < 0.0 or grid[-1] > stream.horizon):
        raise ValueError("grid times must lie inside [0, horizon]")
    if isinstance(model, HawkesModel):
        _check_stream(stream, model.d, "the model")
        params = model.unpack(theta)
        e0 = _initial_exc(model, initial_state)
        return core.hawkes_intensity_on_grid(
            stream.times, stream.marks, grid, params.nu, params.c, params.a,
            e0, 0.0,
        )
    if isinstance(model, PoissonModel):
        _check_stream(stream, model.d, "the model")
        rate = model.unpack(theta).rate
        return np.broadcast_to(rate, (grid.size, rate.size)).copy()
    raise TypeError(f"unsupported model {model!r}")
