"""Parametric intensity families and their running state.

Three families are supported:

* exponential Hawkes: lambda^a(t) = nu_a + sum_b sum_{T_i^b < t}
  c_{ab} exp(-a_{ab} (t - T_i^b)),
* homogeneous Poisson: constant rate vector,
* linear order-book flows: constant limit and market rates, cancellation
  rate proportional to the resting queue size at the event's level.

Flat parameter vectors are laid out as (nu_1..nu_d, C row-major, A row-major)
with structurally-zero kernels removed entirely.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HawkesParams",
    "HawkesState",
    "ParamBox",
    "PoissonParams",
    "LinearLOBParams",
    "LOBState",
    "HawkesModel",
    "PoissonModel",
    "LinearLOBModel",
    "hawkes_intensity",
    "hawkes_evolve",
    "hawkes_compensator",
    "branching_matrix",
    "hawkes_spectral_radius",
    "poisson_intensity",
    "lob_intensity",
]


def _freeze(arr, dtype=np.float64, shape=None):
    out = np.array(arr, dtype=dtype, copy=True)
    if shape is not None and out.shape != shape:
        raise ValueError(f"expected shape {shape}, got {out.shape}")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class HawkesParams:
    """Baselines nu (d,), amplitudes c (d,d), decay rates a (d,d).

    ``sparsity_mask`` optionally marks structurally-zero kernels: where the
    mask is True, c[i, j] is pinned to exactly 0 and both c[i, j] and
    a[i, j] are dropped from the flat parameter vector.
    """

    nu: np.ndarray
    c: np.ndarray
    a: np.ndarray
    sparsity_mask: np.ndarray | None = None

    def __post_init__(self):
        nu = _freeze(self.nu)
        d = nu.size
        c = _freeze(self.c, shape=(d, d))
        a = _freeze(self.a, shape=(d, d))
        mask = self.sparsity_mask
        if mask is not None:
            mask = _freeze(mask, dtype=bool, shape=(d, d))
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "sparsity_mask", mask)
        if np.any(nu <= 0.0):
            raise ValueError("baselines nu must be strictly positive")
        if np.any(a <= 0.0):
            raise ValueError("decay rates a must be strictly positive")
        if mask is not None:
            if np.any(c[mask] != 0.0):
                raise ValueError("masked kernel amplitudes must be exactly 0")
            if np.any(c[~mask] < 0.0):
                raise ValueError("active kernel amplitudes must be >= 0")
        elif np.any(c < 0.0):
            raise ValueError("kernel amplitudes must be >= 0")

    @property
    def d(self) -> int:
        return self.nu.size


@dataclass(frozen=True)
class HawkesState:
    """Running excitation state at a left limit time t.

    ``exc[i, j]`` is the summed kernel contribution of past component-j
    events to intensity i. ``exc_age[i, j]`` is the same sum with each term
    weighted by the event's age (t - T); it is the negative derivative of
    ``exc`` in the decay rate and drives all rate-derivative recursions.
    """

    exc: np.ndarray
    exc_age: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        exc = _freeze(self.exc)
        d = exc.shape[0]
        exc_age = _freeze(self.exc_age, shape=(d, d))
        if exc.shape != (d, d):
            raise ValueError(f"excitation state must be square, got {exc.shape}")
        if np.any(exc < 0.0) or np.any(exc_age < 0.0):
            raise ValueError("excitation state must be entrywise >= 0")
        object.__setattr__(self, "exc", exc)
        object.__setattr__(self, "exc_age", exc_age)
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def zero(cls, d: int, t: float = 0.0) -> "HawkesState":
        z = np.zeros((d, d))
        return cls(exc=z, exc_age=z.copy(), t=t)

    @property
    def d(self) -> int:
        return self.exc.shape[0]


def hawkes_intensity(state: HawkesState, params: HawkesParams) -> np.ndarray:
    """lambda^a = nu_a + sum_b exc[a, b]; every entry >= nu_a > 0."""
    return params.nu + state.exc.sum(axis=1)


def hawkes_evolve(
    state: HawkesState,
    params: HawkesParams,
    dt: float,
    jump_mark: int | None = None,
) -> HawkesState:
    """Advance the excitation state by dt, then register an optional jump.

    Decay is entrywise exc *= exp(-a dt); the age-weighted companion picks
    up dt * exc before decaying. A jump on component b adds column b of c
    after the decay (a fresh event has age zero, so exc_age is untouched).
    """
    if dt < 0.0:
        raise ValueError(f"cannot evolve by negative dt {dt}")
    decay = np.exp(-params.a * dt)
    exc = state.exc * decay
    exc_age = (state.exc_age + dt * state.exc) * decay
    if jump_mark is not None:
        exc = exc.copy()
        exc[:, jump_mark] += params.c[:, jump_mark]
    return HawkesState(exc=exc, exc_age=exc_age, t=state.t + dt)


def hawkes_compensator(stream, params: HawkesParams, t: float) -> np.ndarray:
    """Integrated intensity Lambda^a(t) in closed form.

    Lambda^a(t) = nu_a t + sum_b sum_{T_i^b < t} (c_ab / a_ab)
    (1 - exp(-a_ab (t - T_i^b))).
    """
    if not (0.0 <= t <= stream.horizon):
        raise ValueError(f"t={t} outside [0, {stream.horizon}]")
    out = params.nu * t
    past = stream.times < t
    ages = t - stream.times[past]
    marks = stream.marks[past]
    for b in range(params.d):
        ages_b = ages[marks == b]
        if ages_b.size == 0:
            continue
        # column b of c / a excites every component
        w = 1.0 - np.exp(-np.outer(params.a[:, b], ages_b))
        out = out + (params.c[:, b] / params.a[:, b]) * w.sum(axis=1)
    return out


def branching_matrix(params: HawkesParams) -> np.ndarray:
    """Expected direct offspring counts: entry (a, b) is c_ab / a_ab."""
    return params.c / params.a


def hawkes_spectral_radius(params: HawkesParams) -> float:
    """Spectral radius of the branching matrix; < 1 means stationary."""
    phi = branching_matrix(params)
    return float(np.max(np.abs(np.linalg.eigvals(phi))))


@dataclass(frozen=True)
class PoissonParams:
    """Constant intensity vector."""

    rate: np.ndarray

    def __post_init__(self):
        rate = _freeze(np.atleast_1d(self.rate))
        object.__setattr__(self, "rate", rate)
        if np.any(rate <= 0.0):
            raise ValueError("Poisson rates must be strictly positive")

    @property
    def d(self) -> int:
        return self.rate.size


def poisson_intensity(params: PoissonParams) -> np.ndarray:
    return params.rate.copy()


@dataclass(frozen=True)
class LinearLOBParams:
    """Rates of the linear-cancellation order-book model.

    Per level: a constant limit-order rate and a cancellation coefficient
    multiplying the resting queue size. Two constant market-order rates, one
    per side; a market order removes one unit from the best nonempty queue
    on its side.
    """

    limit_rates: np.ndarray
    cancel_coeffs: np.ndarray
    market_rate_bid: float
    market_rate_ask: float

    def __post_init__(self):
        lim = _freeze(np.atleast_1d(self.limit_rates))
        can = _freeze(np.atleast_1d(self.cancel_coeffs), shape=lim.shape)
        object.__setattr__(self, "limit_rates", lim)
        object.__setattr__(self, "cancel_coeffs", can)
        object.__setattr__(self, "market_rate_bid", float(self.market_rate_bid))
        object.__setattr__(self, "market_rate_ask", float(self.market_rate_ask))
        # Zero rates are allowed so degenerate books can be simulated
        # (e.g. no limit flow at all); estimation boxes keep rates positive.
        if (
            np.any(lim < 0.0)
            or np.any(can < 0.0)
            or self.market_rate_bid < 0.0
            or self.market_rate_ask < 0.0
        ):
            raise ValueError("order-book rates must be nonnegative")

    @property
    def m(self) -> int:
        return self.limit_rates.size


@dataclass(frozen=True)
class LOBState:
    """Queue sizes per price level; bid levels negative, ask levels positive.

    Levels [0, m//2) are the bid side ordered best-last (index m//2 - 1 sits
    at the spread); levels [m//2, m) are the ask side ordered best-first.
    Orders are unit size, so queues move by one unit at a time.
    """

    queues: np.ndarray

    def __post_init__(self):
        q = _freeze(self.queues, dtype=np.int64)
        object.__setattr__(self, "queues", q)
        mb = q.size // 2
        if np.any(q[:mb] > 0) or np.any(q[mb:] < 0):
            raise ValueError("bid queues must be <= 0 and ask queues >= 0")

    @classmethod
    def empty(cls, m: int) -> "LOBState":
        return cls(queues=np.zeros(m, dtype=np.int64))

    @property
    def m(self) -> int:
        return self.queues.size

    @property
    def n_bid(self) -> int:
        return self.queues.size // 2

    def depth(self) -> np.ndarray:
        """Absolute queue sizes |X|."""
        return np.abs(self.queues)

    def best_bid(self) -> int | None:
        """Index of the nonempty bid level closest to the spread, if any."""
        for i in range(self.n_bid - 1, -1, -1):
            if self.queues[i] != 0:
                return i
        return None

    def best_ask(self) -> int | None:
        for i in range(self.n_bid, self.m):
            if self.queues[i] != 0:
                return i
        return None


def lob_intensity(state: LOBState, params: LinearLOBParams) -> np.ndarray:
    """Event-type rate vector for the linear order-book model.

    Layout: m limit rates, m cancellation rates (coefficient times queue
    depth, exactly zero on an empty queue), then the two constant market
    rates (bid side, ask side).
    """
    depth = state.depth().astype(np.float64)
    return np.concatenate(
        [
            params.limit_rates,
            params.cancel_coeffs * depth,
            [params.market_rate_bid, params.market_rate_ask],
        ]
    )


@dataclass(frozen=True)
class ParamBox:
    """Per-coordinate bounds for a flat parameter vector, 0 < lower < upper."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _freeze(np.atleast_1d(self.lower))
        hi = _freeze(np.atleast_1d(self.upper), shape=lo.shape)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if np.any(lo <= 0.0) or np.any(lo >= hi):
            raise ValueError("box bounds must satisfy 0 < lower < upper")

    @property
    def n(self) -> int:
        return self.lower.size

    def contains(self, theta: np.ndarray, rtol: float = 0.0) -> bool:
        theta = np.asarray(theta, dtype=np.float64)
        slack = rtol * (self.upper - self.lower)
        return bool(
            np.all(theta >= self.lower - slack) and np.all(theta <= self.upper + slack)
        )

    def clip(self, theta: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(theta, dtype=np.float64), self.lower, self.upper)

    def log_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return np.log(self.lower), np.log(self.upper)


# Default estimation box, wide enough not to bind in desk-scale experiments.
_DEFAULT_NU_BOUNDS = (1e-4, 1e3)
_DEFAULT_C_BOUNDS = (1e-4, 1e3)
_DEFAULT_A_BOUNDS = (1e-3, 1e3)


class HawkesModel:
    """Exponential Hawkes family descriptor for a fixed dimension and mask."""

    name = "hawkes"

    def __init__(self, d: int, sparsity_mask=None):
        if d < 1:
            raise ValueError("d must be >= 1")
        self.d = int(d)
        if sparsity_mask is None:
            self.sparsity_mask = None
            self._active = np.ones((d, d), dtype=bool)
        else:
            mask = np.array(sparsity_mask, dtype=bool)
            if mask.shape != (d, d):
                raise ValueError(f"mask must be shape ({d}, {d})")
            self.sparsity_mask = mask
            self._active = ~mask
        # row-major flat positions of the active kernel entries
        self._kernel_idx = np.flatnonzero(self._active.ravel())

    @property
    def n_kernels(self) -> int:
        return self._kernel_idx.size

    @property
    def dim(self) -> int:
        return self.d + 2 * self.n_kernels

    def param_names(self) -> list[str]:
        names = [f"nu[{i}]" for i in range(self.d)]
        pairs = [(k // self.d, k % self.d) for k in self._kernel_idx]
        names += [f"c[{i},{j}]" for i, j in pairs]
        names += [f"a[{i},{j}]" for i, j in pairs]
        return names

    def pack(self, params: HawkesParams) -> np.ndarray:
        if params.d != self.d:
            raise ValueError(f"params have d={params.d}, model expects {self.d}")
        return np.concatenate(
            [
                params.nu,
                params.c.ravel()[self._kernel_idx],
                params.a.ravel()[self._kernel_idx],
            ]
        )

    def unpack(self, theta) -> HawkesParams:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.dim,):
            raise ValueError(f"theta must have length {self.dim}, got {theta.shape}")
        d, k = self.d, self.n_kernels
        c = np.zeros(d * d)
        a = np.ones(d * d)
        c[self._kernel_idx] = theta[d : d + k]
        a[self._kernel_idx] = theta[d + k : d + 2 * k]
        return HawkesParams(
            nu=theta[:d],
            c=c.reshape(d, d),
            a=a.reshape(d, d),
            sparsity_mask=self.sparsity_mask,
        )

    def natural_indices(self) -> np.ndarray:
        """Positions of the free coordinates inside the dense
        (nu, c row-major, a row-major) layout of length d + 2*d^2."""
        d = self.d
        return np.concatenate(
            [np.arange(d), d + self._kernel_idx, d + d * d + self._kernel_idx]
        )

    def default_box(self) -> ParamBox:
        lo = np.concatenate(
            [
                np.full(self.d, _DEFAULT_NU_BOUNDS[0]),
                np.full(self.n_kernels, _DEFAULT_C_BOUNDS[0]),
                np.full(self.n_kernels, _DEFAULT_A_BOUNDS[0]),
            ]
        )
        hi = np.concatenate(
            [
                np.full(self.d, _DEFAULT_NU_BOUNDS[1]),
                np.full(self.n_kernels, _DEFAULT_C_BOUNDS[1]),
                np.full(self.n_kernels, _DEFAULT_A_BOUNDS[1]),
            ]
        )
        return ParamBox(lower=lo, upper=hi)


class PoissonModel:
    """Homogeneous Poisson family: theta is the rate vector itself."""

    name = "poisson"

    def __init__(self, d: int):
        if d < 1:
            raise ValueError("d must be >= 1")
        self.d = int(d)

    @property
    def dim(self) -> int:
        return self.d

    def param_names(self) -> list[str]:
        return [f"rate[{i}]" for i in range(self.d)]

    def pack(self, params: PoissonParams) -> np.ndarray:
        return params.rate.copy()

    def unpack(self, theta) -> PoissonParams:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.d,):
            raise ValueError(f"theta must have length {self.d}")
        return PoissonParams(rate=theta)

    def default_box(self) -> ParamBox:
        return ParamBox(
            lower=np.full(self.d, _DEFAULT_NU_BOUNDS[0]),
            upper=np.full(self.d, _DEFAULT_NU_BOUNDS[1]),
        )


class LinearLOBModel:
    """Linear-cancellation order-book family over 2m + 2 event types.

    Event types 0..m-1 are limit orders per level, m..2m-1 cancellations per
    level, 2m a market order against the best bid, 2m+1 against the best
    ask. The likelihood replays the queue trajectory from ``x0``, so fitted
    streams must start from that state.
    """

    name = "lob-linear"

    def __init__(self, m: int, x0=None):
        if m < 2:
            raise ValueError("need at least two price levels")
        self.m = int(m)
        if x0 is None:
            self.x0 = LOBState.empty(self.m)
        elif isinstance(x0, LOBState):
            if x0.m != self.m:
                raise ValueError(f"x0 has {x0.m} levels, model expects {self.m}")
            self.x0 = x0
        else:
            self.x0 = LOBState(queues=np.asarray(x0, dtype=np.int64))

    @property
    def dim(self) -> int:
        return 2 * self.m + 2

    @property
    def d(self) -> int:
        """Number of event types in the marked stream."""
        return 2 * self.m + 2

    def param_names(self) -> list[str]:
        return (
            [f"limit[{i}]" for i in range(self.m)]
            + [f"cancel[{i}]" for i in range(self.m)]
            + ["market_bid", "market_ask"]
        )

    def pack(self, params: LinearLOBParams) -> np.ndarray:
        return np.concatenate(
            [
                params.limit_rates,
                params.cancel_coeffs,
                [params.market_rate_bid, params.market_rate_ask],
            ]
        )

    def unpack(self, theta) -> LinearLOBParams:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.dim,):
            raise ValueError(f"theta must have length {self.dim}")
        m = self.m
        return LinearLOBParams(
            limit_rates=theta[:m],
            cancel_coeffs=theta[m : 2 * m],
            market_rate_bid=theta[2 * m],
            market_rate_ask=theta[2 * m + 1],
        )

    def default_box(self) -> ParamBox:
        return ParamBox(
            lower=np.full(self.dim, _DEFAULT_NU_BOUNDS[0]),
            upper=np.full(self.dim, _DEFAULT_NU_BOUNDS[1]),
        )
