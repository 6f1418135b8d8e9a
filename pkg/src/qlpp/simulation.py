"""Samplers: Ogata thinning, closed-form inversion, and the book simulator.

All paths are driven by counter-based generators derived from a single seed
(see rng.rng_stream), so replications are schedule-independent and reruns
are bit-identical. Burn-in simulates on (0, B + T], drops everything at or
before B and shifts, which is the same as starting the clock at -B.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _hawkes_core as core
from .events import EventStream
from .models import (
    HawkesModel,
    HawkesParams,
    HawkesState,
    LinearLOBParams,
    LOBState,
    PoissonModel,
    PoissonParams,
    hawkes_spectral_radius,
)
from .rng import rng_stream

__all__ = [
    "SimConfig",
    "LOBTrajectory",
    "simulate_thinning",
    "simulate_exact",
    "simulate_lob",
    "conditional_jump_density",
    "stationary_burn_in",
]

# hard ceiling on events per path; growing past this means a runaway
# (supercritical) configuration rather than a legitimate workload
_CAP_LIMIT = 20_000_000


@dataclass(frozen=True)
class SimConfig:
    """Simulation window plus reproducibility and warm-up knobs.

    ``initial_state`` is a HawkesState for the excitation families or an
    LOBState for the book simulator; it applies at the start of the burn-in
    period. Events in (0, burn_in] are discarded and the remaining times are
    shifted so the returned stream lives on (0, horizon].
    """

    horizon: float
    seed: int = 0
    initial_state: object | None = None
    burn_in: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "burn_in", float(self.burn_in))
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if self.burn_in < 0.0:
            raise ValueError("burn_in must be nonnegative")


def stationary_burn_in(params: HawkesParams) -> float:
    """Conservative warm-up length 20 / (min a * (1 - rho)).

    The excitation forgets its start state at some exponential rate; that
    rate has no closed form, so this uses the slowest kernel decay scaled by
    the distance to criticality. Deliberately generous.
    """
    rho = hawkes_spectral_radius(params)
    if rho >= 1.0:
        raise ValueError(f"no stationary regime: spectral radius {rho:.4g} >= 1")
    return 20.0 / (float(params.a.min()) * (1.0 - rho))


def _initial_exc_for(params: HawkesParams, initial_state) -> np.ndarray:
    if initial_state is None:
        return np.zeros((params.d, params.d))
    if not isinstance(initial_state, HawkesState):
        raise TypeError("initial_state must be a HawkesState")
    if initial_state.d != params.d:
        raise ValueError(
            f"initial state is {initial_state.d}-dimensional, need {params.d}"
        )
    return initial_state.exc.copy()


def _event_cap(params: HawkesParams, span: float, e0: np.ndarray) -> int:
    rho = hawkes_spectral_radius(params)
    if rho < 1.0:
        mean_rate = params.nu.sum() / (1.0 - rho)
        expected = mean_rate * span + e0.sum() / params.a.min()
        cap = max(100_000, int(50.0 * expected))
    else:
        cap = 10_000_000
    return min(cap, _CAP_LIMIT)


def _finish_path(status, times, marks, n, config, cap, sampler):
    if status == core.BOUND_VIOLATION:
        raise AssertionError("thinning bound violated; state update bug")
    if status == core.ROOT_FAIL:
        raise RuntimeError("interarrival inversion did not reach tolerance")
    if status == core.CAP_EXCEEDED:
        raise RuntimeError(
            f"{sampler} produced more than {cap} events; "
            "configuration is likely supercritical"
        )
    times = times[:n].copy()
    marks = marks[:n].copy()
    if config.burn_in > 0.0:
        keep = times > config.burn_in
        times = times[keep] - config.burn_in
        marks = marks[keep]
    return times, marks


def simulate_thinning(model, theta, config: SimConfig) -> EventStream:
    """Draw one path on (0, horizon] by thinning a dominating proposal clock.

    The bound is the current total intensity, refreshed at every proposal;
    between jumps the excitation only decays, so the bound is exact and the
    acceptance test doubles as a runtime correctness assertion. Poisson
    models run through the same kernel with zero excitation (the bound is
    then tight and nothing is ever rejected).
    """
    theta = np.asarray(theta, dtype=np.float64)
    if isinstance(model, HawkesModel):
        params = model.unpack(theta)
    elif isinstance(model, PoissonModel):
        if config.initial_state is not None:
            raise TypeError("Poisson simulation takes no initial state")
        rate = model.unpack(theta).rate
        params = HawkesParams(
            nu=rate, c=np.zeros((model.d, model.d)), a=np.ones((model.d, model.d))
        )
    else:
        raise TypeError(f"unsupported model {model!r}")
    e0 = _initial_exc_for(params, config.initial_state)
    span = config.burn_in + config.horizon
    cap = _event_cap(params, span, e0)
    gen = rng_stream(config.seed)
    status, times, marks, n = core.hawkes_thinning_path(
        gen, params.nu, params.c, params.a, e0, span, cap
    )
    times, marks = _finish_path(status, times, marks, n, config, cap, "thinning")
    return EventStream(times=times, marks=marks, d=params.d, horizon=config.horizon)


def simulate_exact(params: HawkesParams, config: SimConfig) -> EventStream:
    """Draw one path by inverting the interarrival CDF in closed form.

    The integrated total intensity ahead of the current state is available
    analytically, so each interarrival solves M(s) = e for a standard
    exponential e by monotone Newton iteration (tolerance 1e-12 in CDF
    space); the mark is categorical in the per-component intensities at the
    solved time. Distributionally identical to simulate_thinning.
    """
    if not isinstance(params, HawkesParams):
        raise TypeError("simulate_exact wants HawkesParams")
    e0 = _initial_exc_for(params, config.initial_state)
    span = config.burn_in + config.horizon
    cap = _event_cap(params, span, e0)
    gen = rng_stream(config.seed)
    status, times, marks, n = core.hawkes_exact_path(
        gen, params.nu, params.c, params.a, e0, span, cap
    )
    times, marks = _finish_path(status, times, marks, n, config, cap, "inversion")
    return EventStream(times=times, marks=marks, d=params.d, horizon=config.horizon)


def conditional_jump_density(state: HawkesState, params: HawkesParams, t: float) -> float:
    """Density of the time to the next event given the standing excitation.

    f(t) = mu(t) exp(-integral of mu over (0, t]) with mu the total
    intensity run forward from the state with no intervening events; the
    integral is closed-form. With zero excitation this is Exp(sum nu).
    """
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if state.d != params.d:
        raise ValueError("state and params disagree on dimension")
    nubar = float(params.nu.sum())
    decay = np.exp(-params.a * t)
    mu_t = nubar + float(np.sum(state.exc * decay))
    integral = nubar * t + float(np.sum(state.exc / params.a * (1.0 - decay)))
    return mu_t * math.exp(-integral)


@dataclass(frozen=True)
class LOBTrajectory:
    """Piecewise-constant queue path: state after each recorded event.

    Segment i of the path holds ``queues[i]`` on [times[i], times[i+1]); the
    initial state covers [0, times[0]). All summary statistics are
    time-weighted over (0, horizon].
    """

    times: np.ndarray
    queues: np.ndarray
    x0: np.ndarray
    horizon: float

    def _segments(self, window=None):
        """Yield (duration, state_row) pairs clipped to the window."""
        lo, hi = (0.0, self.horizon) if window is None else window
        if not (0.0 <= lo < hi <= self.horizon):
            raise ValueError(f"window ({lo}, {hi}] outside (0, {self.horizon}]")
        bounds = np.concatenate([[0.0], self.times, [self.horizon]])
        states = np.vstack([self.x0[None, :], self.queues])
        for i in range(states.shape[0]):
            a = max(bounds[i], lo)
            b = min(bounds[i + 1], hi)
            if b > a:
                yield b - a, states[i]

    def mean_depth(self, window=None) -> np.ndarray:
        """Time-weighted mean of |X| per level."""
        m = self.x0.size
        acc = np.zeros(m)
        span = 0.0
        for w, s in self._segments(window):
            acc += w * np.abs(s)
            span += w
        return acc / span

    def max_depth(self) -> np.ndarray:
        states = np.vstack([self.x0[None, :], self.queues])
        return np.max(np.abs(states), axis=0)

    def occupancy(self, level: int, window=None) -> dict[int, float]:
        """Fraction of time level spends at each |size|."""
        hist: dict[int, float] = {}
        span = 0.0
        for w, s in self._segments(window):
            k = int(abs(s[level]))
            hist[k] = hist.get(k, 0.0) + w
            span += w
        return {k: v / span for k, v in sorted(hist.items())}

    def depth_quantile(self, level: int, q: float, window=None) -> int:
        """Smallest size whose cumulative occupancy reaches q."""
        acc = 0.0
        hist = self.occupancy(level, window)
        for k, frac in hist.items():
            acc += frac
            if acc >= q:
                return k
        return max(hist)

    def summary(self) -> dict:
        mean = self.mean_depth()
        return {
            "mean_depth": mean.tolist(),
            "max_depth": self.max_depth().tolist(),
            "occupancy": [self.occupancy(lvl) for lvl in range(self.x0.size)],
            "n_events": int(self.times.size),
            "horizon": self.horizon,
        }


def _lob_rate_vector(params, queues, n_bid):
    m = queues.size
    rates = np.empty(2 * m + 2)
    if isinstance(params, LinearLOBParams):
        rates[:m] = params.limit_rates
        rates[m : 2 * m] = params.cancel_coeffs * np.abs(queues)
        rates[2 * m] = params.market_rate_bid
        rates[2 * m + 1] = params.market_rate_ask
    else:
        rates[:] = params.rate
    return rates


def simulate_lob(params, m: int, config: SimConfig) -> tuple[EventStream, LOBTrajectory]:
    """Simulate the m-level book on (0, horizon].

    ``params`` selects the flavor: LinearLOBParams drives state-dependent
    cancellations (rate proportional to the standing queue, hence never
    firing on an empty level); PoissonParams drives constant rates for all
    2m + 2 types, with arrivals that cannot act (cancels on empty queues,
    markets against an empty side) suppressed, and a best queue that a trade
    or cancel empties regenerating instantly at Uniform{1..5} units. Under
    the linear flavor market orders against an empty side are suppressed
    too; nothing regenerates.

    Returns the recorded event stream (marks: m limits, m cancels, market
    bid, market ask) and the queue trajectory.
    """
    m = int(m)
    if m < 2:
        raise ValueError("need at least two price levels")
    regenerate = isinstance(params, PoissonParams)
    if regenerate:
        if params.rate.size != 2 * m + 2:
            raise ValueError(
                f"rate vector must have length {2 * m + 2}, got {params.rate.size}"
            )
    elif isinstance(params, LinearLOBParams):
        if params.m != m:
            raise ValueError(f"params describe {params.m} levels, asked for {m}")
    else:
        raise TypeError(f"unsupported LOB parameters {params!r}")

    if config.initial_state is None:
        x0 = LOBState.empty(m)
    elif isinstance(config.initial_state, LOBState):
        x0 = config.initial_state
        if x0.m != m:
            raise ValueError(f"initial state has {x0.m} levels, asked for {m}")
    else:
        raise TypeError("initial_state must be an LOBState")

    gen = rng_stream(config.seed)
    n_bid = m // 2
    q = x0.queues.copy()
    span = config.burn_in + config.horizon
    burn = config.burn_in
    t = 0.0
    ev_times: list[float] = []
    ev_marks: list[int] = []
    traj_t: list[float] = []
    traj_q: list[np.ndarray] = []
    x0_out = q.copy()

    def best(side_bid: bool) -> int | None:
        rng_idx = range(n_bid - 1, -1, -1) if side_bid else range(n_bid, m)
        for i in rng_idx:
            if q[i] != 0:
                return i
        return None

    while True:
        rates = _lob_rate_vector(params, q, n_bid)
        total = rates.sum()
        if total <= 0.0:
            break
        t += gen.standard_exponential() / total
        if t > span:
            break
        u = gen.random() * total
        acc = 0.0
        k = 2 * m + 1
        for j in range(2 * m + 2):
            acc += rates[j]
            if u <= acc:
                k = j
                break
        emitted = True
        depleted_best = None
        if k < m:
            q[k] += -1 if k < n_bid else 1
        elif k < 2 * m:
            lvl = k - m
            if q[lvl] == 0:
                emitted = False  # constant-rate cancel aimed at an empty queue
            else:
                was_best = best(lvl < n_bid) == lvl
                q[lvl] += 1 if q[lvl] < 0 else -1
                if was_best and q[lvl] == 0:
                    depleted_best = lvl
        else:
            side_bid = k == 2 * m
            b = best(side_bid)
            if b is None:
                emitted = False  # market order against an empty side
            else:
                q[b] += 1 if side_bid else -1
                if q[b] == 0:
                    depleted_best = b
        if not emitted:
            continue
        if regenerate and depleted_best is not None:
            size = int(gen.integers(1, 6))
            q[depleted_best] = -size if depleted_best < n_bid else size
        if t > burn:
            ev_times.append(t - burn)
            ev_marks.append(k)
            traj_t.append(t - burn)
            traj_q.append(q.copy())
        else:
            x0_out = q.copy()

    stream = EventStream(
        times=np.array(ev_times, dtype=np.float64),
        marks=np.array(ev_marks, dtype=np.int64),
        d=2 * m + 2,
        horizon=config.horizon,
    )
    trajectory = LOBTrajectory(
        times=np.array(traj_t, dtype=np.float64),
        queues=(
            np.array(traj_q, dtype=np.int64)
            if traj_q
            else np.zeros((0, m), dtype=np.int64)
        ),
        x0=x0_out,
        horizon=config.horizon,
    )
    return stream, trajectory
