"""Point and posterior-mean estimation with information-based errors.

Both estimators work in log coordinates: positivity comes for free, the box
becomes a rectangle, and the likelihood is much better conditioned in the
decay rates. The frequentist fit is multistart quasi-Newton (gradient from
the exact score) followed by a Newton polish on the exact hessian; the
Bayesian fit is adaptive random-walk Metropolis over the same space with
the log-coordinate Jacobian folded into the target.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .events import EventDataError, validate
from .likelihood import (
    ZeroIntensityAtEvent,
    empirical_fisher,
    evaluate,
    log_likelihood,
)
from .models import HawkesModel, ParamBox, PoissonModel
from .rng import rng_stream

__all__ = [
    "FitResult",
    "BayesResult",
    "NoConvergence",
    "SingularInformation",
    "PoorMixing",
    "qmle",
    "qbe",
    "confidence_intervals",
    "fit_report",
    "bayes_report",
]


class NoConvergence(RuntimeError):
    """Every optimization start failed outright."""


class SingularInformation(RuntimeError):
    """The information matrix cannot back standard errors."""


class PoorMixing(RuntimeWarning):
    """MCMC effective sample size fell below the floor."""


@dataclass(frozen=True)
class FitResult:
    """Maximizer of the log likelihood over the box plus error estimates.

    ``std_errors`` is sqrt(diag(gamma_hat^{-1}) / T), or None when gamma_hat
    is numerically singular. ``gradient_norm`` is the max-norm of the score
    at theta_hat, projected so coordinates pinned at a box face only count
    when the gradient points inward. ``trace`` holds the accepted objective
    values of the winning start, a monotonicity witness.
    """

    theta_hat: np.ndarray
    loglik: float
    gamma_hat: np.ndarray
    std_errors: np.ndarray | None
    iterations: int
    gradient_norm: float
    converged: bool
    starts_tried: int
    at_boundary: np.ndarray
    trace: tuple[float, ...]


@dataclass(frozen=True)
class BayesResult:
    """Posterior-mean estimate with the retained draws behind it."""

    theta_tilde: np.ndarray
    samples: np.ndarray
    acceptance_rate: float
    effective_sample_size: np.ndarray
    prior: str
    gelman_rubin: np.ndarray | None
    warnings: tuple[str, ...]

    def quantiles(self, probs=(0.05, 0.25, 0.5, 0.75, 0.95)) -> np.ndarray:
        """Posterior quantiles per coordinate, one row per prob."""
        return np.quantile(self.samples, probs, axis=0)


_QMLE_DEFAULTS = {"starts": 5, "tol": 1e-8, "max_iter": 500, "seed": 0}
_MCMC_DEFAULTS = {
    "chains": 4,
    "burn_in": 5000,
    "steps": 20000,
    "thin": 4,
    "seed": 0,
    "init": None,
    "init_scale": None,
}


def _merge_options(given, defaults, what):
    opts = dict(defaults)
    if given:
        unknown = set(given) - set(defaults)
        if unknown:
            raise ValueError(f"unknown {what} option(s): {sorted(unknown)}")
        opts.update(given)
    return opts


def _require_valid(stream):
    report = validate(stream)
    if not report.ok:
        raise EventDataError(
            "stream fails validation: " + "; ".join(report.violations)
        )


def _box_for(model, box):
    if box is None:
        return model.default_box()
    if not isinstance(box, ParamBox):
        raise TypeError("box must be a ParamBox")
    if box.n != model.dim:
        raise ValueError(f"box has {box.n} coordinates, model needs {model.dim}")
    return box


def _moment_start(stream, model, box):
    """Cheap data-driven start: event rates with half the mass attributed
    to excitation for the self-exciting family."""
    T = stream.horizon
    counts = stream.counts().astype(np.float64)
    if isinstance(model, HawkesModel):
        a0 = np.clip(1.0, box.lower[-1], box.upper[-1])
        theta = np.concatenate(
            [
                0.5 * counts / T,
                np.full(model.n_kernels, 0.5 * a0 / model.d),
                np.full(model.n_kernels, a0),
            ]
        )
    else:
        theta = counts / T if isinstance(model, PoissonModel) else None
        if theta is None:
            # order-book rates: raw per-type frequencies
            theta = stream.counts().astype(np.float64) / T
    return np.clip(theta, box.lower, box.upper)


def _projected_violation(score_nat, x, llo, lhi):
    """Max-norm of the score with outward components at active faces zeroed."""
    at_lo = x <= llo + 1e-9
    at_hi = x >= lhi - 1e-9
    v = np.abs(score_nat)
    v[at_lo] = np.maximum(score_nat[at_lo], 0.0)
    v[at_hi] = np.maximum(-score_nat[at_hi], 0.0)
    return float(np.max(v)) if v.size else 0.0


def qmle(stream, model, box=None, options=None) -> FitResult:
    """Maximize the log likelihood over the box; deterministic given seed.

    Multistart (one moment-based point plus quasi-random box fills), each
    start running box-constrained quasi-Newton in log coordinates with the
    exact gradient, then a Newton polish on the exact hessian down to
    max-norm score <= tol * (1 + |l_T| / T). The best final value wins.
    """
    _require_valid(stream)
    box = _box_for(model, box)
    opts = _merge_options(options, _QMLE_DEFAULTS, "qmle")
    tol = float(opts["tol"])
    max_iter = int(opts["max_iter"])
    n_starts = int(opts["starts"])
    if n_starts < 1:
        raise ValueError("need at least one start")
    T = stream.horizon
    llo, lhi = np.log(box.lower), np.log(box.upper)

    starts = [np.log(_moment_start(stream, model, box))]
    if n_starts > 1:
        sob = stats.qmc.Sobol(d=model.dim, scramble=True, seed=rng_stream(opts["seed"], 0))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            u = sob.random(n_starts - 1)
        starts.extend(llo + u * (lhi - llo))

    def neg_with_grad(x):
        ev = evaluate(stream, model, np.exp(x), with_fisher=False)
        return -ev.value, -ev.score * np.exp(x)

    best = None
    n_failed = 0
    for x0 in starts:
        trace: list[float] = []

        def on_accept(xk):
            trace.append(log_likelihood(stream, model, np.exp(xk)))

        try:
            res = optimize.minimize(
                neg_with_grad,
                np.clip(x0, llo, lhi),
                jac=True,
                method="L-BFGS-B",
                bounds=list(zip(llo, lhi)),
                callback=on_accept,
                options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-12},
            )
            x = np.clip(res.x, llo, lhi)
            iters = int(res.nit)
            # Newton polish: quasi-Newton plateaus at float resolution of
            # l_T; the exact hessian drives the score itself to tolerance
            ev = evaluate(stream, model, np.exp(x), with_fisher=False)
            val, g_nat = ev.value, ev.score
            for _ in range(60):
                viol = _projected_violation(g_nat.copy(), x, llo, lhi)
                if viol <= 0.05 * tol * (1.0 + abs(val) / T):
                    break
                theta = np.exp(x)
                H_nat = -ev.observed_info
                g_log = g_nat * theta
                H_log = theta[:, None] * H_nat * theta[None, :] + np.diag(g_log)
                free = ~(
                    ((x <= llo + 1e-9) & (g_nat <= 0.0))
                    | ((x >= lhi - 1e-9) & (g_nat >= 0.0))
                )
                if not np.any(free):
                    break
                gf = g_log[free]
                try:
                    step = np.linalg.solve(-H_log[np.ix_(free, free)], gf)
                except np.linalg.LinAlgError:
                    step = gf
                if np.dot(step, gf) <= 0.0:
                    step = gf
                # keep single steps modest; backtracking does the rest
                norm = np.max(np.abs(step))
                if norm > 2.0:
                    step = step * (2.0 / norm)
                x_full = x.copy()
                x_full[free] = x[free] + step
                x_full = np.clip(x_full, llo, lhi)
                accepted = False
                try:
                    ev_full = evaluate(stream, model, np.exp(x_full), with_fisher=False)
                    viol_full = _projected_violation(
                        ev_full.score.copy(), x_full, llo, lhi
                    )
                    # near the maximum the value is flat to machine precision,
                    # so a clear score reduction at (numerically) equal value
                    # counts as progress
                    if viol_full < 0.7 * viol and ev_full.value >= val - 1e-12 * (
                        1.0 + abs(val)
                    ):
                        x, ev = x_full, ev_full
                        val, g_nat = ev.value, ev.score
                        iters += 1
                        trace.append(val)
                        accepted = True
                except ZeroIntensityAtEvent:
                    pass
                if accepted:
                    continue
                scale = 0.5
                for _ in range(40):
                    x_try = x.copy()
                    x_try[free] = x[free] + scale * step
                    x_try = np.clip(x_try, llo, lhi)
                    try:
                        v_try = log_likelihood(stream, model, np.exp(x_try))
                    except ZeroIntensityAtEvent:
                        v_try = -np.inf
                    if v_try > val:
                        x = x_try
                        ev = evaluate(stream, model, np.exp(x), with_fisher=False)
                        val, g_nat = ev.value, ev.score
                        iters += 1
                        trace.append(v_try)
                        accepted = True
                        break
                    scale *= 0.5
                if not accepted:
                    break
            viol = _projected_violation(g_nat.copy(), x, llo, lhi)
            converged = viol <= tol * (1.0 + abs(val) / T)
        except (ZeroIntensityAtEvent, FloatingPointError):
            n_failed += 1
            continue
        if not np.isfinite(val):
            n_failed += 1
            continue
        cand = (val, x, iters, viol, converged, tuple(trace))
        if best is None or cand[0] > best[0]:
            best = cand

    if best is None:
        raise NoConvergence(f"all {n_starts} starts failed")
    val, x, iters, viol, converged, trace = best
    theta_hat = np.exp(x)
    gamma = empirical_fisher(stream, model, theta_hat)
    std = None
    try:
        cov = np.linalg.inv(gamma)
        diag = np.diag(cov) / T
        if np.all(diag > 0.0) and np.isfinite(diag).all():
            std = np.sqrt(diag)
    except np.linalg.LinAlgError:
        std = None
    at_boundary = (x <= llo + 1e-9) | (x >= lhi - 1e-9)
    return FitResult(
        theta_hat=theta_hat,
        loglik=float(val),
        gamma_hat=gamma,
        std_errors=std,
        iterations=iters,
        gradient_norm=viol,
        converged=bool(converged),
        starts_tried=n_starts,
        at_boundary=at_boundary,
        trace=trace,
    )


def _ess_geyer(x: np.ndarray) -> float:
    """Effective sample size of one chain by the initial-positive-sequence
    rule on paired autocorrelations."""
    n = x.size
    if n < 4:
        return float(n)
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    if acov[0] <= 0.0:
        return float(n)
    rho = acov / acov[0]
    tau = -1.0
    k = 0
    while k + 1 < n:
        pair = rho[k] + rho[k + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        k += 2
    tau = max(tau, 1.0 / n)
    return float(min(n / tau, n))


def qbe(stream, model, box=None, prior=None, mcmc=None) -> BayesResult:
    """Posterior mean under exp(l_T) times the prior, restricted to the box.

    Random-walk Metropolis in log coordinates (the volume change shows up
    as a sum-of-logs Jacobian in the target). During burn-in the global
    proposal scale adapts toward 0.234 acceptance and is frozen afterwards,
    keeping the retained chain a genuine Markov chain. ``steps`` counts
    retained draws across all chains. Deterministic given seed.
    """
    _require_valid(stream)
    box = _box_for(model, box)
    opts = _merge_options(mcmc, _MCMC_DEFAULTS, "mcmc")
    chains = int(opts["chains"])
    burn = int(opts["burn_in"])
    thin = int(opts["thin"])
    steps = int(opts["steps"])
    if chains < 1 or thin < 1 or burn < 0:
        raise ValueError("chains >= 1, thin >= 1, burn_in >= 0 required")
    per_chain = steps // chains
    if per_chain < 1:
        raise ValueError("steps must allow at least one draw per chain")
    llo, lhi = np.log(box.lower), np.log(box.upper)
    width = lhi - llo

    if prior is None:
        prior_fn = None
        prior_desc = "uniform on box"
    else:
        prior_fn = prior
        prior_desc = getattr(prior, "__name__", None) or repr(prior)

    def log_target(x):
        theta = np.exp(x)
        if prior_fn is not None:
            p = float(prior_fn(theta))
            if not p > 0.0:
                return -np.inf
            jac = np.log(p) + float(np.sum(x))
        else:
            jac = float(np.sum(x))
        try:
            return log_likelihood(stream, model, theta) + jac
        except ZeroIntensityAtEvent:
            return -np.inf

    if opts["init"] is not None:
        theta0 = np.asarray(opts["init"], dtype=np.float64)
        if theta0.shape != (model.dim,):
            raise ValueError("init must be a full parameter vector")
        x_init = np.log(np.clip(theta0, box.lower, box.upper))
    else:
        x_init = np.log(_moment_start(stream, model, box))
    margin = 1e-9 * width
    x_init = np.clip(x_init, llo + margin, lhi - margin)

    if opts["init_scale"] is not None:
        sigma = np.asarray(opts["init_scale"], dtype=np.float64)
        if sigma.shape != (model.dim,) or np.any(sigma <= 0.0):
            raise ValueError("init_scale must be a positive vector")
        sigma = np.minimum(sigma, width)
    else:
        sigma = np.minimum(0.1, 0.5 * width)

    kept = np.empty((chains * per_chain, model.dim))
    accepted_post = 0
    proposed_post = 0
    for c in range(chains):
        gen = rng_stream(opts["seed"], c)
        x = np.clip(
            x_init + 0.01 * width * gen.standard_normal(model.dim),
            llo + margin,
            lhi - margin,
        )
        lp = log_target(x)
        if not np.isfinite(lp):
            raise ValueError("initial point has zero posterior density")
        log_s = 0.0
        total = burn + per_chain * thin
        row = c * per_chain
        for it in range(total):
            y = x + np.exp(log_s) * sigma * gen.standard_normal(model.dim)
            if np.any(y < llo) or np.any(y > lhi):
                lq = -np.inf
            else:
                lq = log_target(y)
            accept = np.log(gen.random()) < lq - lp if lq > -np.inf else False
            if accept:
                x, lp = y, lq
            if it < burn:
                # stochastic approximation toward the d>1 optimal rate
                log_s += (it + 1.0) ** -0.6 * ((1.0 if accept else 0.0) - 0.234)
            else:
                proposed_post += 1
                accepted_post += int(accept)
                j = it - burn
                if (j + 1) % thin == 0:
                    kept[row + j // thin] = np.exp(x)

    samples = kept
    theta_tilde = samples.mean(axis=0)
    ess = np.empty(model.dim)
    for i in range(model.dim):
        ess[i] = sum(
            _ess_geyer(samples[c * per_chain : (c + 1) * per_chain, i])
            for c in range(chains)
        )
    gr = None
    if chains >= 2 and per_chain >= 2:
        by_chain = samples.reshape(chains, per_chain, model.dim)
        means = by_chain.mean(axis=1)
        w = by_chain.var(axis=1, ddof=1).mean(axis=0)
        b = per_chain * means.var(axis=0, ddof=1)
        v = (per_chain - 1) / per_chain * w + (1.0 + 1.0 / chains) * b / per_chain
        with np.errstate(divide="ignore", invalid="ignore"):
            gr = np.sqrt(np.where(w > 0.0, v / w, 1.0))
    warns = []
    if np.min(ess) < 100.0:
        msg = (
            f"min effective sample size {np.min(ess):.1f} < 100; "
            "increase steps or improve init_scale"
        )
        warnings.warn(msg, PoorMixing)
        warns.append(msg)
    return BayesResult(
        theta_tilde=theta_tilde,
        samples=samples,
        acceptance_rate=accepted_post / max(proposed_post, 1),
        effective_sample_size=ess,
        prior=prior_desc,
        gelman_rubin=gr,
        warnings=tuple(warns),
    )


def confidence_intervals(fit: FitResult, level: float) -> np.ndarray:
    """Normal-theory intervals theta_hat_i +- z * std_error_i, one row per
    coordinate."""
    if not 0.0 <= level < 1.0:
        raise ValueError("level must lie in [0, 1)")
    if fit.std_errors is None:
        raise SingularInformation("no standard errors: information singular")
    z = stats.norm.ppf(0.5 * (1.0 + level))
    half = z * fit.std_errors
    return np.column_stack([fit.theta_hat - half, fit.theta_hat + half])


def fit_report(model, fit: FitResult, level: float = 0.95) -> dict:
    """JSON-ready summary of a point fit."""
    report = {
        "model": model.name,
        "params": model.param_names(),
        "theta_hat": fit.theta_hat.tolist(),
        "loglik": fit.loglik,
        "gamma_hat": fit.gamma_hat.tolist(),
        "std_errors": None if fit.std_errors is None else fit.std_errors.tolist(),
        "converged": fit.converged,
        "iterations": fit.iterations,
        "gradient_norm": fit.gradient_norm,
        "starts_tried": fit.starts_tried,
        "at_boundary": fit.at_boundary.tolist(),
    }
    if fit.std_errors is not None:
        ci = confidence_intervals(fit, level)
        report["ci"] = {
            "level": level,
            "lower": ci[:, 0].tolist(),
            "upper": ci[:, 1].tolist(),
        }
    else:
        report["ci"] = None
    return report


def bayes_report(model, result: BayesResult) -> dict:
    """JSON-ready summary of a posterior-mean fit."""
    probs = (0.05, 0.25, 0.5, 0.75, 0.95)
    q = result.quantiles(probs)
    return {
        "model": model.name,
        "params": model.param_names(),
        "theta_tilde": result.theta_tilde.tolist(),
        "acceptance_rate": result.acceptance_rate,
        "effective_sample_size": result.effective_sample_size.tolist(),
        "gelman_rubin": (
            None if result.gelman_rubin is None else result.gelman_rubin.tolist()
        ),
        "prior": result.prior,
        "n_samples": int(result.samples.shape[0]),
        "quantiles": {
            f"{int(100 * p)}": q[i].tolist() for i, p in enumerate(probs)
        },
        "warnings": list(result.warnings),
    }
