"""Distances between the scaled chain and its diffusion approximations."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .chain import StationaryDistribution, check_moment_bounds, scaled_moment, stationary_distribution
from .density import PiecewiseLogDensity, build_density
from .params import DerivedParams, SystemParams, derive_params, state_to_x

CSV_COLUMNS = (
    "n", "R", "EX_scaled", "mean_err_y0", "rel_err_y0", "mean_err_y", "rel_err_y",
    "m2_err_y0", "m2_err_y", "pmf_sup_y0", "pmf_sup_y", "dk_y0", "dk_y",
)

TAIL_EPS = 1e-14


@dataclass(frozen=True)
class DistanceResult:
    value: float
    error_bar: float
    argmax_state: int
    states_scanned: int


def _scan_cutoff(dist: StationaryDistribution, dens: PiecewiseLogDensity | None, eps: float) -> int:
    K = dist.tail_cutoff(eps)
    if dens is not None:
        d = dist.params
        # extend until the density's upper tail is also below eps
        while dens.sf_at(state_to_x(K, d)) >= eps:
            K = d.n + 2 * max(K - d.n, 1)
    return K


def kolmogorov_distance(dist: StationaryDistribution, dens: PiecewiseLogDensity | StationaryDistribution,
                        tail_eps: float = TAIL_EPS) -> DistanceResult:
    """``sup_a |P(Xs <= a) - P(Y <= a)|`` over all thresholds.

    The chain's CDF is a step function, so the supremum is approached at a lattice
    point from the left or attained at it.  States beyond the scan cutoff are
    accounted for by the reported error bar.  ``dens`` may also be another
    :class:`StationaryDistribution` on the same lattice.
    """
    d = dist.params
    if isinstance(dens, StationaryDistribution):
        K = max(dist.tail_cutoff(tail_eps), dens.tail_cutoff(tail_eps))
        pa = dist.pmf_upto(K)
        pb = dens.pmf_upto(K)
        gap = np.abs(np.cumsum(pa) - np.cumsum(pb))
        i = int(np.argmax(gap))
        return DistanceResult(float(gap[i]), float(1.0 - min(np.sum(pa), np.sum(pb))), i, K + 1)
    K = _scan_cutoff(dist, dens, tail_eps)
    k = np.arange(K + 1)
    pik = dist.pmf(k)
    S = np.cumsum(pik)
    S_prev = np.concatenate([[0.0], S[:-1]])
    x = state_to_x(k.astype(float), d)
    F = dens.cdf_at(x)
    # above the median compare survival functions to keep absolute precision
    sf_chain = np.concatenate([1.0 - S[: d.n + 1], dist.tail_mass * dist.tail_ratio ** (k[d.n + 1:] - d.n)])
    sf_chain_prev = sf_chain + pik
    G = dens.sf_at(x)
    upper = F > 0.5
    gap_on = np.where(upper, np.abs(sf_chain - G), np.abs(S - F))
    gap_left = np.where(upper, np.abs(sf_chain_prev - G), np.abs(S_prev - F))
    gaps = np.maximum(gap_on, gap_left)
    i = int(np.argmax(gaps))
    bar = float(sf_chain[-1] + G[-1])
    return DistanceResult(float(gaps[i]), bar, i, K + 1)


def interval_pmf(dens: PiecewiseLogDensity, K: int) -> np.ndarray:
    """``P(Y in [x_k - delta/2, x_k + delta/2])`` for ``k = 0..K``."""
    d = dens.params
    k = np.arange(K + 1).astype(float)
    return dens.interval_probability(state_to_x(k, d), 0.5 * d.delta)


def pmf_sup_error(dist: StationaryDistribution, dens: PiecewiseLogDensity, tail_eps: float = 1e-17) -> DistanceResult:
    """``sup_k |pi_k - P(Y in [x_k - delta/2, x_k + delta/2])|``."""
    K = _scan_cutoff(dist, dens, tail_eps)
    err = np.abs(dist.pmf_upto(K) - interval_pmf(dens, K))
    i = int(np.argmax(err))
    d = dist.params
    bar = dist.tail_mass * dist.tail_ratio ** (K - d.n) + dens.sf_at(state_to_x(K, d) + 0.5 * d.delta)
    return DistanceResult(float(err[i]), float(bar), i, K + 1)


@dataclass(frozen=True)
class RateFit:
    slope: float
    stderr: float
    intercept: float


def rate_fit(points: Iterable[tuple[float, float]]) -> RateFit:
    """Least-squares slope of ``log(error)`` against ``log(R)``."""
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("need at least three points")
    R = np.array([p[0] for p in pts], dtype=float)
    e = np.array([p[1] for p in pts], dtype=float)
    if np.any(e <= 0) or np.any(R <= 0):
        raise ValueError("loads and errors must be positive")
    fit = stats.linregress(np.log(R), np.log(e))
    return RateFit(float(fit.slope), float(fit.stderr), float(fit.intercept))


@dataclass
class ComparisonReport:
    n: int
    R: float
    EX_scaled: float
    mean_err_y0: float
    rel_err_y0: float
    mean_err_y: float
    rel_err_y: float
    m2_err_y0: float
    m2_err_y: float
    pmf_sup_y0: float
    pmf_sup_y: float
    dk_y0: float
    dk_y: float
    EX2_scaled: float = 0.0
    bound_flags: dict = field(default_factory=dict)

    def csv_row(self) -> list[str]:
        out = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            out.append(str(v) if name == "n" else format_float(v))
        return out

    def as_dict(self) -> dict:
        return asdict(self)


def format_float(v: float) -> str:
    return f"{float(v):.5e}"


def moment_error_report(p: SystemParams | DerivedParams, tol: float | None = None, with_bounds: bool = False) -> ComparisonReport:
    d = p if isinstance(p, DerivedParams) else derive_params(p)
    dist = stationary_distribution(d)
    nu = build_density(d, "state_dependent", tol=tol)
    eta = build_density(d, "constant", tol=tol)
    ex = scaled_moment(dist, 1)
    ex2 = scaled_moment(dist, 2)
    e0 = abs(eta.moment(1) - ex)
    e1 = abs(nu.moment(1) - ex)
    flags = {}
    if with_bounds:
        br = check_moment_bounds(dist)
        flags = {"moment_bounds": br.passed, "density_bound": nu.sup_density()["sup"] <= 4.0 or d.R < 1}
    return ComparisonReport(
        n=d.n,
        R=d.R,
        EX_scaled=ex,
        mean_err_y0=e0,
        rel_err_y0=e0 / abs(ex),
        mean_err_y=e1,
        rel_err_y=e1 / abs(ex),
        m2_err_y0=abs(eta.moment(2) - ex2),
        m2_err_y=abs(nu.moment(2) - ex2),
        pmf_sup_y0=pmf_sup_error(dist, eta).value,
        pmf_sup_y=pmf_sup_error(dist, nu).value,
        dk_y0=kolmogorov_distance(dist, eta).value,
        dk_y=kolmogorov_distance(dist, nu).value,
        EX2_scaled=ex2,
        bound_flags=flags,
    )


# -- smoothed indicators and W2 lower bounds -----------------------------

def smoothed_indicator_raw(x, a: float, eps: float):
    """Piecewise-quadratic smoothing of ``1(x <= a)`` over ``[a, a + eps]``."""
    if not (0.0 < eps < 2.0):
        raise ValueError("eps must lie in (0, 2)")
    xa = np.asarray(x, dtype=float)
    m = a + 0.5 * eps
    v = np.where(
        xa <= a, 1.0,
        np.where(
            xa <= m, 1.0 - 2.0 / eps**2 * (xa - a) ** 2,
            np.where(xa <= a + eps, 2.0 / eps**2 * (xa - m) ** 2 - 2.0 / eps * (xa - a) + 1.5, 0.0),
        ),
    )
    v = np.clip(v, 0.0, 1.0)
    return v if isinstance(x, np.ndarray) else float(v)


def smoothed_indicator_derivative(x, a: float, eps: float):
    xa = np.asarray(x, dtype=float)
    m = a + 0.5 * eps
    v = np.where(
        (xa > a) & (xa <= m), -4.0 / eps**2 * (xa - a),
        np.where((xa > m) & (xa <= a + eps), 4.0 / eps**2 * (xa - m) - 2.0 / eps, 0.0),
    )
    return v if isinstance(x, np.ndarray) else float(v)


def smoothed_indicator_second(x, a: float, eps: float):
    """Left derivative of the first derivative."""
    xa = np.asarray(x, dtype=float)
    m = a + 0.5 * eps
    v = np.where((xa > a) & (xa <= m), -4.0 / eps**2, np.where((xa > m) & (xa <= a + eps), 4.0 / eps**2, 0.0))
    return v if isinstance(x, np.ndarray) else float(v)


def smoothed_indicator(a: float, eps: float):
    """``(eps**2 / 4) h_eps`` as an anchored W2 test function."""
    from .stein import TestFunction

    if not (0.0 < eps < 2.0):
        raise ValueError("eps must lie in (0, 2)")
    s = eps**2 / 4.0
    return TestFunction.from_callables(
        name=f"smoothed_indicator(a={a:g},eps={eps:g})",
        h=lambda x: s * smoothed_indicator_raw(x, a, eps),
        dh=lambda x: s * smoothed_indicator_derivative(x, a, eps),
        d2h=lambda x: s * smoothed_indicator_second(x, a, eps),
        kinks=(a, a + 0.5 * eps, a + eps),
        laplace=lambda x0, beta: np.zeros_like(x0) if np.all(x0 >= a + eps) else None,
        laplace_dh=lambda x0, beta: np.zeros_like(x0) if np.all(x0 >= a + eps) else None,
        lip_certified=True,
    )


def _chain_expect_compact(dist: StationaryDistribution, h, support_hi: float) -> float:
    """``E h(Xs)`` for ``h`` that vanishes above ``support_hi``."""
    d = dist.params
    kmax = max(0, int(math.ceil(support_hi * d.sqrt_R + d.R)) + 1)
    k = np.arange(kmax + 1)
    return math.fsum(dist.pmf(k) * np.asarray(h(state_to_x(k.astype(float), d)), dtype=float))


def w2_lower_bound(p: SystemParams | DerivedParams, family: Sequence | None = None,
                   thresholds: Sequence[float] | None = None, widths: Sequence[float] = (0.5, 1.0, 1.5)) -> dict:
    """Largest ``|E h(Xs) - E h(Y)|`` over a finite family of W2 functions.

    The default family holds the identity, the integrated tanh, ``sin`` and
    scaled smoothed indicators over a threshold grid.
    """
    from .stein import identity, logcosh, sine, expect_chain

    d = p if isinstance(p, DerivedParams) else derive_params(p)
    dist = stationary_distribution(d)
    nu = build_density(d, "state_dependent")
    fam = list(family) if family is not None else [identity(), logcosh(), sine()]
    results = {}
    for tf in fam:
        results[tf.name] = abs(expect_chain(dist, tf) - tf.expect_density(nu))
    if family is None:
        ths = thresholds if thresholds is not None else np.linspace(-2.0, 2.0, 9)
        for a in ths:
            for eps in widths:
                s = eps**2 / 4.0
                h = lambda x, a=a, eps=eps: s * smoothed_indicator_raw(x, a, eps)
                ex = _chain_expect_compact(dist, h, a + eps)
                closed = (lambda x0, beta: 0.0) if a + eps <= d.right_break else None
                ey = nu.expect(h, kinks=(a, a + 0.5 * eps, a + eps), laplace=closed)
                results[f"smoothed_indicator(a={a:g},eps={eps:g})"] = abs(ex - ey)
    best = max(results, key=results.get)
    return {"value": results[best], "argmax": best, "terms": results}
