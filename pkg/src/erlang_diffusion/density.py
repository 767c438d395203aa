"""Stationary densities of the two diffusion approximations.

``state_dependent`` is ``nu(x) = kappa p(x) / a(x)``.  ``constant`` is ``eta``,
the density for the frozen coefficient ``a(0) = 2 mu``; integrating ``b/mu``
gives the exponent ``-x**2/2`` up to ``-zeta`` and ``-|zeta| x + zeta**2/2``
beyond it, so ``eta`` is a Gaussian glued to an exponential tail.

Every density is split at ``-1/delta`` and ``-zeta``.  The outer pieces are
integrated in closed form.  The middle piece of ``nu`` uses adaptive
Gauss-Kronrod on a log-shifted integrand, and its panel tree doubles as the CDF
cache.  Everything except the final ``exp`` stays in log-space.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import erfcx, log_ndtr, logsumexp, ndtr

from . import quadrature as quad
from .params import DerivedParams, SystemParams, derive_params, diffusion_a, log_p

KINDS = ("state_dependent", "constant")
SQRT_2PI = math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

DEFAULT_TOL = 1e-13
ILL_CONDITIONED_ZETA = 1e-6


class ConditioningWarning(RuntimeWarning):
    """The spare capacity ``|zeta|`` is so small that the right tail dominates."""


@dataclass(frozen=True)
class PiecewiseLogDensity:
    kind: str
    params: DerivedParams
    log_kappa: float
    region_log_masses: tuple[float, float, float]
    panels: quad.PanelTree | None
    shift: float
    tol: float

    # -- pointwise ---------------------------------------------------------
    def log_unnormalized(self, x):
        """Log of the unnormalised density (``p/a`` or ``exp(int b/mu)``)."""
        d = self.params
        xa = np.asarray(x, dtype=float)
        if self.kind == "state_dependent":
            return log_p(xa, d) - np.log(diffusion_a(xa, d))
        c = d.right_break
        az = d.abs_zeta
        return np.where(xa <= c, -0.5 * xa * xa, -az * xa + 0.5 * az * az)

    @property
    def region_masses(self) -> np.ndarray:
        return np.exp(np.asarray(self.region_log_masses) + self.log_kappa)

    # -- cumulative pieces on the unnormalised scale ----------------------
    def _log_left_cdf(self, x):
        """log of the unnormalised integral from -inf to x, for x <= -1/delta."""
        d = self.params
        if self.kind == "state_dependent":
            return d.log_p_left_const - math.log(d.mu) + 0.5 * math.log(math.pi) + log_ndtr(math.sqrt(2.0) * x)
        return LOG_SQRT_2PI + log_ndtr(x)

    def _log_right_sf(self, x):
        """log of the unnormalised integral from x to inf, for x >= -zeta."""
        d = self.params
        if self.kind == "state_dependent":
            beta = d.tail_rate
            return d.log_p_right_break - math.log(d.a_right) - beta * (x - d.right_break) - math.log(beta)
        az = d.abs_zeta
        return -az * x + 0.5 * az * az - math.log(az)

    def _log_middle_partial(self, x):
        """log of the unnormalised integral from -1/delta to x, -1/delta <= x <= -zeta."""
        d = self.params
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            lb = d.left_break
            with np.errstate(divide="ignore"):
                # Phi(x) - Phi(lb) computed without cancellation where Phi(lb) is tiny
                return LOG_SQRT_2PI + log_ndtr(x) + np.log(-np.expm1(log_ndtr(lb) - log_ndtr(x)))
        tree = self.panels
        cum = np.concatenate([[0.0], tree.cumulative()])
        idx = np.clip(np.searchsorted(tree.left, x, side="right") - 1, 0, tree.left.size - 1)
        f = lambda y: np.exp(self.log_unnormalized(y) - self.shift)
        part = quad.gl15_partial(f, tree.left[idx], np.minimum(x, tree.right[idx]))
        total = cum[idx] + np.maximum(part, 0.0)
        with np.errstate(divide="ignore"):
            return self.shift + np.log(total)

    # -- normalised queries ------------------------------------------------
    def log_density_at(self, x):
        out = self.log_kappa + self.log_unnormalized(x)
        return out if isinstance(x, np.ndarray) else float(out)

    def density_at(self, x):
        out = np.exp(self.log_kappa + self.log_unnormalized(x))
        return out if isinstance(x, np.ndarray) else float(out)

    def cdf_at(self, x):
        return self._cdf_sf(x, want="cdf")

    def sf_at(self, x):
        return self._cdf_sf(x, want="sf")

    def _cdf_sf(self, x, want):
        d = self.params
        lb, c = d.left_break, d.right_break
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        logL, logM, logR = self.region_log_masses
        out = np.empty_like(xa)
        for i, xv in enumerate(xa):
            if xv == -math.inf:
                lc, ls = -math.inf, 0.0
            elif xv == math.inf:
                lc, ls = 0.0, -math.inf
            elif xv <= lb:
                lc = self.log_kappa + float(self._log_left_cdf(xv))
                ls = None
            elif xv <= c:
                lm = float(self._log_middle_partial(xv))
                lc = self.log_kappa + np.logaddexp(logL, lm)
                ls = None
                if want == "sf":
                    rest = math.exp(logM) - math.exp(lm) if lm > -math.inf else math.exp(logM)
                    rest = max(rest, 0.0)
                    with np.errstate(divide="ignore"):
                        ls = self.log_kappa + np.logaddexp(logR, math.log(rest) if rest > 0 else -math.inf)
            else:
                ls = self.log_kappa + float(self._log_right_sf(xv))
                lc = None
            if want == "cdf":
                out[i] = math.exp(lc) if lc is not None else -math.expm1(ls)
            else:
                out[i] = math.exp(ls) if ls is not None else -math.expm1(lc)
        np.clip(out, 0.0, 1.0, out=out)
        return out if np.ndim(x) else float(out[0])

    def interval_probability(self, center, half_width):
        if np.any(np.asarray(half_width) <= 0):
            raise ValueError("half_width must be positive")
        lo = np.asarray(center, dtype=float) - half_width
        hi = np.asarray(center, dtype=float) + half_width
        c = self.params.right_break
        # use survival differences where both ends sit in the upper tail
        upper = lo > c
        val = np.where(upper, self.sf_at(lo) - self.sf_at(hi), self.cdf_at(hi) - self.cdf_at(lo))
        return val if np.ndim(center) else float(val)

    # -- expectations ------------------------------------------------------
    def moment(self, power: int, region: str = "all", absolute: bool = False) -> float:
        """``E[Y**power 1(region)]`` with analytic outer pieces.

        ``region`` is ``all``, ``below`` (``Y <= -zeta``) or ``above`` (``Y >= -zeta``).
        """
        if power not in (0, 1, 2, 3):
            raise ValueError("power must be 0..3")
        if region not in ("all", "below", "above"):
            raise ValueError(f"unknown region {region!r}")
        parts = []
        if region in ("all", "below"):
            parts += self._below_moment_parts(power, absolute)
        if region in ("all", "above"):
            parts.append(self._right_moment(power))
        return math.fsum(parts)

    def _right_moment(self, power):
        d = self.params
        c = d.right_break
        rate = d.tail_rate if self.kind == "state_dependent" else d.abs_zeta
        # int_0^inf (c+s)^m e^{-rate s} ds
        lap = math.fsum(math.comb(power, j) * c ** (power - j) * math.factorial(j) / rate ** (j + 1) for j in range(power + 1))
        log_edge = float(self.log_unnormalized(np.float64(c))) if self.kind == "constant" else d.log_p_right_break - math.log(d.a_right)
        return math.exp(self.log_kappa + log_edge) * lap

    def _below_moment_parts(self, power, absolute):
        d = self.params
        lb, c = d.left_break, d.right_break
        if self.kind == "constant":
            # standard normal partial moments on (-inf, c], scaled by sqrt(2 pi)
            parts = []
            if absolute and power % 2 == 1:
                parts.append(-_normal_partial_moment(power, -math.inf, 0.0))
                parts.append(_normal_partial_moment(power, 0.0, c))
            else:
                parts.append(_normal_partial_moment(power, -math.inf, c))
            return [math.exp(self.log_kappa + LOG_SQRT_2PI) * p for p in parts]
        # left Gaussian piece: int_{-inf}^{lb} x^m e^{C - x^2} dx / mu
        g = _gauss_sq_partial_scaled(power, lb)  # times e^{-lb^2}
        sign = -1.0 if (absolute and power % 2 == 1) else 1.0
        left = sign * math.exp(self.log_kappa + d.log_p_left_const - math.log(d.mu) - lb * lb) * g
        f = lambda y: (np.abs(y) if absolute else y) ** power * np.exp(self.log_unnormalized(y) - self.shift)
        bps = _middle_breaks(d)
        if absolute and power % 2 == 1:
            bps = np.union1d(bps, [0.0])
        mid = quad.integrate(f, bps, rtol=1e-13, atol=self.tol)
        return [left, math.exp(self.log_kappa + self.shift) * mid]

    def expect(self, g: Callable, kinks: Sequence[float] = (), laplace: Callable | None = None,
               rtol: float = 1e-12) -> float:
        """``E g(Y)`` for a vectorised ``g``.

        ``laplace(x0, rate)`` may supply ``int_0^inf g(x0 + s) exp(-rate s) ds``;
        without it the exponential tail is integrated numerically after the
        substitution ``s = -log(u) / rate``.
        """
        d = self.params
        lb, c = d.left_break, d.right_break
        rate = d.tail_rate if self.kind == "state_dependent" else d.abs_zeta
        # left tail, truncated where the density is 46 e-folds below its edge value
        lo = -math.sqrt(lb * lb + 2.0 * 46.0) if self.kind == "constant" else -math.sqrt(lb * lb + 46.0)
        ks = [k for k in kinks if lo < k < c]
        shift = self.shift
        f = lambda y: np.asarray(g(y), dtype=float) * np.exp(self.log_unnormalized(y) - shift)
        bps = np.union1d(np.union1d(_middle_breaks(d), [lo]), ks)
        body = quad.integrate(f, bps, rtol=rtol, atol=self.tol * 1e-3)
        log_edge = float(self.log_unnormalized(np.float64(c)))
        if laplace is not None:
            tail = laplace(c, rate)
        else:
            h = lambda u: np.asarray(g(c - np.log(u) / rate), dtype=float) / rate
            kk = [math.exp(-rate * (k - c)) for k in kinks if k > c]
            tail = quad.integrate(h, np.union1d([1e-300, 1.0], kk), rtol=rtol, atol=1e-16)
        return math.exp(self.log_kappa + shift) * body + math.exp(self.log_kappa + log_edge) * tail

    # -- sup ---------------------------------------------------------------
    def sup_density(self, step: float | None = None) -> dict:
        """Grid supremum (step ``delta/16`` by default) plus analytic candidates.

        Returns the overall supremum, the per-region maxima and the grid step.
        """
        d = self.params
        step = d.delta / 16.0 if step is None else step
        lb, c = d.left_break, d.right_break
        lo = lb - 10.0
        hi = c + min(10.0 / d.abs_zeta, 200.0) if d.abs_zeta > 0 else c + 10.0
        grid = np.arange(lo, hi, step)
        # without the step cap the grid would explode for tiny zeta
        if grid.size > 2_000_000:
            grid = np.linspace(lo, hi, 2_000_000)
        cand = [lb, c, 0.0]
        if self.kind == "state_dependent":
            cand.append(max(min(-d.delta / 2.0, c), lb))
        pts = np.union1d(grid, cand)
        vals = self.density_at(pts)
        left = vals[pts <= lb].max()
        mid = vals[(pts > lb) & (pts <= c)].max()
        right = vals[pts > c].max() if np.any(pts > c) else 0.0
        return {"sup": float(vals.max()), "left": float(left), "middle": float(mid), "right": float(right), "step": step}

    # -- export ------------------------------------------------------------
    def to_csv(self, xs, stream=None) -> str:
        xs = np.asarray(xs, dtype=float)
        buf = stream if stream is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "pdf", "cdf"])
        pdf = self.density_at(xs)
        cdf = self.cdf_at(xs)
        for x, p, q in zip(xs, pdf, cdf):
            w.writerow([f"{x:.6e}", f"{p:.6e}", f"{q:.6e}"])
        return buf.getvalue() if stream is None else ""


def _middle_breaks(d: DerivedParams) -> np.ndarray:
    lb, c = d.left_break, d.right_break
    width = c - lb
    m = max(8, int(math.ceil(width)))
    pts = np.linspace(lb, c, m + 1)
    mode = -0.5 * d.delta
    if lb < mode < c:
        pts = np.union1d(pts, [mode])
    pts[0], pts[-1] = lb, c
    return pts


def _normal_partial_moment(m: int, a: float, b: float) -> float:
    """``int_a^b x^m phi(x) dx`` by the recurrence ``J_m = -[x^{m-1} phi]_a^b + (m-1) J_{m-2}``."""
    def phi_term(x, k):
        if math.isinf(x):
            return 0.0
        return x**k * math.exp(-0.5 * x * x) / SQRT_2PI

    J = [float(ndtr(b) - ndtr(a)) if b <= 0 else float(ndtr(-a) - ndtr(-b))]
    J.append(-(phi_term(b, 0) - phi_term(a, 0)))
    for k in range(2, m + 1):
        J.append(-(phi_term(b, k - 1) - phi_term(a, k - 1)) + (k - 1) * J[k - 2])
    return J[m]


def _gauss_sq_partial_scaled(m: int, L: float) -> float:
    """``exp(L**2) int_{-inf}^L x^m exp(-x**2) dx`` for ``L < 0``, no cancellation."""
    g = [0.5 * math.sqrt(math.pi) * float(erfcx(-L)), -0.5]
    for k in range(2, m + 1):
        g.append(-0.5 * L ** (k - 1) + 0.5 * (k - 1) * g[k - 2])
    return g[m]


def build_density(p: SystemParams | DerivedParams, kind: str = "state_dependent", tol: float | None = None) -> PiecewiseLogDensity:
    """Normalise ``nu`` (``kind='state_dependent'``) or ``eta`` (``kind='constant'``)."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    d = p if isinstance(p, DerivedParams) else derive_params(p)
    tol = DEFAULT_TOL if tol is None else float(tol)
    if d.abs_zeta < ILL_CONDITIONED_ZETA:
        warnings.warn(
            f"|zeta| = {d.abs_zeta:.3g}: the exponential tail carries almost all the mass; "
            "results are ill-conditioned",
            ConditioningWarning,
            stacklevel=2,
        )
    lb, c = d.left_break, d.right_break
    proto = PiecewiseLogDensity(kind, d, 0.0, (0.0, 0.0, 0.0), None, 0.0, tol)
    if kind == "constant":
        logL = float(proto._log_left_cdf(lb))
        logM = float(proto._log_middle_partial(np.float64(c)))
        logR = float(proto._log_right_sf(c))
        dens = PiecewiseLogDensity(kind, d, -float(logsumexp([logL, logM, logR])), (logL, logM, logR), None, 0.0, tol)
        return dens
    mode = min(max(-0.5 * d.delta, lb), c)
    shift = float(proto.log_unnormalized(np.float64(mode)))
    f = lambda y: np.exp(proto.log_unnormalized(y) - shift)
    tree = quad.adaptive_gk15(f, _middle_breaks(d), rtol=1e-14, atol=tol)
    logL = float(proto._log_left_cdf(lb))
    logM = shift + math.log(math.fsum(tree.value))
    logR = float(proto._log_right_sf(c))
    log_kappa = -float(logsumexp([logL, logM, logR]))
    return PiecewiseLogDensity(kind, d, log_kappa, (logL, logM, logR), tree, shift, tol)


def middle_mass_gamma(d: DerivedParams, x: float | None = None) -> float:
    """Unnormalised integral of ``p/a`` over ``[-1/delta, x]`` via the regularised
    incomplete gamma function; ``u = 2 + delta y`` turns the integrand into a
    gamma kernel with shape ``4R`` and rate ``2R``.  Independent of the quadrature."""
    from scipy.special import gammainc, gammaln

    x = d.right_break if x is None else x
    k = 4.0 * d.R
    th = 2.0 * d.R
    U = 2.0 + d.delta * x
    logc = -math.log(d.delta * d.mu) - k * math.log(2.0) + 2.0 * th + gammaln(k) - k * math.log(th)
    return math.exp(logc) * (gammainc(k, th * U) - gammainc(k, th))
