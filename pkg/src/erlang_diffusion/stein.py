"""Numerical solutions of the Poisson equation ``G_Y f = E h(Y) - h``.

With ``p = exp(int_0^x r)`` the bounded-derivative solution is

    f'(x) =  (1/p(x)) int_{-inf}^x (2/a)(Eh - h) p dy      (used for x <= 0)
          = -(1/p(x)) int_x^{inf}  (2/a)(Eh - h) p dy      (used for x > 0)

Both integrals are evaluated with the ratio ``p(y)/p(x)`` formed in log-space,
so no overflow occurs however large ``R`` is.  Beyond ``-zeta`` the weight is a
pure exponential and the integral is a Laplace transform of ``h``, available in
closed form for the shipped test functions.  ``f''`` and ``f'''`` follow
algebraically from the equation; an independent ``f''`` comes from differentiating
the equation once and solving the resulting first-order equation the same way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .chain import StationaryDistribution, expect as chain_expect, tail_exponential_sum, tail_polynomial_sum
from .density import PiecewiseLogDensity, build_density
from .params import (
    DerivedParams,
    death_rate,
    diffusion_a,
    diffusion_a_prime_left,
    drift_b,
    log_p,
    r_prime_left,
    ratio_r,
    state_to_x,
)
from .quadrature import gauss_legendre_panels

TRUNC_EFOLDS = 46.0
# batches at least this large evaluate f' by recurrence over sorted nodes
GRID_BATCH = 4096
_TAIL_NODES = gauss_legendre_panels(np.array(0.0), np.array(30.0), panels=6, order=16)


def _numeric_laplace(g: Callable, x0, beta: float, kinks=()):
    """``int_0^inf g(x0 + s) exp(-beta s) ds`` over ``beta s <= 80``.

    Panels grow geometrically from ``x0`` so features of ``g`` near the edge
    are resolved whatever the rate; they are also split at ``kinks``.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    top = 80.0 / beta
    offsets = [o for o in 0.25 * 2.0 ** np.arange(60) if o < top]
    cuts = [x0 + o for o in offsets] + list(kinks)
    a, b = _pieces(x0, x0 + top, cuts)
    y, w = gauss_legendre_panels(a, b, panels=2, order=20)
    y = y.reshape(x0.size, -1)
    w = w.reshape(x0.size, -1) * np.exp(-beta * (y - x0[:, None]))
    vals = np.asarray(g(y.ravel()), dtype=float).reshape(y.shape)
    return np.sum(vals * w, axis=1)


def _fast_decay_laplace(g: Callable, x0, beta: float):
    """Laplace transform of a function decaying like ``exp(-2y)`` (30 units suffice)."""
    s, w = _TAIL_NODES
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    vals = np.asarray(g((x0[:, None] + s[None, :]).ravel()), dtype=float).reshape(x0.size, s.size)
    return vals @ (w * np.exp(-beta * s))


@dataclass(frozen=True)
class TestFunction:
    """A W2 test function ``h`` anchored so that ``h(0) = 0``.

    ``laplace_raw(x0, beta)`` and ``laplace_dh(x0, beta)`` optionally supply
    ``int_0^inf g(x0 + s) exp(-beta s) ds`` for ``g = h_raw`` and ``g = h'``;
    either may return ``None`` to request the numeric fallback.  ``chain_tail``
    optionally returns the exact ``sum_{k>n} pi_k h_raw(x_k)``.
    """

    name: str
    h_raw: Callable
    dh: Callable
    d2h: Callable
    kinks: tuple = ()
    laplace_raw: Callable | None = None
    laplace_dh_raw: Callable | None = None
    chain_tail: Callable | None = None
    lip_certified: bool = True
    h0: float = 0.0

    __test__ = False  # not a pytest class

    @classmethod
    def from_callables(cls, name, h, dh, d2h, kinks=(), laplace=None, laplace_dh=None, chain_tail=None,
                       lip_certified=True):
        h0 = float(np.asarray(h(np.array([0.0])), dtype=float)[0])
        return cls(name, h, dh, d2h, tuple(kinks), laplace, laplace_dh, chain_tail, lip_certified, h0)

    def h(self, x):
        return np.asarray(self.h_raw(x), dtype=float) - self.h0

    def laplace_h(self, x0, beta):
        x0a = np.atleast_1d(np.asarray(x0, dtype=float))
        out = None
        if self.laplace_raw is not None:
            out = self.laplace_raw(x0a, beta)
        if out is None:
            out = _numeric_laplace(self.h_raw, x0a, beta, self.kinks)
        out = np.asarray(out, dtype=float) * np.ones_like(x0a) - self.h0 / beta
        return out if np.ndim(x0) else float(out[0])

    def laplace_dh(self, x0, beta):
        x0a = np.atleast_1d(np.asarray(x0, dtype=float))
        out = None
        if self.laplace_dh_raw is not None:
            out = self.laplace_dh_raw(x0a, beta)
        if out is None:
            out = _numeric_laplace(self.dh, x0a, beta, self.kinks)
        out = np.asarray(out, dtype=float) * np.ones_like(x0a)
        return out if np.ndim(x0) else float(out[0])

    def expect_density(self, dens: PiecewiseLogDensity) -> float:
        lap = lambda c, beta: float(np.atleast_1d(self.laplace_h(c, beta))[0])
        return dens.expect(self.h, kinks=self.kinks, laplace=lap)


def identity() -> TestFunction:
    return TestFunction.from_callables(
        "identity",
        h=lambda x: np.asarray(x, dtype=float),
        dh=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        d2h=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        laplace=lambda x0, b: x0 / b + 1.0 / b**2,
        laplace_dh=lambda x0, b: np.full_like(x0, 1.0 / b),
        chain_tail=lambda dist: tail_polynomial_sum(dist, Polynomial([0.0, 1.0])),
    )


def sine() -> TestFunction:
    return TestFunction.from_callables(
        "sine",
        h=np.sin,
        dh=np.cos,
        d2h=lambda x: -np.sin(x),
        laplace=lambda x0, b: (b * np.sin(x0) + np.cos(x0)) / (1.0 + b * b),
        laplace_dh=lambda x0, b: (b * np.cos(x0) - np.sin(x0)) / (1.0 + b * b),
        chain_tail=lambda dist: tail_exponential_sum(dist, 1.0).imag,
    )


def _logcosh(x):
    x = np.abs(np.asarray(x, dtype=float))
    return x - math.log(2.0) + np.log1p(np.exp(-2.0 * x))


def logcosh() -> TestFunction:
    """``h(x) = int_0^x tanh = log cosh x``; ``h' = tanh`` and ``h'' = sech**2``."""

    def lap(x0, b):
        if np.any(x0 < 0):
            return None
        rest = _fast_decay_laplace(lambda y: np.log1p(np.exp(-2.0 * y)), x0, b)
        return (x0 - math.log(2.0)) / b + 1.0 / b**2 + rest

    def lap_dh(x0, b):
        if np.any(x0 < 0):
            return None
        rest = _fast_decay_laplace(lambda y: 2.0 / (1.0 + np.exp(2.0 * y)), x0, b)
        return 1.0 / b - rest

    return TestFunction.from_callables(
        "logcosh",
        h=_logcosh,
        dh=np.tanh,
        d2h=lambda x: 1.0 / np.cosh(np.clip(x, -350, 350)) ** 2,
        laplace=lap,
        laplace_dh=lap_dh,
    )


def smoothed_abs(width: float = 1.0) -> TestFunction:
    """Huber-type ``|x|``: quadratic on ``[-w, w]``, linear outside; in W2 for ``w >= 1``."""
    w = float(width)

    def h(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= w, 0.5 * x * x / w, np.abs(x) - 0.5 * w)

    def dh(x):
        x = np.asarray(x, dtype=float)
        return np.clip(x / w, -1.0, 1.0)

    def d2h(x):
        x = np.asarray(x, dtype=float)
        return np.where((x > -w) & (x <= w), 1.0 / w, 0.0)

    def lap(x0, b):
        if np.any(x0 < w):
            return None
        return (x0 - 0.5 * w) / b + 1.0 / b**2

    return TestFunction.from_callables(
        f"smoothed_abs(w={w:g})", h, dh, d2h, kinks=(-w, w), laplace=lap,
        laplace_dh=lambda x0, b: None if np.any(x0 < w) else np.full_like(x0, 1.0 / b),
    )


SHIPPED = {"identity": identity, "sine": sine, "logcosh": logcosh}


def expect_chain(dist: StationaryDistribution, tf: TestFunction) -> float:
    """``E h(Xs)`` with the anchored ``h``."""
    if tf.chain_tail is not None:
        return chain_expect(dist, tf.h_raw, tail=tf.chain_tail) - tf.h0
    return chain_expect(dist, tf.h_raw, tail_eps=1e-20) - tf.h0


def _pieces(lo, hi, cuts):
    """Split each ``[lo_i, hi_i]`` at the cut points that fall inside it."""
    cols = [lo] + [np.clip(c, lo, hi) for c in cuts] + [hi]
    E = np.sort(np.stack(cols, axis=-1), axis=-1)
    return E[..., :-1], E[..., 1:]


def _rows_per_chunk(nodes_per_row: int, budget: int = 1_500_000) -> int:
    return max(1, budget // max(1, nodes_per_row))


@dataclass
class SteinSolution:
    tf: TestFunction
    density: PiecewiseLogDensity
    Eh: float
    switch_point: float = 0.0
    panels: int = 8
    order: int = 20
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def params(self) -> DerivedParams:
        return self.density.params

    @property
    def cuts(self) -> list[float]:
        d = self.params
        return [d.left_break, 0.0, d.right_break] + list(self.tf.kinks)

    # -- integrands ----------------------------------------------------------
    def _q1(self, y):
        """Right-hand side of the equation after division by ``a/2``."""
        return 2.0 * (self.Eh - self.tf.h(y)) / diffusion_a(y, self.params)

    def _q1_tail(self, x0):
        d = self.params
        beta = d.tail_rate
        return 2.0 / d.a_right * (self.Eh / beta - np.atleast_1d(self.tf.laplace_h(x0, beta)))

    def _q2(self, y):
        """Forcing of the first-order equation satisfied by ``f''``."""
        d = self.params
        a = diffusion_a(y, d)
        g = self.Eh - self.tf.h(y)
        fp = self._fprime_many(y)
        return 2.0 / a * (-self.tf.dh(y) - diffusion_a_prime_left(y, d) / a * g) - r_prime_left(y, d) * fp

    def _q2_tail(self, x0):
        d = self.params
        return -2.0 / d.a_right * np.atleast_1d(self.tf.laplace_dh(x0, d.tail_rate))

    # -- the core transform --------------------------------------------------
    def _transform(self, q, q_tail, x, side):
        """``exp(-lp(x)) int q exp(lp)`` over ``(-inf, x]`` (left) or ``[x, inf)`` (right)."""
        d = self.params
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        c = d.right_break
        lpx = log_p(x, d)
        if side == "left":
            lo = -np.sqrt(np.minimum(x, 0.0) ** 2 + 2.0 * TRUNC_EFOLDS)
            lo = np.minimum(lo, x)
            hi = x
            use_tail = np.zeros(x.shape, dtype=bool)
        else:
            cc = 2.0 + d.delta * d.abs_zeta
            U = np.sqrt(np.maximum(x, 0.0) ** 2 + cc * TRUNC_EFOLDS)
            use_tail = U >= c
            lo = x
            hi = np.where(use_tail, np.maximum(c, x), np.maximum(U, x))
        analytic = (x > c) if side == "right" else np.zeros(x.shape, dtype=bool)
        a, b = _pieces(lo, hi, self.cuts)
        npieces = a.shape[-1]
        per_row = npieces * self.panels * self.order
        step = _rows_per_chunk(per_row)
        for s in range(0, x.size, step):
            sl = slice(s, s + step)
            nodes, w = gauss_legendre_panels(a[sl], b[sl], self.panels, self.order)
            m = nodes.shape[0]
            nodes = nodes.reshape(m, -1)
            w = w.reshape(m, -1)
            qv = np.asarray(q(nodes.ravel()), dtype=float).reshape(nodes.shape)
            ex = np.exp(log_p(nodes, d) - lpx[sl, None])
            out[sl] = np.sum(qv * ex * w, axis=1)
        if side == "right":
            tail_pts = use_tail & ~analytic
            if np.any(tail_pts):
                lpc = d.log_p_right_break
                out[tail_pts] += np.exp(lpc - lpx[tail_pts]) * q_tail(np.full(int(tail_pts.sum()), c))
            if np.any(analytic):
                out[analytic] = q_tail(x[analytic])
        return out

    # -- derivatives ---------------------------------------------------------
    def fprime(self, x, form: str = "auto"):
        """``f'(x)``; ``form`` is ``auto``, ``left`` or ``right``."""
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(xa)
        if form == "left":
            ml = np.ones(xa.shape, dtype=bool)
        elif form == "right":
            ml = np.zeros(xa.shape, dtype=bool)
        elif form == "auto":
            ml = xa <= self.switch_point
        else:
            raise ValueError(f"unknown form {form!r}")
        if np.any(ml):
            out[ml] = self._transform(self._q1, self._q1_tail, xa[ml], "left")
        if np.any(~ml):
            out[~ml] = -self._transform(self._q1, self._q1_tail, xa[~ml], "right")
        return out if np.ndim(x) else float(out[0])

    def fsecond(self, x, fp=None):
        d = self.params
        xa = np.asarray(x, dtype=float)
        fp = self.fprime(xa) if fp is None else fp
        out = 2.0 / diffusion_a(xa, d) * (self.Eh - self.tf.h(xa)) - ratio_r(xa, d) * fp
        return out if np.ndim(x) else float(out)

    def fthird_left(self, x, fp=None, fpp=None):
        """``f'''(x-)``, built from left derivatives of ``r`` and ``a``."""
        d = self.params
        xa = np.asarray(x, dtype=float)
        fp = self.fprime(xa) if fp is None else fp
        fpp = self.fsecond(xa, fp) if fpp is None else fpp
        a = diffusion_a(xa, d)
        g = self.Eh - self.tf.h(xa)
        out = (
            -r_prime_left(xa, d) * fp
            - ratio_r(xa, d) * fpp
            - 2.0 / a * self.tf.dh(xa)
            - 2.0 * diffusion_a_prime_left(xa, d) / a**2 * g
        )
        return out if np.ndim(x) else float(out)

    def fsecond_integral(self, x):
        """``f''`` from its own integral representation (independent of the algebraic form)."""
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(xa)
        ml = xa <= self.switch_point
        if np.any(ml):
            out[ml] = self._transform(self._q2, self._q2_tail, xa[ml], "left")
        if np.any(~ml):
            out[~ml] = -self._transform(self._q2, self._q2_tail, xa[~ml], "right")
        return out if np.ndim(x) else float(out[0])

    def f(self, x):
        """``f(x) = int_0^x f'`` (the additive constant is immaterial to both generators)."""
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        return self._integrate_fprime(np.zeros_like(xa), xa) if np.ndim(x) else float(self._integrate_fprime(np.zeros(1), xa)[0])

    def _fprime_many(self, x):
        """``f'`` at many scattered points; large batches go through the grid recurrence."""
        x = np.asarray(x, dtype=float)
        if x.size < GRID_BATCH:
            return self.fprime(x)
        u, inv = np.unique(x.ravel(), return_inverse=True)
        return self.fprime_grid(u)[inv].reshape(x.shape)

    def _integrate_fprime(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        sign = np.where(hi >= lo, 1.0, -1.0)
        a, b = _pieces(np.minimum(lo, hi), np.maximum(lo, hi), self.cuts)
        nodes, w = gauss_legendre_panels(a, b, 2, 16)
        m = nodes.shape[0]
        nodes = nodes.reshape(m, -1)
        w = w.reshape(m, -1)
        fp = self._fprime_many(nodes.ravel()).reshape(nodes.shape)
        return sign * np.sum(fp * w, axis=1)

    # -- grid checks -----------------------------------------------------------
    def cumulative_transform(self, q, xs, start_left, start_right):
        """Evaluate the left/right transforms on a sorted grid by stable recurrence.

        Points ``<= switch_point`` run left to right from ``start_left(xs[0])``;
        the rest run right to left from ``start_right(xs[-1])``.
        """
        d = self.params
        xs = np.asarray(xs, dtype=float)
        if np.any(np.diff(xs) <= 0):
            raise ValueError("grid must be strictly increasing")
        lpx = log_p(xs, d)
        out = np.empty_like(xs)
        ml = xs <= self.switch_point
        idx_l = np.nonzero(ml)[0]
        idx_r = np.nonzero(~ml)[0]
        if idx_l.size:
            xl = xs[idx_l]
            cell = self._cell_integrals(q, xl[:-1], xl[1:], ref=xl[1:])
            decay = np.exp(lpx[idx_l][:-1] - lpx[idx_l][1:])
            acc = float(start_left(xl[:1])[0])
            vals = [acc]
            for i in range(cell.size):
                acc = acc * decay[i] + cell[i]
                vals.append(acc)
            out[idx_l] = vals
        if idx_r.size:
            xr = xs[idx_r]
            cell = self._cell_integrals(q, xr[:-1], xr[1:], ref=xr[:-1])
            decay = np.exp(lpx[idx_r][1:] - lpx[idx_r][:-1])
            acc = float(start_right(xr[-1:])[0])
            vals = [acc]
            for i in range(cell.size - 1, -1, -1):
                acc = acc * decay[i] + cell[i]
                vals.append(acc)
            out[idx_r] = -np.array(vals[::-1])
        return out

    def _cell_integrals(self, q, lo, hi, ref):
        d = self.params
        if lo.size == 0:
            return np.zeros(0)
        a, b = _pieces(lo, hi, self.cuts)
        nodes, w = gauss_legendre_panels(a, b, 1, 16)
        m = nodes.shape[0]
        nodes = nodes.reshape(m, -1)
        w = w.reshape(m, -1)
        qv = np.asarray(q(nodes.ravel()), dtype=float).reshape(nodes.shape)
        ex = np.exp(log_p(nodes, d) - log_p(ref, d)[:, None])
        return np.sum(qv * ex * w, axis=1)

    def fprime_grid(self, xs):
        return self.cumulative_transform(
            self._q1, xs,
            lambda x: self._transform(self._q1, self._q1_tail, x, "left"),
            lambda x: self._transform(self._q1, self._q1_tail, x, "right"),
        )

    def fsecond_integral_grid(self, xs):
        return self.cumulative_transform(
            self._q2, xs,
            lambda x: self._transform(self._q2, self._q2_tail, x, "left"),
            lambda x: self._transform(self._q2, self._q2_tail, x, "right"),
        )

    def poisson_residual(self, xs):
        """``a f''/2 + b f' - (Eh - h)`` with ``f'`` and ``f''`` from independent
        integral representations evaluated on the grid ``xs``."""
        d = self.params
        xs = np.asarray(xs, dtype=float)
        fp = self.fprime_grid(xs)
        fpp = self.fsecond_integral_grid(xs)
        return 0.5 * diffusion_a(xs, d) * fpp + drift_b(xs, d) * fp - (self.Eh - self.tf.h(xs))

    # -- Taylor expansion of the chain generator -----------------------------
    def taylor_remainders(self, k):
        """``(eps1, eps2)`` at ``x_k``; accepts an integer or an array of states."""
        d = self.params
        ka = np.atleast_1d(np.asarray(k))
        if np.any(ka < 0):
            raise ValueError("negative state")
        x = state_to_x(ka.astype(float), d)
        up = state_to_x(ka.astype(float) + 1.0, d)
        down = state_to_x(ka.astype(float) - 1.0, d)
        f3x = self.fthird_left(x)
        e1 = 0.5 * self._kernel_integral(x, up, x, up, f3x)
        e2 = -0.5 * self._kernel_integral(down, x, x, down, f3x)
        if np.ndim(k):
            return e1, e2
        return float(e1[0]), float(e2[0])

    def _kernel_integral(self, lo, hi, x, anchor, f3x):
        """``int_lo^hi (y - anchor)**2 (f'''(y) - f'''(x-)) dy`` per row."""
        a, b = _pieces(lo, hi, self.cuts)
        nodes, w = gauss_legendre_panels(a, b, 2, 16)
        m = nodes.shape[0]
        nodes = nodes.reshape(m, -1)
        w = w.reshape(m, -1)
        flat = nodes.ravel()
        f3 = self.fthird_left(flat, fp=self._fprime_many(flat)).reshape(nodes.shape)
        kern = (nodes - anchor[:, None]) ** 2
        return np.sum(kern * (f3 - f3x[:, None]) * w, axis=1)

    def generator_terms(self, k):
        """Chain generator applied to ``f`` and the pieces of its Taylor expansion at ``x_k``."""
        d = self.params
        ka = np.atleast_1d(np.asarray(k))
        x = state_to_x(ka.astype(float), d)
        up = state_to_x(ka.astype(float) + 1.0, d)
        down = state_to_x(ka.astype(float) - 1.0, d)
        inc_up = self._integrate_fprime(x, up)
        inc_down = self._integrate_fprime(x, down)
        dk = death_rate(ka, d)
        gx = d.lam * inc_up + dk * inc_down
        fp = self.fprime(x)
        fpp = self.fsecond(x, fp)
        f3 = self.fthird_left(x, fp, fpp)
        e1, e2 = self.taylor_remainders(ka)
        b = drift_b(x, d)
        gy = b * fp + 0.5 * diffusion_a(x, d) * fpp
        return {"x": x, "G_chain": gx, "G_diff": gy, "third": d.delta**2 / 6.0 * b * f3,
                "eps1": e1, "eps2": e2, "b": b}

    def generator_residual(self, k):
        """``G_chain f - [G_Y f + delta^2 b f'''(x-)/6 + lam (eps1 + eps2) - b eps2/delta]``."""
        d = self.params
        t = self.generator_terms(k)
        rhs = t["G_diff"] + t["third"] + d.lam * (t["eps1"] + t["eps2"]) - t["b"] * t["eps2"] / d.delta
        res = t["G_chain"] - rhs
        return res if np.ndim(k) else float(res[0])

    def error_decomposition(self, dist: StationaryDistribution, tail_eps: float = 1e-15) -> dict:
        """The four expectation terms bounding ``|E h(Xs) - E h(Y)|``, as exact
        weighted sums up to a tail cutoff, plus an envelope for the remainder."""
        d = self.params
        K = dist.tail_cutoff(tail_eps)
        k = np.arange(K + 1)
        pi = dist.pmf(k)
        t = self.generator_terms(k)
        terms = {
            "third_order": math.fsum(pi * np.abs(t["third"])),
            "eps1": d.lam * math.fsum(pi * np.abs(t["eps1"])),
            "eps2": d.lam * math.fsum(pi * np.abs(t["eps2"])),
            "b_eps2": math.fsum(pi * np.abs(t["b"] * t["eps2"])) / d.delta,
        }
        last = (np.abs(t["third"][-1]) + d.lam * (abs(t["eps1"][-1]) + abs(t["eps2"][-1]))
                + abs(t["b"][-1] * t["eps2"][-1]) / d.delta)
        tail_mass = dist.tail_mass * dist.tail_ratio ** (K - d.n)
        total = math.fsum(terms.values())
        ex = expect_chain(dist, self.tf)
        gy_mean = math.fsum(pi * t["G_diff"])
        gx_mean = math.fsum(pi * t["G_chain"])
        return {
            "terms": terms,
            "total": total,
            "tail_envelope": float(2.0 * last * tail_mass),
            "states": int(K + 1),
            "actual_error": abs(ex - self.Eh),
            "mean_G_diff": gy_mean,
            "mean_G_chain": gx_mean,
        }

    # -- gradient bound shapes -----------------------------------------------
    def default_grid(self, step: float | None = None) -> np.ndarray:
        d = self.params
        step = d.delta / 8.0 if step is None else step
        lo = max(-3.0 / d.delta, -50.0)
        hi = d.right_break + min(20.0 / d.abs_zeta, 20.0)
        g = np.arange(lo, hi + 0.5 * step, step)
        return np.union1d(g, [d.left_break, 0.0, d.right_break])

    def empirical_gradient_constants(self, grid=None) -> dict:
        d = self.params
        xs = self.default_grid() if grid is None else np.asarray(grid, dtype=float)
        fp = self.fprime(xs)
        fpp = self.fsecond(xs, fp)
        f3 = self.fthird_left(xs, fp, fpp)
        mu, az, c = d.mu, d.abs_zeta, d.right_break
        le = xs <= c
        ge = xs >= c
        inner = (1.0 + 1.0 / az) / mu

        def sup(v, mask, env):
            return float(np.max(np.abs(v[mask]) / env[mask])) if np.any(mask) else 0.0

        ones = np.ones_like(xs)
        out = {
            "fprime": max(sup(fp, le, inner * ones), sup(fp, ge, (xs + 1.0 + 1.0 / az) / (mu * az))),
            "fsecond": max(sup(fpp, le, inner * ones), sup(fpp, ge, ones / (mu * az))),
            "fthird": max(sup(f3, le, inner * ones), sup(f3, xs > c, ones / mu)),
        }
        out["points"] = int(xs.size)
        return out


def solve_poisson(tf: TestFunction, density: PiecewiseLogDensity | DerivedParams, **kw) -> SteinSolution:
    dens = density if isinstance(density, PiecewiseLogDensity) else build_density(density, "state_dependent")
    if dens.kind != "state_dependent":
        raise ValueError("the Poisson equation is posed for the state-dependent diffusion")
    Eh = tf.expect_density(dens)
    return SteinSolution(tf=tf, density=dens, Eh=Eh, **kw)
