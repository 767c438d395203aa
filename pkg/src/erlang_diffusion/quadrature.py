"""Quadrature helpers.

``adaptive_gk15`` is a vectorised adaptive Gauss-Kronrod (7/15) integrator that
keeps its accepted panels, so callers can reuse the panel tree for cumulative
integrals.  ``gauss_legendre_panels`` produces batched composite Gauss-Legendre
nodes for many intervals at once.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

# QUADPACK qk15 constants.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod abscissae (1, 3, 5, 7 from the outside).
for i, w in zip((1, 3, 5), _WG[:3]):
    _WG15[i] = w
    _WG15[14 - i] = w
_WG15[7] = _WG[3]


class QuadratureError(RuntimeError):
    """Adaptive refinement hit its panel budget before meeting the tolerance."""

    def __init__(self, message, *, interval=None, estimate=None, error=None, panels=None):
        super().__init__(message)
        self.interval = interval
        self.estimate = estimate
        self.error = error
        self.panels = panels


@dataclass(frozen=True)
class PanelTree:
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    error: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.value))

    @property
    def total_error(self) -> float:
        return float(np.sum(self.error))

    def cumulative(self) -> np.ndarray:
        """Integral from the left end up to each panel's right edge."""
        return np.cumsum(self.value)


def _gk15_batch(f, a, b):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c[:, None] + h[:, None] * _NODES[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    k = h * (fx @ _WK)
    g = h * (fx @ _WG15)
    return k, np.abs(k - g)


def adaptive_gk15(f, breakpoints, *, rtol=1e-12, atol=1e-13, max_panels=200000) -> PanelTree:
    """Integrate a vectorised ``f`` over ``[breakpoints[0], breakpoints[-1]]``.

    ``breakpoints`` seeds the initial panels; points where ``f`` has kinks belong
    there.  A panel is accepted when its error estimate falls below its
    width-proportional share of ``max(atol, rtol * |estimate|)``.
    """
    bp = np.unique(np.asarray(breakpoints, dtype=float))
    if bp.size < 2:
        z = np.zeros(0)
        return PanelTree(z, z, z, z)
    width = bp[-1] - bp[0]
    pend_a, pend_b = bp[:-1], bp[1:]
    acc_a, acc_b, acc_v, acc_e = [], [], [], []
    acc_total = 0.0
    used = pend_a.size
    while pend_a.size:
        k, err = _gk15_batch(f, pend_a, pend_b)
        est = acc_total + float(np.sum(k))
        budget = max(atol, rtol * abs(est))
        share = budget * (pend_b - pend_a) / width
        ok = (err <= share) | ((pend_b - pend_a) <= 1e-14 * max(1.0, abs(pend_a).max()))
        acc_a.append(pend_a[ok])
        acc_b.append(pend_b[ok])
        acc_v.append(k[ok])
        acc_e.append(err[ok])
        acc_total += float(np.sum(k[ok]))
        bad_a, bad_b = pend_a[~ok], pend_b[~ok]
        if bad_a.size == 0:
            break
        used += bad_a.size
        if used > max_panels:
            raise QuadratureError(
                f"adaptive quadrature did not converge on [{bp[0]:.6g}, {bp[-1]:.6g}] "
                f"after {used} panels (estimate {est:.6g}, "
                f"outstanding error {float(np.sum(err[~ok])):.3g})",
                interval=(float(bp[0]), float(bp[-1])),
                estimate=est,
                error=float(np.sum(err[~ok])),
                panels=used,
            )
        mid = 0.5 * (bad_a + bad_b)
        pend_a = np.concatenate([bad_a, mid])
        pend_b = np.concatenate([mid, bad_b])
    left = np.concatenate(acc_a)
    order = np.argsort(left, kind="stable")
    return PanelTree(
        left=left[order],
        right=np.concatenate(acc_b)[order],
        value=np.concatenate(acc_v)[order],
        error=np.concatenate(acc_e)[order],
    )


def integrate(f, breakpoints, **kw) -> float:
    """Convenience wrapper returning ``sum`` of the accepted panel values."""
    tree = adaptive_gk15(f, breakpoints, **kw)
    return float(np.sum(tree.value))


@lru_cache(maxsize=16)
def _leggauss(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre_panels(a, b, panels: int = 1, order: int = 16):
    """Composite Gauss-Legendre nodes and weights for each interval ``[a_i, b_i]``.

    Returns arrays of shape ``a.shape + (panels * order,)``.  Degenerate intervals
    get zero weights, which makes padding with empty pieces harmless.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x, w = _leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    lo = edges[:-1, None] + 0.5 * (x[None, :] + 1.0) / panels  # (panels, order)
    t = lo.ravel()
    wt = np.tile(w, panels) * 0.5 / panels
    span = (b - a)[..., None]
    nodes = a[..., None] + span * t
    weights = span * wt
    return nodes, weights


def gl15_partial(f, a, b):
    """Single 15-point Gauss-Legendre estimate on each ``[a_i, b_i]`` (vectorised)."""
    nodes, weights = gauss_legendre_panels(a, b, panels=1, order=15)
    vals = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
    return np.sum(vals * weights, axis=-1)
