"""Exact stationary distribution of the M/M/n chain and expectations under it.

States ``k <= n`` are stored explicitly in log-space; states above ``n`` form a
geometric tail ``pi_{n+j} = pi_n rho**j`` that is always summed in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy.special import logsumexp

from .params import DerivedParams, SystemParams, derive_params, state_to_x

REGIONS = ("all", "below", "above", "above_strict")


@dataclass(frozen=True)
class StationaryDistribution:
    log_pi_head: np.ndarray
    tail_ratio: float
    params: DerivedParams

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def log_pi_n(self) -> float:
        return float(self.log_pi_head[-1])

    @property
    def pi_head(self) -> np.ndarray:
        return np.exp(self.log_pi_head)

    @property
    def x_head(self) -> np.ndarray:
        return state_to_x(np.arange(self.n + 1, dtype=float), self.params)

    @property
    def tail_mass(self) -> float:
        """``P(X > n)``."""
        rho = self.tail_ratio
        return math.exp(self.log_pi_n) * rho / (1.0 - rho)

    def pmf(self, k):
        """``P(X = k)`` for integer ``k`` (scalar or array)."""
        ka = np.asarray(k)
        if np.any(ka < 0):
            raise ValueError("negative customer count")
        head = self.log_pi_head[np.minimum(ka, self.n)]
        logp = head + np.maximum(ka - self.n, 0) * math.log(self.tail_ratio)
        out = np.exp(logp)
        return out if isinstance(k, np.ndarray) else float(out)

    def pmf_upto(self, K: int) -> np.ndarray:
        return self.pmf(np.arange(K + 1))

    def tail_cutoff(self, eps: float = 1e-17) -> int:
        """Smallest ``K >= n`` with ``P(X > K) < eps``."""
        rho = self.tail_ratio
        lt = self.log_pi_n + math.log(rho) - math.log1p(-rho)
        if lt < math.log(eps):
            return self.n
        j = math.ceil((math.log(eps) - lt) / math.log(rho))
        return self.n + max(j, 0)


def stationary_distribution(p: SystemParams | DerivedParams) -> StationaryDistribution:
    d = p if isinstance(p, DerivedParams) else derive_params(p)
    n, R = d.n, d.R
    rho = R / n
    # Anchor at the mode so that each increment is a small log1p.
    m = min(int(math.floor(R)), n)
    logs = np.zeros(n + 1)
    if m < n:
        j = np.arange(m + 1, n + 1, dtype=float)
        logs[m + 1:] = np.cumsum(-np.log1p((j - R) / R))
    if m > 0:
        j = np.arange(m, 0, -1, dtype=float)  # going down: log pi_{j-1} - log pi_j = log(j/R)
        logs[m - 1::-1] = np.cumsum(np.log1p((j - R) / R))
    log_tail = logs[n] + math.log(rho) - math.log1p(-rho)
    log_z = logsumexp(np.append(logs, log_tail))
    return StationaryDistribution(log_pi_head=logs - log_z, tail_ratio=rho, params=d)


def _geometric_power_sums(rho: float, m: int) -> list[float]:
    """``S_i = sum_{j>=1} j**i rho**j`` for ``i = 0..m`` (Eulerian numerators)."""
    out = []
    for i in range(m + 1):
        # A_i(rho) = sum_k Eulerian(i, k) rho**k
        coeffs = _eulerian_row(i)
        num = sum(c * rho ** (k + 1) for k, c in enumerate(coeffs))
        out.append(num / (1.0 - rho) ** (i + 1))
    return out


def _eulerian_row(i: int) -> list[int]:
    if i == 0:
        return [1]
    row = [1]
    for m in range(1, i + 1):
        new = [0] * m
        for k in range(m):
            a = row[k] if k < len(row) else 0
            b = row[k - 1] if 0 <= k - 1 < len(row) else 0
            new[k] = (k + 1) * a + (m - k) * b
        row = new
    return row


def tail_polynomial_sum(dist: StationaryDistribution, poly: Polynomial) -> float:
    """``sum_{k>n} pi_k poly(x_k)`` in closed form."""
    d = dist.params
    # poly(x_n + delta j) as a polynomial in j
    shifted = poly(Polynomial([state_to_x(d.n, d), d.delta]))
    c = np.atleast_1d(shifted.coef)
    S = _geometric_power_sums(dist.tail_ratio, len(c) - 1)
    return math.exp(dist.log_pi_n) * math.fsum(ci * si for ci, si in zip(c, S))


def tail_exponential_sum(dist: StationaryDistribution, omega: float) -> complex:
    """``sum_{k>n} pi_k exp(i omega x_k)`` in closed form."""
    d = dist.params
    q = dist.tail_ratio * complex(math.cos(omega * d.delta), math.sin(omega * d.delta))
    xn = state_to_x(d.n, d)
    return math.exp(dist.log_pi_n) * complex(math.cos(omega * xn), math.sin(omega * xn)) * q / (1.0 - q)


def _head_mask(dist: StationaryDistribution, region: str) -> np.ndarray:
    k = np.arange(dist.n + 1)
    if region == "all":
        return np.ones_like(k, dtype=bool)
    if region == "below":
        return k <= dist.n
    if region == "above":
        return k >= dist.n
    if region == "above_strict":
        return k >= dist.n + 1
    raise ValueError(f"unknown region {region!r}")


def scaled_moment(dist: StationaryDistribution, power: int, region: str = "all", absolute: bool = False) -> float:
    """``E[Xs**power 1(region)]`` with ``Xs = delta (X - R)``.

    ``below`` is ``Xs <= -zeta`` (``k <= n``), ``above`` is ``Xs >= -zeta``
    (``k >= n``) and ``above_strict`` is ``k >= n + 1``.  Region tests compare
    integer states, never floats.  ``absolute`` returns ``E[|Xs**power| 1(region)]``.
    """
    if power not in (0, 1, 2, 3):
        raise ValueError("power must be 0..3")
    mask = _head_mask(dist, region)
    x = dist.x_head
    vals = x**power
    if absolute:
        vals = np.abs(vals)
    head = math.fsum((np.exp(dist.log_pi_head) * vals)[mask])
    if region == "below":
        return head
    # Tail states all have x > -zeta >= 0, so absolute values change nothing there.
    tail = tail_polynomial_sum(dist, Polynomial([0] * power + [1]))
    return head + tail


def delay_probability(dist: StationaryDistribution) -> float:
    """``P(X >= n) = pi_n / (1 - rho)``."""
    return math.exp(dist.log_pi_n - math.log1p(-dist.tail_ratio))


def scaled_pmf(dist: StationaryDistribution, k):
    return dist.pmf(k)


def scaled_cdf(dist: StationaryDistribution, x):
    """``P(Xs <= x)``."""
    d = dist.params
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(xa)
    cum = np.cumsum(dist.pi_head)
    rho = dist.tail_ratio
    pin = math.exp(dist.log_pi_n)
    for i, xv in enumerate(xa):
        if xv == math.inf:
            out[i] = 1.0
            continue
        kf = math.floor(xv * d.sqrt_R + d.R + 1e-9)
        # guard the floor against rounding at lattice points
        while kf >= 0 and state_to_x(kf, d) > xv:
            kf -= 1
        while state_to_x(kf + 1, d) <= xv:
            kf += 1
        if kf < 0:
            out[i] = 0.0
        elif kf <= d.n:
            out[i] = cum[kf]
        else:
            j = kf - d.n
            out[i] = 1.0 - pin * rho ** (j + 1) / (1.0 - rho)
    return out if np.ndim(x) else float(out[0])


def expect(dist: StationaryDistribution, f: Callable, *, tail: Callable | None = None, tail_eps: float = 1e-18) -> float:
    """``E f(Xs)``.  ``tail(dist)`` may supply the ``k > n`` sum in closed form;
    otherwise the tail is truncated where the remaining mass is below ``tail_eps``."""
    x = dist.x_head
    head = math.fsum(np.exp(dist.log_pi_head) * np.asarray(f(x), dtype=float))
    if tail is not None:
        return head + float(tail(dist))
    K = dist.tail_cutoff(tail_eps)
    if K == dist.n:
        return head
    k = np.arange(dist.n + 1, K + 1)
    xs = state_to_x(k.astype(float), dist.params)
    return head + math.fsum(dist.pmf(k) * np.asarray(f(xs), dtype=float))


def generator_expectation_polynomial(dist: StationaryDistribution, poly: Polynomial) -> float:
    """``E[G f(Xs)]`` for polynomial ``f`` with the tail in closed form."""
    d = dist.params
    k = np.arange(d.n + 1)
    from .params import apply_ctmc_generator

    head_vals = apply_ctmc_generator(poly, k, d)
    head = math.fsum(np.exp(dist.log_pi_head) * head_vals)
    up = poly(Polynomial([d.delta, 1.0])) - poly
    down = poly(Polynomial([-d.delta, 1.0])) - poly
    gen_tail = d.lam * up + d.n * d.mu * down
    return head + tail_polynomial_sum(dist, gen_tail)


def generator_expectation_sine(dist: StationaryDistribution, omega: float = 1.0) -> float:
    """``E[G f(Xs)]`` for ``f(x) = sin(omega x)`` with the tail in closed form."""
    d = dist.params
    k = np.arange(d.n + 1)
    from .params import apply_ctmc_generator

    f = lambda x: np.sin(omega * x)
    head = math.fsum(np.exp(dist.log_pi_head) * apply_ctmc_generator(f, k, d))
    e = complex(math.cos(omega * d.delta), math.sin(omega * d.delta))
    factor = d.lam * (e - 1.0) + d.n * d.mu * (1.0 / e - 1.0)
    return head + (factor * tail_exponential_sum(dist, omega)).imag


@dataclass(frozen=True)
class BoundCheck:
    name: str
    lhs: float
    rhs: float
    skipped: bool = False
    reason: str = ""

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.skipped or self.lhs <= self.rhs


@dataclass(frozen=True)
class BoundReport:
    checks: tuple[BoundCheck, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {
            c.name: {"lhs": c.lhs, "rhs": c.rhs, "slack": c.slack, "passed": c.passed, "skipped": c.skipped}
            for c in self.checks
        }


def check_moment_bounds(dist: StationaryDistribution) -> BoundReport:
    """Evaluate the thirteen stationary moment inequalities with exact left-hand sides."""
    d = dist.params
    dl, az = d.delta, d.abs_zeta
    m1_below = scaled_moment(dist, 1, "below", absolute=True)
    m2_below = scaled_moment(dist, 2, "below")
    m1_above = scaled_moment(dist, 1, "above", absolute=True)
    m2_above = scaled_moment(dist, 2, "above")
    p_below = scaled_moment(dist, 0, "below")
    p_above = scaled_moment(dist, 0, "above")
    pi0 = math.exp(dist.log_pi_head[0])
    pin = math.exp(dist.log_pi_n)
    big = d.R >= 1.0

    def gated(name, lhs, rhs, cond, reason):
        return BoundCheck(name, lhs, rhs) if cond else BoundCheck(name, lhs, rhs, skipped=True, reason=reason)

    checks = [
        BoundCheck("second_moment_below", m2_below, 4.0 / 3.0 + 2.0 * dl**2 / 3.0),
        BoundCheck("abs_moment_below_delta", m1_below, math.sqrt(4.0 / 3.0 + 2.0 * dl**2 / 3.0)),
        BoundCheck("abs_moment_below_zeta", m1_below, 2.0 * az),
        BoundCheck("abs_moment_above", m1_above, 1.0 / az + dl**2 / (4.0 * az) + dl / 2.0),
        BoundCheck("prob_below", p_below, (2.0 + dl) * az),
        BoundCheck("second_moment_below_zeta", m2_below, (5.0 + dl * (1.0 + dl / 2.0)) * az**2 + (2.0 + dl) * az),
        BoundCheck(
            "second_moment_above",
            m2_above,
            dl**2 + 8.0 + 4.0 / az * (1.0 / az + dl**2 / (4.0 * az) + dl / 2.0) + 2.0 * (2.0 * dl + dl**3) / (3.0 * az),
        ),
        gated("pi_zero", pi0, 4.0 * (2.0 + dl) * dl**2 * az, az <= 1.0, "requires |zeta| <= 1"),
        BoundCheck("pi_n", pin, dl * az),
        gated("weighted_abs_moment_below", (1.0 + 1.0 / az) * m1_below, math.sqrt(2.0) + 2.0, big, "requires R >= 1"),
        gated("weighted_second_moment_below", (1.0 + 1.0 / az) * m2_below, 9.0, big, "requires R >= 1"),
        gated("zeta_prob_above", az * p_above, 2.0, big, "requires R >= 1"),
        gated("zeta_sq_prob_above", az**2 * p_above, 20.0, big, "requires R >= 1"),
    ]
    return BoundReport(tuple(checks))
