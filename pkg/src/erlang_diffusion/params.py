"""System parameters, coefficient functions and generators of the Erlang-C model.

The scaled state is ``x = delta * (k - R)`` with ``delta = 1/sqrt(R)``.  The two
breakpoints of the diffusion coefficients, ``-1/delta`` and ``-zeta``, are the
scaled images of ``k = 0`` and ``k = n``; they are always computed through
:func:`state_to_x` so that grid points land on them bit-for-bit.

All coefficient functions accept scalars or numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

ArrayLike = "float | np.ndarray"


class InvalidParameters(ValueError):
    """Raised for non-positive rates, bad server counts or unstable loads."""


@dataclass(frozen=True)
class SystemParams:
    lam: float
    mu: float
    n: int

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise InvalidParameters(f"server count must be a positive integer, got {self.n!r}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise InvalidParameters(f"arrival rate must be positive, got {self.lam!r}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise InvalidParameters(f"service rate must be positive, got {self.mu!r}")
        if self.lam / self.mu >= self.n:
            raise InvalidParameters(
                f"unstable system: R = {self.lam / self.mu!r} >= n = {self.n}"
            )

    @classmethod
    def from_load(cls, n: int, R: float, mu: float = 1.0) -> "SystemParams":
        """Build parameters from the offered load; ``lam = R * mu``."""
        return cls(lam=R * mu, mu=mu, n=int(n))

    @property
    def R(self) -> float:
        return self.lam / self.mu


@dataclass(frozen=True)
class DerivedParams:
    R: float
    delta: float
    zeta: float
    theorem_regime: bool
    system: SystemParams

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def mu(self) -> float:
        return self.system.mu

    @property
    def lam(self) -> float:
        return self.system.lam

    @property
    def sqrt_R(self) -> float:
        return math.sqrt(self.R)

    @property
    def abs_zeta(self) -> float:
        return -self.zeta

    @property
    def left_break(self) -> float:
        """``-1/delta``, the image of state 0."""
        return state_to_x(0, self)

    @property
    def right_break(self) -> float:
        """``-zeta``, the image of state n."""
        return state_to_x(self.n, self)

    @property
    def rho(self) -> float:
        return self.R / self.n

    @property
    def tail_rate(self) -> float:
        """Exponential decay rate of ``p(x)`` beyond ``-zeta``: ``2|zeta|/(2 + delta|zeta|)``."""
        az = self.abs_zeta
        return 2.0 * az / (2.0 + self.delta * az)

    @property
    def a_right(self) -> float:
        """Constant value of ``a(x)`` for ``x > -zeta``."""
        return self.mu * (2.0 + self.delta * self.abs_zeta)

    @property
    def log_p_left_const(self) -> float:
        """``log p(x) + x**2`` on ``x <= -1/delta``."""
        return (3.0 - 4.0 * math.log(2.0)) / self.delta**2

    @property
    def log_p_right_break(self) -> float:
        u = 0.5 * self.delta * self.abs_zeta
        return 4.0 / self.delta**2 * (math.log1p(u) - u)


def derive_params(p: SystemParams) -> DerivedParams:
    R = p.R
    sR = math.sqrt(R)
    return DerivedParams(
        R=R,
        delta=1.0 / sR,
        zeta=(R - p.n) / sR,
        theorem_regime=R >= 1.0,
        system=p,
    )


def params_for(n: int, R: float, mu: float = 1.0) -> DerivedParams:
    return derive_params(SystemParams.from_load(n, R, mu))


def state_to_x(k, d: DerivedParams):
    """Canonical map from customer count (int, float or array) to scaled state."""
    return (np.asarray(k, dtype=float) - d.R) / d.sqrt_R if isinstance(k, np.ndarray) else (k - d.R) / d.sqrt_R


def x_to_state(x: float, d: DerivedParams) -> int:
    """Nearest customer count to a scaled state (used for lattice lookups)."""
    return int(round(x * d.sqrt_R + d.R))


def _out(x, val):
    return val if isinstance(x, np.ndarray) else float(val)


def drift_b(x, d: DerivedParams):
    """``b(x) = mu[(x + zeta)^- + zeta]``: ``-mu x`` below ``-zeta`` and ``mu zeta`` above."""
    xa = np.asarray(x, dtype=float)
    val = np.where(xa <= d.right_break, -d.mu * xa, d.mu * d.zeta)
    return _out(x, val)


def diffusion_a(x, d: DerivedParams):
    """State-dependent diffusion coefficient; ``mu`` left of ``-1/delta`` and ``mu(2 + delta x)`` up to ``-zeta``."""
    xa = np.asarray(x, dtype=float)
    val = np.where(
        xa <= d.left_break,
        d.mu,
        np.where(xa <= d.right_break, d.mu * (2.0 + d.delta * xa), d.a_right),
    )
    return _out(x, val)


def diffusion_a_prime_left(x, d: DerivedParams):
    xa = np.asarray(x, dtype=float)
    val = np.where((xa > d.left_break) & (xa <= d.right_break), d.mu * d.delta, 0.0)
    return _out(x, val)


def ratio_r(x, d: DerivedParams):
    """``r(x) = 2 b(x) / a(x)`` in closed form."""
    xa = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        mid = -2.0 * xa / (2.0 + d.delta * xa)
    val = np.where(
        xa <= d.left_break,
        -2.0 * xa,
        np.where(xa <= d.right_break, mid, -d.tail_rate),
    )
    return _out(x, val)


def r_prime_left(x, d: DerivedParams):
    xa = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        mid = -4.0 / (2.0 + d.delta * xa) ** 2
    val = np.where(xa <= d.left_break, -2.0, np.where(xa <= d.right_break, mid, 0.0))
    return _out(x, val)


def log_p(x, d: DerivedParams):
    """``log p(x) = int_0^x r(y) dy``, evaluated piecewise without leaving log-space."""
    xa = np.asarray(x, dtype=float)
    k = 4.0 / d.delta**2
    u = np.clip(0.5 * d.delta * xa, -0.5, None)
    mid = k * (np.log1p(u) - u)
    left = d.log_p_left_const - xa * xa
    right = d.log_p_right_break - d.tail_rate * (xa - d.right_break)
    val = np.where(xa <= d.left_break, left, np.where(xa <= d.right_break, mid, right))
    return _out(x, val)


def death_rate(k, d: DerivedParams):
    """``d(k) = mu min(k, n)``."""
    return d.mu * np.minimum(k, d.n)


def apply_ctmc_generator(f: Callable, k, d: DerivedParams):
    """``lam (f(x+delta) - f(x)) + mu min(k,n) (f(x-delta) - f(x))`` at ``x = x_k``."""
    ka = np.asarray(k)
    if np.any(ka < 0):
        raise ValueError("customer count must be non-negative")
    x = state_to_x(ka.astype(float), d)
    up = state_to_x(ka.astype(float) + 1.0, d)
    down = state_to_x(ka.astype(float) - 1.0, d)
    fx = f(x)
    val = d.lam * (f(up) - fx) + death_rate(ka, d) * (f(down) - fx)
    return val if isinstance(k, np.ndarray) else float(val)


def apply_diffusion_generator(fp, fpp, x, d: DerivedParams, kind: str = "state_dependent"):
    """``b f' + a f''/2``; the constant variant freezes ``a`` at ``a(0) = 2 mu``."""
    if kind == "state_dependent":
        a = diffusion_a(x, d)
    elif kind == "constant":
        a = 2.0 * d.mu
    else:
        raise ValueError(f"unknown generator kind {kind!r}")
    return drift_b(x, d) * fp + 0.5 * a * fpp
