"""Smoothing kernels on [-1, 1] and their boundary-corrected versions.

A :class:`Kernel` is a symmetric density supported on [-1, 1].  Near the
edges of the unit time interval a kernel estimate loses mass, so
:class:`BoundaryKernel` re-weights the kernel by a linear factor chosen such
that, over the admissible part of the support, the corrected kernel still
integrates to one and has zero first moment::

    K_b(x, s) = (a2(p) - a1(p) x) / (a0(p) a2(p) - a1(p)^2) * K(x),   s = p h
    K_b(x, s) = (b2(p) - b1(p) x) / (b0(p) b2(p) - b1(p)^2) * K(x),   s = 1 - p h

with ``a_j(p) = int_{-1}^{p} x^j K(x) dx`` and ``b_j(p) = int_{-p}^{1} x^j K(x) dx``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .errors import ConfigError, DegenerateKernelError

_DENOM_TOL = 1e-14
_QUAD_TOL = 1e-12


def biweight(x):
    """Biweight (quartic) kernel ``15/16 (1 - x^2)^2`` on [-1, 1], zero outside."""
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) <= 1.0, 0.9375 * (1.0 - x * x) ** 2, 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Kernel:
    """A symmetric probability density on [-1, 1].

    ``func`` must accept numpy arrays.  The Lipschitz bound is informative
    only; it is not checked.
    """

    name: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    lipschitz_bound: float = float("nan")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(np.abs(x) <= 1.0, self.func(np.clip(x, -1.0, 1.0)), 0.0)
        return out if out.ndim else float(out)

    def evaluate(self, x):
        return self(x)


# sup |K'| is attained at x = 1/sqrt(3)
BIWEIGHT = Kernel("biweight", biweight, lipschitz_bound=5.0 / (2.0 * np.sqrt(3.0)))

_REGISTRY: dict[str, Kernel] = {"biweight": BIWEIGHT}


def _check_order(j: int) -> None:
    if j not in (0, 1, 2):
        raise ConfigError(f"moment order must be 0, 1 or 2, got {j!r}")


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"p must lie in [0, 1], got {p!r}")


def kernel_moment_a(kernel: Kernel, j: int, p: float) -> float:
    """``int_{-1}^{p} x^j K(x) dx`` by adaptive quadrature."""
    _check_order(j)
    _check_p(p)
    val, _ = integrate.quad(lambda x: x**j * kernel(x), -1.0, p, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200)
    return float(val)


def kernel_moment_b(kernel: Kernel, j: int, p: float) -> float:
    """``int_{-p}^{1} x^j K(x) dx`` by adaptive quadrature."""
    _check_order(j)
    _check_p(p)
    val, _ = integrate.quad(lambda x: x**j * kernel(x), -p, 1.0, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200)
    return float(val)


def _validate_kernel(kernel: Kernel, tol: float) -> None:
    mass, _ = integrate.quad(kernel, -1.0, 1.0, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200)
    if abs(mass - 1.0) > tol:
        raise ConfigError(f"kernel {kernel.name!r} integrates to {mass!r}, not 1")
    xs = np.linspace(0.0, 1.0, 201)
    if not np.allclose(kernel(xs), kernel(-xs), rtol=0.0, atol=1e-12):
        raise ConfigError(f"kernel {kernel.name!r} is not symmetric")
    if np.any(kernel(np.array([-1.5, 1.0 + 1e-9, 2.0])) != 0.0):
        raise ConfigError(f"kernel {kernel.name!r} is not supported on [-1, 1]")
    # the left-boundary denominator is smallest at p = 0
    a = [kernel_moment_a(kernel, j, 0.0) for j in range(3)]
    if abs(a[0] * a[2] - a[1] ** 2) < _DENOM_TOL:
        raise DegenerateKernelError(f"kernel {kernel.name!r} has a degenerate boundary correction at p=0")


def register_kernel(name: str, func: Callable, lipschitz_bound: float = float("nan"), tol: float = 1e-8) -> Kernel:
    """Register a custom kernel after checking mass, symmetry and support."""
    kernel = Kernel(name, func, lipschitz_bound)
    _validate_kernel(kernel, tol)
    _REGISTRY[name] = kernel
    for key in [key for key in _TABLES if key[0] == name]:
        del _TABLES[key]
    return kernel


def get_kernel(name: str) -> Kernel:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown kernel {name!r}; registered: {sorted(_REGISTRY)}") from None


_TABLES: dict[tuple[str, int], tuple[CubicSpline, CubicSpline]] = {}


def _moment_table(kernel: Kernel, size: int = 1025):
    # memoized spline tables of (a0, a1, a2) and (b0, b1, b2) over p in [0, 1]
    key = (kernel.name, size)
    if key not in _TABLES:
        ps = np.linspace(0.0, 1.0, size)
        a = np.array([[kernel_moment_a(kernel, j, p) for j in range(3)] for p in ps])
        b = np.array([[kernel_moment_b(kernel, j, p) for j in range(3)] for p in ps])
        _TABLES[key] = (CubicSpline(ps, a, axis=0), CubicSpline(ps, b, axis=0))
    return _TABLES[key]


class BoundaryKernel:
    """Boundary-corrected version of ``base`` for bandwidth ``h``.

    With ``exact=True`` every moment is computed by quadrature on demand;
    otherwise moments come from a cubic-spline table over p (error well
    below 1e-12 for smooth kernels).
    """

    def __init__(self, base: Kernel | str = BIWEIGHT, h: float = 0.2, exact: bool = False):
        if isinstance(base, str):
            base = get_kernel(base)
        if not 0.0 < h < 0.5:
            raise ConfigError(f"bandwidth h must lie in (0, 1/2), got {h!r}")
        self.base = base
        self.h = float(h)
        self.exact = exact
        if not exact:
            self._a_spline, self._b_spline = _moment_table(base)

    def __repr__(self):
        return f"BoundaryKernel(base={self.base.name!r}, h={self.h}, exact={self.exact})"

    def moments(self, p, side: str) -> np.ndarray:
        """Moments ``(m0, m1, m2)`` at each p; ``side`` is ``'a'`` or ``'b'``."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if self.exact:
            fn = kernel_moment_a if side == "a" else kernel_moment_b
            return np.array([[fn(self.base, j, float(pi)) for j in range(3)] for pi in p])
        spline = self._a_spline if side == "a" else self._b_spline
        return spline(p)

    def coefficients(self, s):
        """Return ``(alpha, beta)`` with ``K_b(x, s) = (alpha - beta x) K(x)``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any((s < 0.0) | (s > 1.0)):
            raise ConfigError("s must lie in [0, 1]")
        h = self.h
        alpha = np.ones_like(s)
        beta = np.zeros_like(s)
        for side, mask, p in (
            ("a", s <= h, s / h),
            ("b", s >= 1.0 - h, (1.0 - s) / h),
        ):
            if not mask.any():
                continue
            m = self.moments(np.minimum(p[mask], 1.0), side)
            denom = m[:, 0] * m[:, 2] - m[:, 1] ** 2
            if np.any(np.abs(denom) < _DENOM_TOL):
                raise DegenerateKernelError("boundary-correction denominator below 1e-14")
            alpha[mask] = m[:, 2] / denom
            beta[mask] = m[:, 1] / denom
        return alpha, beta

    def __call__(self, x, s):
        x = np.asarray(x, dtype=float)
        alpha, beta = self.coefficients(s)
        if np.ndim(s) == 0:
            alpha, beta = alpha[0], beta[0]
        out = (alpha - beta * x) * self.base(x)
        return out if np.ndim(out) else float(out)


def boundary_eval(bk: BoundaryKernel, x, s):
    """Evaluate ``K_b(x, s)``; ``x`` and ``s`` broadcast against each other."""
    return bk(x, s)
