"""Conjugated plate-operator symbols: quadratic factors, roots, classification.

The fourth-order symbol with spectral parameter sigma factors into two
quadratic polynomials in the normal frequency xi_d,

    q_j(xi_d) = (xi_d + i tau dphi_n)^2 + r(x, xi' + i tau dphi_t) + (-1)^j sigma^2,

j = 1, 2, where r is the tangential metric form and (dphi_t, dphi_n) is the
gradient of the exponential weight.  Everything in this module is a pure
function of its arguments; there is no shared state.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "MetricField",
    "TangentialPoint",
    "WeightJet",
    "RootPair",
    "RootCase",
    "RootConfiguration",
    "branch_sqrt",
    "re_sqrt_indicator",
    "factor_radicand",
    "factor_symbol_eval",
    "factor_roots",
    "quartic_roots",
    "classify_roots",
    "im_sign_criterion",
]

# Relative threshold separating "on the real axis" from "strictly off" in
# root classification.  Scaled by the tangential frequency magnitude.
DEFAULT_CLASSIFY_TOL = 1e-9

# Near-coincident upper roots make the two-root determinant test ill
# conditioned even when the condition itself holds; configurations closer
# than this (relative) separation are flagged marginal.
DEFAULT_SEPARATION_BAND = 1e-5


class MetricField:
    """Tangential quadratic form r(x, xi') = sum_ij g^ij(x) xi'_i xi'_j.

    ``g^ij`` must be symmetric positive definite at every point of interest.
    Complex tangential arguments are admitted: the form is evaluated
    bilinearly, which is exactly the expansion
    r(a) - r(b) + 2i r~(a, b) for xi' = a + i b.
    """

    def __init__(self, tdim: int,
                 ginv: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                 dginv: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        self.tdim = int(tdim)
        self._ginv = ginv
        self._dginv = dginv

    @classmethod
    def euclidean(cls, tdim: int) -> "MetricField":
        return cls(tdim)

    @classmethod
    def diagonal(cls, tdim: int,
                 coeffs: Sequence[Callable[[np.ndarray], float]],
                 dcoeffs: Optional[Sequence[Callable[[np.ndarray], np.ndarray]]] = None
                 ) -> "MetricField":
        """Diagonal metric with coefficient functions g^ii(x) > 0.

        ``dcoeffs[i](x)`` must return the spatial gradient of g^ii, one entry
        per coordinate of x; required only for Poisson-bracket evaluation.
        """
        if len(coeffs) != tdim:
            raise ValueError("need one coefficient function per tangential axis")

        def ginv(x):
            return np.diag([float(c(x)) for c in coeffs])

        dg = None
        if dcoeffs is not None:
            def dg(x):
                d = len(np.atleast_1d(x))
                out = np.zeros((d, tdim, tdim))
                for i, dc in enumerate(dcoeffs):
                    out[:, i, i] = np.asarray(dc(x), dtype=float)
                return out

        return cls(tdim, ginv, dg)

    def gmatrix(self, x) -> np.ndarray:
        if self._ginv is None:
            return np.eye(self.tdim)
        g = np.asarray(self._ginv(np.asarray(x, dtype=float)))
        if g.shape != (self.tdim, self.tdim):
            raise ValueError(f"metric returned shape {g.shape}, expected {(self.tdim, self.tdim)}")
        return g

    def dgmatrix(self, x) -> np.ndarray:
        """d/dx_k of g^ij, shape (len(x), tdim, tdim).  Zero for constant metrics."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self._dginv is None:
            return np.zeros((x.size, self.tdim, self.tdim))
        return np.asarray(self._dginv(x), dtype=float)

    def bilinear(self, x, a, b):
        """Symmetric bilinear form r~(x, a, b); complex arguments allowed."""
        if self.tdim == 0:
            return 0.0
        a = np.asarray(a)
        b = np.asarray(b)
        g = self.gmatrix(x)
        return (a @ g @ b)

    def r(self, x, xi):
        """Quadratic form r(x, xi); bilinear extension for complex xi."""
        return self.bilinear(x, xi, xi)

    def tangential_norm(self, x, xi) -> float:
        """|xi'|_x for a real tangential covector."""
        if self.tdim == 0:
            return 0.0
        val = self.bilinear(x, xi, xi)
        return math.sqrt(float(np.real(val)))

    def grad_xi(self, x, xi) -> np.ndarray:
        """d/dxi of r(x, xi) = 2 g(x) xi."""
        if self.tdim == 0:
            return np.zeros(0)
        return 2.0 * (self.gmatrix(x) @ np.asarray(xi))

    def grad_x_bilinear(self, x, a, b) -> np.ndarray:
        """Spatial gradient of r~(x, a, b) at frozen covectors a, b."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.tdim == 0:
            return np.zeros(x.size)
        dg = self.dgmatrix(x)
        a = np.asarray(a)
        b = np.asarray(b)
        return np.array([a @ dg[k] @ b for k in range(x.size)])

    def check_ellipticity(self, points, c_floor: float = 1e-12) -> float:
        """Smallest eigenvalue of g(x) over the sample; raises unless it
        stays above c_floor (r(x, xi') >= c |xi'|^2)."""
        worst = math.inf
        for x in points:
            ev = float(np.linalg.eigvalsh(self.gmatrix(x))[0])
            worst = min(worst, ev)
        if worst < c_floor:
            raise ValueError(f"metric loses ellipticity: min eigenvalue {worst:.3e}")
        return worst


@dataclass(frozen=True)
class TangentialPoint:
    """Cotangent boundary point (x, xi', tau, sigma).

    tau is the conjugation large parameter, sigma the spectral parameter;
    both are nonnegative.  The joint scale lambda_T = sqrt(tau^2 + |xi'|^2)
    normalizes all relative tolerances.
    """

    x: np.ndarray
    xi_prime: np.ndarray
    tau: float
    sigma: float

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        object.__setattr__(self, "xi_prime",
                           np.asarray(self.xi_prime, dtype=float).reshape(-1))
        if self.tau < 0 or self.sigma < 0:
            raise ValueError("tau and sigma must be nonnegative")

    @property
    def lambda_T(self) -> float:
        return math.sqrt(self.tau ** 2 + float(self.xi_prime @ self.xi_prime))

    @property
    def lambda_T_sigma(self) -> float:
        """Scale augmented by the spectral parameter."""
        return math.sqrt(self.tau ** 2 + float(self.xi_prime @ self.xi_prime)
                         + self.sigma ** 2)

    def metric_scale(self, metric: Optional[MetricField] = None) -> float:
        """sqrt(tau^2 + r(x, xi') + sigma^2); equivalent to lambda_T_sigma."""
        if metric is None:
            return self.lambda_T_sigma
        return math.sqrt(self.tau ** 2 + float(np.real(metric.r(self.x, self.xi_prime)))
                         + self.sigma ** 2)

    def require_nondegenerate(self):
        if self.lambda_T_sigma == 0.0:
            raise ValueError("(xi', tau, sigma) = 0: point is degenerate")

    def scaled(self, t: float) -> "TangentialPoint":
        return TangentialPoint(self.x, t * self.xi_prime, t * self.tau, t * self.sigma)


@dataclass(frozen=True)
class WeightJet:
    """First-order data of the weight at a point: value, gradient split into
    tangential and normal parts, and optionally the full spatial Hessian."""

    phi: float
    d_tangential: np.ndarray
    d_normal: float
    hessian: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "d_tangential",
                           np.asarray(self.d_tangential, dtype=float).reshape(-1))

    def require_inward(self):
        if self.d_normal <= 0:
            raise ValueError("normal derivative of the weight must be positive")


@dataclass(frozen=True)
class RootPair:
    """Roots of one quadratic factor: pi_1 = -i tau dphi_n - i alpha,
    pi_2 = -i tau dphi_n + i alpha, with Re(alpha) >= 0."""

    alpha: complex
    pi_1: complex
    pi_2: complex
    factor_index: int
    radicand: complex = 0.0


class RootCase(enum.Enum):
    NO_UPPER = "NoUpperRoot"
    ONE_UPPER = "OneUpperRoot"
    TWO_UPPER = "TwoDistinctUpperRoots"
    DOUBLE_UPPER = "DoubleUpperRoot"


@dataclass(frozen=True)
class RootConfiguration:
    case: RootCase
    upper_roots: tuple
    lower_roots: tuple
    marginal: bool
    separation: float
    tolerance: float
    pairs: tuple = ()


def branch_sqrt(m: complex) -> complex:
    """Square root with Re >= 0; ties on the imaginary axis resolved to
    Im >= 0 so that negative real radicands map deterministically."""
    z = cmath.sqrt(m)
    if z.real < 0 or (z.real == 0 and z.imag < 0):
        z = -z
    return z


def re_sqrt_indicator(m: complex, x0: float) -> float:
    """Sign of |Re sqrt(m)| - |x0|: returns 4 x0^2 Re m - 4 x0^4 + (Im m)^2,
    negative/zero/positive exactly when |Re z| </=/> |x0| for z^2 = m."""
    return 4.0 * x0 ** 2 * m.real - 4.0 * x0 ** 4 + m.imag ** 2


def factor_radicand(p: TangentialPoint, w: WeightJet, j: int,
                    metric: Optional[MetricField] = None) -> complex:
    """r(x, xi' + i tau dphi_t) + (-1)^j sigma^2, via bilinear expansion."""
    if j not in (1, 2):
        raise ValueError("factor index must be 1 or 2")
    metric = metric or MetricField.euclidean(p.xi_prime.size)
    arg = p.xi_prime + 1j * p.tau * w.d_tangential
    return complex(metric.r(p.x, arg)) + (-1) ** j * p.sigma ** 2


def factor_symbol_eval(p: TangentialPoint, w: WeightJet, j: int, xi_d: complex,
                       metric: Optional[MetricField] = None) -> complex:
    """Value of the quadratic factor q_j at a (possibly complex) xi_d."""
    return (complex(xi_d) + 1j * p.tau * w.d_normal) ** 2 \
        + factor_radicand(p, w, j, metric)


def factor_roots(p: TangentialPoint, w: WeightJet, j: int,
                 metric: Optional[MetricField] = None) -> RootPair:
    """Both roots of q_j.  pi_1 always lies in the closed lower half-plane;
    the sign of Im pi_2 depends on the balance between tau dphi_n and the
    radicand (see im_sign_criterion)."""
    rad = factor_radicand(p, w, j, metric)
    alpha = branch_sqrt(rad)
    shift = -1j * p.tau * w.d_normal
    return RootPair(alpha=alpha,
                    pi_1=shift - 1j * alpha,
                    pi_2=shift + 1j * alpha,
                    factor_index=j,
                    radicand=rad)


def quartic_roots(p: TangentialPoint, w: WeightJet,
                  metric: Optional[MetricField] = None) -> tuple:
    """All four roots of the conjugated fourth-order symbol, with
    multiplicity, as the union of the two factor root pairs."""
    r1 = factor_roots(p, w, 1, metric)
    r2 = factor_roots(p, w, 2, metric)
    return (r1.pi_1, r1.pi_2, r2.pi_1, r2.pi_2)


def classify_roots(p: TangentialPoint, w: WeightJet,
                   tol: float = DEFAULT_CLASSIFY_TOL,
                   metric: Optional[MetricField] = None,
                   separation_band: float = DEFAULT_SEPARATION_BAND
                   ) -> RootConfiguration:
    """Count the factor roots pi_{j,2} lying in the closed upper half-plane.

    Roots with Im >= -tol*lambda are counted as upper.  Configurations within
    tol*lambda of the real axis, or with two upper roots separated by less
    than separation_band*lambda while sigma > tol*lambda, are flagged
    marginal: the case dispatch is not numerically trustworthy there.
    """
    w.require_inward()
    p.require_nondegenerate()
    scale = max(p.lambda_T_sigma, 1e-300)

    pairs = (factor_roots(p, w, 1, metric), factor_roots(p, w, 2, metric))
    upper = []
    lower = []
    marginal = False
    for rp in pairs:
        im_rel = rp.pi_2.imag / scale
        if im_rel >= -tol:
            upper.append(rp.pi_2)
        else:
            lower.append(rp.pi_2)
        if abs(im_rel) <= tol:
            marginal = True
        # pi_1 is lower by construction; if it crosses the axis (tau ~ 0
        # with a negative real radicand) the two-root picture degenerates.
        if rp.pi_1.imag / scale >= -tol and p.tau > 0:
            marginal = True
        lower.append(rp.pi_1)

    separation = abs(pairs[0].pi_2 - pairs[1].pi_2) / scale

    if len(upper) == 0:
        case = RootCase.NO_UPPER
    elif len(upper) == 1:
        case = RootCase.ONE_UPPER
    elif separation <= tol and p.sigma <= tol * scale:
        case = RootCase.DOUBLE_UPPER
        upper = [upper[0]]
    else:
        case = RootCase.TWO_UPPER
        if separation <= separation_band:
            marginal = True

    return RootConfiguration(case=case,
                             upper_roots=tuple(upper),
                             lower_roots=tuple(lower),
                             marginal=marginal,
                             separation=separation,
                             tolerance=tol,
                             pairs=pairs)


def im_sign_criterion(p: TangentialPoint, w: WeightJet, j: int,
                      metric: Optional[MetricField] = None) -> bool:
    """Algebraic test for Im pi_{j,2} < 0, without computing roots:

        (dphi_n)^2 r(x,xi') + r~(x,xi',dphi_t)^2
            < tau^2 (dphi_n)^2 |dphi|_x^2 + (-1)^(j+1) sigma^2 (dphi_n)^2,

    where |dphi|_x^2 = r(x, dphi_t) + dphi_n^2.  Equivalent to the direct
    sign test whenever tau > 0.
    """
    w.require_inward()
    metric = metric or MetricField.euclidean(p.xi_prime.size)
    dn = w.d_normal
    r_xi = float(np.real(metric.r(p.x, p.xi_prime)))
    r_mix = float(np.real(metric.bilinear(p.x, p.xi_prime, w.d_tangential)))
    grad_sq = float(np.real(metric.r(p.x, w.d_tangential))) + dn ** 2
    lhs = dn ** 2 * r_xi + r_mix ** 2
    rhs = p.tau ** 2 * dn ** 2 * grad_sq + (-1) ** (j + 1) * p.sigma ** 2 * dn ** 2
    return lhs < rhs
