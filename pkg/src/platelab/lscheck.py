"""Lopatinskii-Shapiro checks for the bi-Laplacian with two boundary operators.

Boundary operators are polynomials of degree <= 3 in the normal frequency
xi_d whose coefficients are tangential symbols built from the metric form
r(x, xi') and an optional parameter symbol a'(x, xi').  The unconjugated
condition reduces to a 2x2 determinant at xi_d = i|xi'|_x; after
conjugation by an exponential weight the test dispatches on the root
configuration of the conjugated quartic.  An independent rank oracle and a
positivity margin provide two more routes to the same verdict.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .symbols import (
    DEFAULT_CLASSIFY_TOL,
    DEFAULT_SEPARATION_BAND,
    MetricField,
    RootCase,
    TangentialPoint,
    WeightJet,
    classify_roots,
)

__all__ = [
    "TangentialTerm",
    "ParameterSymbol",
    "BoundaryOperatorSymbol",
    "LSReport",
    "catalog_names",
    "catalog_bc",
    "load_bc_file",
    "save_bc_file",
    "ls_unconjugated",
    "ls_conjugated",
    "ls_rank_oracle",
    "positivity_margin",
    "perturbation_margin",
    "conjugation_thresholds",
]

DEFAULT_MARGIN_TOL = 1e-8


@dataclass(frozen=True)
class TangentialTerm:
    """One entry of a tangential coefficient table: coef * r^r_power * a'^a_power."""
    coef: complex
    r_power: int = 0
    a_power: int = 0


class ParameterSymbol:
    """Homogeneous tangential symbol a'(x, xi') of a declared degree.

    The default scalar form is c * xi'_1 * r(x,xi')^((deg-1)/2) for odd
    degrees and c * r(x,xi')^(deg/2) for even ones: polynomial in xi', hence
    well defined for the complex arguments produced by conjugation.
    A custom callable may be supplied; it must accept complex xi'.
    """

    def __init__(self, degree: int, scale: float = 1.0,
                 func: Optional[Callable] = None):
        self.degree = int(degree)
        self.scale = float(scale)
        self.func = func

    def __call__(self, x, xi, metric: MetricField):
        if self.func is not None:
            return self.func(x, xi, metric)
        xi = np.asarray(xi)
        if self.degree == 0:
            return self.scale
        if self.degree % 2 == 0:
            return self.scale * complex(metric.r(x, xi)) ** (self.degree // 2)
        lead = complex(xi[0])
        return self.scale * lead * complex(metric.r(x, xi)) ** ((self.degree - 1) // 2)

    def to_dict(self):
        if self.func is not None:
            raise ValueError("custom parameter symbols are not serializable")
        return {"degree": self.degree, "scale": self.scale}


class BoundaryOperatorSymbol:
    """Principal symbol of a boundary operator, polynomial in xi_d.

    ``terms[m]`` lists the tangential table entries multiplying xi_d^m.
    Homogeneity of total degree ``order`` is enforced by construction:
    m + 2*r_power + aprime.degree*a_power == order for every entry.
    """

    def __init__(self, name: str, order: int,
                 terms: dict,
                 aprime: Optional[ParameterSymbol] = None):
        self.name = name
        self.order = int(order)
        self.terms = {int(m): tuple(v) for m, v in terms.items() if v}
        self.aprime = aprime
        if self.order < 0 or self.order > 3:
            raise ValueError("normal order must lie in 0..3")
        for m, entries in self.terms.items():
            if m < 0 or m > min(3, self.order):
                raise ValueError(f"normal power {m} out of range for order {self.order}")
            for t in entries:
                deg = m + 2 * t.r_power
                if t.a_power:
                    if self.aprime is None:
                        raise ValueError("term references a' but no parameter symbol given")
                    deg += self.aprime.degree * t.a_power
                if deg != self.order:
                    raise ValueError(
                        f"term {t} at normal power {m} breaks homogeneity "
                        f"(degree {deg} != order {self.order})")

    def coeff_vector(self, x, xi, metric: Optional[MetricField] = None) -> np.ndarray:
        """Coefficients (c_0, ..., c_3) of the polynomial in xi_d at frozen
        (x, xi'); xi' may be complex."""
        metric = metric or MetricField.euclidean(np.asarray(xi).size)
        out = np.zeros(4, dtype=complex)
        for m, entries in self.terms.items():
            acc = 0.0 + 0.0j
            for t in entries:
                val = complex(t.coef)
                if t.r_power:
                    val *= complex(metric.r(x, xi)) ** t.r_power
                if t.a_power:
                    val *= complex(self.aprime(x, xi, metric)) ** t.a_power
                acc += val
            out[m] = acc
        return out

    def eval(self, x, xi, xi_d: complex, metric: Optional[MetricField] = None) -> complex:
        c = self.coeff_vector(x, xi, metric)
        z = complex(xi_d)
        return c[0] + z * (c[1] + z * (c[2] + z * c[3]))

    def eval_dz(self, x, xi, xi_d: complex, metric: Optional[MetricField] = None) -> complex:
        c = self.coeff_vector(x, xi, metric)
        z = complex(xi_d)
        return c[1] + z * (2.0 * c[2] + z * 3.0 * c[3])

    def conjugated_coeff_vector(self, p: TangentialPoint, w: WeightJet,
                                metric: Optional[MetricField] = None) -> np.ndarray:
        """Coefficients of b(x, xi' + i tau dphi_t, xi_d + i tau dphi_n) in
        powers of xi_d (binomial shift of the frozen-coefficient polynomial)."""
        arg = p.xi_prime + 1j * p.tau * w.d_tangential
        c = self.coeff_vector(p.x, arg, metric)
        s = 1j * p.tau * w.d_normal
        out = np.zeros(4, dtype=complex)
        for m in range(4):
            if c[m] == 0:
                continue
            for ell in range(m + 1):
                out[ell] += c[m] * math.comb(m, ell) * s ** (m - ell)
        return out

    def conjugated_eval(self, p: TangentialPoint, w: WeightJet, xi_d: complex,
                        metric: Optional[MetricField] = None) -> complex:
        """b(x, xi' + i tau dphi_t, xi_d + i tau dphi_n)."""
        return self.eval(p.x, p.xi_prime + 1j * p.tau * w.d_tangential,
                         complex(xi_d) + 1j * p.tau * w.d_normal, metric)

    def conjugated_eval_dz(self, p: TangentialPoint, w: WeightJet, xi_d: complex,
                           metric: Optional[MetricField] = None) -> complex:
        return self.eval_dz(p.x, p.xi_prime + 1j * p.tau * w.d_tangential,
                            complex(xi_d) + 1j * p.tau * w.d_normal, metric)

    def check_homogeneity(self, metric: Optional[MetricField] = None,
                          nsamples: int = 12, seed: int = 0,
                          rtol: float = 1e-10, tdim: int = 1) -> float:
        """Sampled verification of b(x, t xi', t xi_d) = t^k b(x, xi', xi_d)."""
        rng = np.random.default_rng(seed)
        metric = metric or MetricField.euclidean(tdim)
        worst = 0.0
        for _ in range(nsamples):
            x = rng.normal(size=tdim + 1)
            xi = rng.normal(size=tdim)
            zd = complex(rng.normal(), rng.normal())
            t = float(rng.uniform(0.3, 3.0))
            v1 = self.eval(x, t * xi, t * zd, metric)
            v0 = self.eval(x, xi, zd, metric)
            ref = max(abs(v0) * t ** self.order, 1e-300)
            worst = max(worst, abs(v1 - t ** self.order * v0) / ref)
        if worst > rtol:
            raise ValueError(f"{self.name}: homogeneity violated (rel err {worst:.2e})")
        return worst


_CATALOG = {}


def catalog_names(include_fixtures: bool = False):
    names = [n for n in _CATALOG if n != "degenerate_equal" or include_fixtures]
    return sorted(names)


def _register(name):
    def deco(fn):
        _CATALOG[name] = fn
        return fn
    return deco


def _admissibility_check(name: str, fn: Callable[[np.ndarray, np.ndarray], float],
                         metric: MetricField, tdim: int, nsamples: int = 64):
    """Sampled strict-inequality check on the unit sphere |omega'|_g = 1."""
    rng = np.random.default_rng(12345)
    for _ in range(nsamples):
        x = rng.normal(size=tdim + 1)
        omega = rng.normal(size=tdim)
        nrm = metric.tangential_norm(x, omega)
        if nrm == 0:
            continue
        omega = omega / nrm
        if not fn(x, omega):
            raise ValueError(f"{name}: parameter symbol violates the admissibility "
                             f"constraint on the unit sphere (at omega'={omega})")


@_register("hinged")
def _bc_hinged(params, metric, tdim):
    b1 = BoundaryOperatorSymbol("hinged_b1", 0, {0: [TangentialTerm(1.0)]})
    b2 = BoundaryOperatorSymbol("hinged_b2", 2, {2: [TangentialTerm(-1.0)]})
    return b1, b2


@_register("clamped")
def _bc_clamped(params, metric, tdim):
    b1 = BoundaryOperatorSymbol("clamped_b1", 0, {0: [TangentialTerm(1.0)]})
    b2 = BoundaryOperatorSymbol("clamped_b2", 1, {1: [TangentialTerm(-1.0j)]})
    return b1, b2


@_register("neumann_pair")
def _bc_neumann(params, metric, tdim):
    b1 = BoundaryOperatorSymbol("neumann_b1", 1, {1: [TangentialTerm(-1.0j)]})
    b2 = BoundaryOperatorSymbol("neumann_b2", 3, {
        3: [TangentialTerm(1.0j)],
        1: [TangentialTerm(1.0j, r_power=1)],
    })
    return b1, b2


@_register("ex2_dn2_dn3")
def _bc_ex2(params, metric, tdim):
    b1 = BoundaryOperatorSymbol("ex2_b1", 2, {
        2: [TangentialTerm(-1.0)],
        0: [TangentialTerm(-2.0, r_power=1)],
    })
    b2 = BoundaryOperatorSymbol("ex2_b2", 3, {3: [TangentialTerm(1.0j)]})
    return b1, b2


@_register("ex3_dn_dn3_A")
def _bc_ex3(params, metric, tdim):
    ap = _param_symbol(params, degree=3, default_scale=-1.0)
    b1 = BoundaryOperatorSymbol("ex3_b1", 1, {1: [TangentialTerm(-1.0j)]})
    b2 = BoundaryOperatorSymbol("ex3_b2", 3, {
        3: [TangentialTerm(1.0j)],
        0: [TangentialTerm(1.0, a_power=1)],
    }, aprime=ap)
    _admissibility_check("ex3_dn_dn3_A",
                         lambda x, om: abs(complex(ap(x, om, metric)) - 2.0) > 1e-12,
                         metric, tdim)
    return b1, b2


@_register("ex4_id_dn2_A")
def _bc_ex4(params, metric, tdim):
    ap = _param_symbol(params, degree=1, default_scale=1.0)
    b1 = BoundaryOperatorSymbol("ex4_b1", 0, {0: [TangentialTerm(1.0)]})
    b2 = BoundaryOperatorSymbol("ex4_b2", 2, {
        2: [TangentialTerm(-1.0)],
        1: [TangentialTerm(-1.0j, a_power=1)],
    }, aprime=ap)
    _admissibility_check("ex4_id_dn2_A",
                         lambda x, om: abs(complex(ap(x, om, metric)) + 2.0) > 1e-12,
                         metric, tdim)
    return b1, b2


@_register("ex5_dn2A_dn3")
def _bc_ex5(params, metric, tdim):
    ap = _param_symbol(params, degree=1, default_scale=1.0)
    b1 = BoundaryOperatorSymbol("ex5_b1", 2, {
        2: [TangentialTerm(-1.0)],
        1: [TangentialTerm(-1.0j, a_power=1)],
    }, aprime=ap)
    b2 = BoundaryOperatorSymbol("ex5_b2", 3, {
        3: [TangentialTerm(1.0j)],
        1: [TangentialTerm(2.0j, r_power=1)],
    })
    _admissibility_check("ex5_dn2A_dn3",
                         lambda x, om: abs(2.0 * complex(ap(x, om, metric)) + 3.0) > 1e-12,
                         metric, tdim)
    return b1, b2


@_register("degenerate_equal")
def _bc_degenerate(params, metric, tdim):
    # Negative-control fixture: proportional rows can never be complete.
    b = BoundaryOperatorSymbol("degenerate_b", 1, {1: [TangentialTerm(-1.0j)]})
    return b, b


def _param_symbol(params, degree, default_scale) -> ParameterSymbol:
    params = params or {}
    if "aprime" in params:
        ap = params["aprime"]
        if not isinstance(ap, ParameterSymbol):
            raise ValueError("aprime parameter must be a ParameterSymbol")
        if ap.degree != degree:
            raise ValueError(f"parameter symbol degree {ap.degree} != required {degree}")
        return ap
    return ParameterSymbol(degree, scale=float(params.get("a", default_scale)))


def catalog_bc(name: str, params: Optional[dict] = None,
               metric: Optional[MetricField] = None, tdim: int = 1):
    """Boundary-operator pair from the built-in catalog.

    Families requiring a parameter symbol accept params={"a": scalar} or
    params={"aprime": ParameterSymbol}.  Construction rejects parameters
    that violate the family's strict admissibility inequality on the unit
    sphere (sampled check).
    """
    if name not in _CATALOG:
        raise KeyError(f"unknown boundary pair '{name}'; catalog: {catalog_names(True)}")
    metric = metric or MetricField.euclidean(tdim)
    return _CATALOG[name](params, metric, tdim)


# ---------------------------------------------------------------------------
# declarative file format: one pair per file
#
#   name <identifier>
#   aprime <degree> <scale>          (optional)
#   b1 order <k>
#   b1 term <m> <coef_re> <coef_im> <r_power> <a_power>
#   b2 ...
# ---------------------------------------------------------------------------

def load_bc_file(path) -> tuple:
    name = None
    aprime = None
    orders = {}
    terms = {"b1": {}, "b2": {}}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            try:
                if tok[0] == "name":
                    name = tok[1]
                elif tok[0] == "aprime":
                    aprime = ParameterSymbol(int(tok[1]), float(tok[2]))
                elif tok[0] in ("b1", "b2") and tok[1] == "order":
                    orders[tok[0]] = int(tok[2])
                elif tok[0] in ("b1", "b2") and tok[1] == "term":
                    m = int(tok[2])
                    t = TangentialTerm(complex(float(tok[3]), float(tok[4])),
                                       int(tok[5]), int(tok[6]))
                    terms[tok[0]].setdefault(m, []).append(t)
                else:
                    raise ValueError("unrecognized directive")
            except (IndexError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: cannot parse {raw!r} ({exc})") from exc
    if name is None or "b1" not in orders or "b2" not in orders:
        raise ValueError(f"{path}: file must declare a name and both operator orders")
    b1 = BoundaryOperatorSymbol(f"{name}_b1", orders["b1"], terms["b1"], aprime=aprime)
    b2 = BoundaryOperatorSymbol(f"{name}_b2", orders["b2"], terms["b2"], aprime=aprime)
    return b1, b2


def save_bc_file(path, name: str, b1: BoundaryOperatorSymbol,
                 b2: BoundaryOperatorSymbol):
    lines = [f"name {name}"]
    ap = b1.aprime or b2.aprime
    if ap is not None:
        d = ap.to_dict()
        lines.append(f"aprime {d['degree']} {d['scale']:.17g}")
    for label, b in (("b1", b1), ("b2", b2)):
        lines.append(f"{label} order {b.order}")
        for m in sorted(b.terms):
            for t in b.terms[m]:
                c = complex(t.coef)
                lines.append(f"{label} term {m} {c.real:.17g} {c.imag:.17g} "
                             f"{t.r_power} {t.a_power}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# reports and verdicts
# ---------------------------------------------------------------------------

@dataclass
class LSReport:
    verdict: Optional[bool]
    case: Optional[RootCase]
    determinant: Optional[complex]
    margin: float
    marginal: bool
    scale: float = 1.0

    def to_dict(self):
        det = None
        if self.determinant is not None:
            det = {"re": self.determinant.real, "im": self.determinant.imag}
        return {
            "verdict": self.verdict,
            "case": self.case.value if self.case is not None else None,
            "determinant": det,
            "margin": self.margin,
            "marginal": self.marginal,
            "scale": self.scale,
        }


def ls_unconjugated(b1: BoundaryOperatorSymbol, b2: BoundaryOperatorSymbol,
                    x, omega_prime, metric: Optional[MetricField] = None,
                    tol: float = DEFAULT_MARGIN_TOL) -> LSReport:
    """2x2 determinant test at xi_d = i|omega'|_x.

    The verdict compares |det| against tol times the homogeneity power
    |omega'|^(k1+k2-1); posed only for omega' != 0.
    """
    omega_prime = np.asarray(omega_prime, dtype=float).reshape(-1)
    metric = metric or MetricField.euclidean(omega_prime.size)
    nrm = metric.tangential_norm(x, omega_prime)
    if nrm == 0.0:
        raise ValueError("undefined: the unconjugated condition is posed only "
                         "for omega' != 0")
    zd = 1j * nrm
    m11 = b1.eval(x, omega_prime, zd, metric)
    m12 = b2.eval(x, omega_prime, zd, metric)
    m21 = b1.eval_dz(x, omega_prime, zd, metric)
    m22 = b2.eval_dz(x, omega_prime, zd, metric)
    det = m11 * m22 - m12 * m21
    power = b1.order + b2.order - 1
    margin = abs(det) / nrm ** power
    return LSReport(verdict=bool(margin > tol), case=RootCase.DOUBLE_UPPER,
                    determinant=det, margin=margin, marginal=False, scale=nrm)


def ls_conjugated(b1: BoundaryOperatorSymbol, b2: BoundaryOperatorSymbol,
                  w: WeightJet, p: TangentialPoint,
                  metric: Optional[MetricField] = None,
                  tol: float = DEFAULT_MARGIN_TOL,
                  classify_tol: float = DEFAULT_CLASSIFY_TOL,
                  separation_band: float = DEFAULT_SEPARATION_BAND) -> LSReport:
    """Conjugated condition at (x, xi', tau, sigma), dispatching on the root
    configuration.

    No upper root: holds trivially.  One upper root rho: holds iff the
    vector (b1, b2)(rho) does not vanish; the 2x2 derivative determinant is
    recorded as auxiliary data.  Two distinct upper roots: the 2x2 value
    determinant at the pair.  Double upper root: the value/derivative
    determinant, which coincides with the unconjugated test at tau = 0.
    A marginal root classification withholds the verdict.
    """
    p.require_nondegenerate()
    w.require_inward()
    metric = metric or MetricField.euclidean(p.xi_prime.size)
    conf = classify_roots(p, w, tol=classify_tol, metric=metric,
                          separation_band=separation_band)
    lam = p.metric_scale(metric)
    k1, k2 = b1.order, b2.order

    if conf.case is RootCase.NO_UPPER:
        return LSReport(verdict=None if conf.marginal else True, case=conf.case,
                        determinant=None, margin=math.inf,
                        marginal=conf.marginal, scale=lam)

    if conf.case is RootCase.ONE_UPPER:
        rho = conf.upper_roots[0]
        v1 = b1.conjugated_eval(p, w, rho, metric)
        v2 = b2.conjugated_eval(p, w, rho, metric)
        margin = math.sqrt(abs(v1) ** 2 / lam ** (2 * k1)
                           + abs(v2) ** 2 / lam ** (2 * k2))
        det = v1 * b2.conjugated_eval_dz(p, w, rho, metric) \
            - v2 * b1.conjugated_eval_dz(p, w, rho, metric)
    elif conf.case is RootCase.TWO_UPPER:
        r1, r2 = conf.upper_roots
        det = (b1.conjugated_eval(p, w, r1, metric)
               * b2.conjugated_eval(p, w, r2, metric)
               - b2.conjugated_eval(p, w, r1, metric)
               * b1.conjugated_eval(p, w, r2, metric))
        margin = abs(det) / lam ** (k1 + k2)
    else:  # DOUBLE_UPPER
        rho = conf.upper_roots[0]
        det = (b1.conjugated_eval(p, w, rho, metric)
               * b2.conjugated_eval_dz(p, w, rho, metric)
               - b2.conjugated_eval(p, w, rho, metric)
               * b1.conjugated_eval_dz(p, w, rho, metric))
        margin = abs(det) / lam ** (k1 + k2 - 1)

    verdict = None if conf.marginal else bool(margin > tol)
    return LSReport(verdict=verdict, case=conf.case, determinant=det,
                    margin=margin, marginal=conf.marginal, scale=lam)


def _stability_matrix(b1, b2, w, p, metric, classify_tol, separation_band):
    """Rows: xi_d-coefficient vectors of the conjugated boundary symbols and
    of kappa+ * xi_d^l, l = 0..3-m+, with kappa+ the monic factor carrying
    the upper roots.  Entries are weighted so that each becomes homogeneous
    of degree zero; a diagonal row/column scaling, so the rank is untouched.
    """
    conf = classify_roots(p, w, tol=classify_tol, metric=metric,
                          separation_band=separation_band)
    upper = list(conf.upper_roots)
    if conf.case is RootCase.DOUBLE_UPPER:
        upper = [upper[0], upper[0]]
    mplus = len(upper)

    # monic kappa+ built by convolving with (xi_d - rho) for each upper root
    kappa = np.zeros(4, dtype=complex)
    kappa[0] = 1.0
    deg = 0
    for rho in upper:
        nxt = np.zeros(4, dtype=complex)
        nxt[1:deg + 2] += kappa[:deg + 1]
        nxt[:deg + 1] -= rho * kappa[:deg + 1]
        kappa = nxt
        deg += 1

    rows = [b1.conjugated_coeff_vector(p, w, metric),
            b2.conjugated_coeff_vector(p, w, metric)]
    for ell in range(0, 4 - mplus):
        shifted = np.zeros(4, dtype=complex)
        shifted[ell:ell + mplus + 1] = kappa[:mplus + 1]
        rows.append(shifted)
    M = np.array(rows)

    lam = p.metric_scale(metric)
    row_w = [lam ** (3.5 - b1.order), lam ** (3.5 - b2.order)]
    for j in range(3, M.shape[0] + 1):
        row_w.append(lam ** (6.5 - mplus - j))
    col_w = np.array([lam ** (ell - 3.5) for ell in range(4)])
    Mw = (np.array(row_w)[:, None] * M) * col_w[None, :]
    return Mw, conf


def ls_rank_oracle(b1: BoundaryOperatorSymbol, b2: BoundaryOperatorSymbol,
                   w: WeightJet, p: TangentialPoint,
                   metric: Optional[MetricField] = None,
                   tol: float = DEFAULT_MARGIN_TOL,
                   classify_tol: float = DEFAULT_CLASSIFY_TOL,
                   separation_band: float = DEFAULT_SEPARATION_BAND) -> int:
    """Rank of the m' x 4 coefficient matrix of {b1, b2} joined with the
    xi_d-shifts of the upper-root factor; 4 exactly when the conjugated
    condition holds.  Independent of the determinant dispatch."""
    metric = metric or MetricField.euclidean(p.xi_prime.size)
    Mw, _ = _stability_matrix(b1, b2, w, p, metric, classify_tol, separation_band)
    s = np.linalg.svd(Mw, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def positivity_margin(b1: BoundaryOperatorSymbol, b2: BoundaryOperatorSymbol,
                      w: WeightJet, p: TangentialPoint,
                      metric: Optional[MetricField] = None,
                      classify_tol: float = DEFAULT_CLASSIFY_TOL,
                      separation_band: float = DEFAULT_SEPARATION_BAND) -> float:
    """Smallest eigenvalue of the weighted Gram matrix M*M: the constant in
    the boundary quadratic-form lower bound.  Positive exactly when the
    conjugated condition holds; invariant under (xi', tau, sigma) dilation
    thanks to the homogeneity weights."""
    metric = metric or MetricField.euclidean(p.xi_prime.size)
    Mw, _ = _stability_matrix(b1, b2, w, p, metric, classify_tol, separation_band)
    s = np.linalg.svd(Mw, compute_uv=False)
    return float(s[-1] ** 2)


def perturbation_margin(b1: BoundaryOperatorSymbol, b2: BoundaryOperatorSymbol,
                        x, xi_prime, metric: Optional[MetricField] = None,
                        sample_budget: int = 64, seed: int = 0,
                        eps_hi: float = 1.0, iters: int = 14,
                        tol: float = DEFAULT_MARGIN_TOL) -> float:
    """Largest eps (on a bisected grid) such that both perturbed determinant
    lower bounds hold with C1 = half the unperturbed margin, over sampled
    complex perturbations with |zeta'| + |delta| + |delta~| = eps |xi'|_x.

    Sample directions are drawn once from a fixed seed and rescaled, so the
    search is reproducible and monotone in eps.  Returns 0 with a warning
    when the unperturbed margin is already below tolerance.
    """
    xi_prime = np.asarray(xi_prime, dtype=float).reshape(-1)
    metric = metric or MetricField.euclidean(xi_prime.size)
    base = ls_unconjugated(b1, b2, x, xi_prime, metric)
    if base.margin <= tol:
        warnings.warn("unperturbed margin below tolerance; no perturbation radius")
        return 0.0
    c1 = 0.5 * base.margin
    nrm = base.scale
    power = b1.order + b2.order - 1

    rng = np.random.default_rng(seed)
    tdim = xi_prime.size
    dirs = []
    for _ in range(sample_budget):
        zeta = rng.normal(size=tdim) + 1j * rng.normal(size=tdim)
        delta = complex(rng.normal(), rng.normal())
        delta2 = complex(rng.normal(), rng.normal())
        total = np.linalg.norm(zeta) + abs(delta) + abs(delta2)
        dirs.append((zeta / total, delta / total, delta2 / total))

    def ok(eps: float) -> bool:
        for zeta, delta, delta2 in dirs:
            zp = xi_prime + eps * nrm * zeta
            zd = 1j * nrm + eps * nrm * delta
            zd2 = 1j * nrm + eps * nrm * delta2
            det1 = (b1.eval(x, zp, zd, metric) * b2.eval_dz(x, zp, zd, metric)
                    - b2.eval(x, zp, zd, metric) * b1.eval_dz(x, zp, zd, metric))
            if abs(det1) < c1 * nrm ** power:
                return False
            det2 = (b1.eval(x, zp, zd, metric) * b2.eval(x, zp, zd2, metric)
                    - b2.eval(x, zp, zd, metric) * b1.eval(x, zp, zd2, metric))
            if abs(det2) < c1 * abs(eps * nrm * (delta - delta2)) * nrm ** (power - 1):
                return False
        return True

    if ok(eps_hi):
        return eps_hi
    lo, hi = 0.0, eps_hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def conjugation_thresholds(b1: BoundaryOperatorSymbol, b2: BoundaryOperatorSymbol,
                           boundary_sample: Sequence, kappa_grid: Sequence[float],
                           metric: Optional[MetricField] = None,
                           tdim: int = 1, nsamples: int = 60, seed: int = 0,
                           tol: float = DEFAULT_MARGIN_TOL) -> tuple:
    """Empirical thresholds (mu0, mu1): largest grid values such that the
    conjugated condition holds at every sampled point with
    |dphi_t| <= mu0 dphi_n and sigma <= mu1 tau dphi_n.

    Scans kappa_grid in decreasing order, mu0 outer, mu1 inner, and returns
    the first fully passing pair; (0, 0) when the unconjugated condition
    already fails somewhere on the boundary sample.
    """
    boundary_sample = list(boundary_sample)
    if not boundary_sample:
        raise ValueError("boundary sample is empty")
    metric = metric or MetricField.euclidean(tdim)
    rng = np.random.default_rng(seed)

    for x in boundary_sample:
        for _ in range(8):
            om = rng.normal(size=tdim)
            if np.linalg.norm(om) == 0:
                continue
            if not ls_unconjugated(b1, b2, x, om, metric, tol=tol).verdict:
                return (0.0, 0.0)

    # frozen sample of directions/ratios reused for every candidate pair
    draws = []
    for _ in range(nsamples):
        draws.append((rng.normal(size=tdim),         # xi' direction
                      float(rng.uniform(0.05, 1.0)),  # |d_t phi| fraction of mu0
                      rng.normal(size=tdim),          # d_t phi direction
                      float(rng.uniform(0.0, 1.0)),   # sigma fraction of mu1*tau
                      float(10.0 ** rng.uniform(-1.5, 1.5))))  # tau / |xi'|

    grid = sorted((float(k) for k in kappa_grid), reverse=True)

    def passes(mu0: float, mu1: float) -> bool:
        for x in boundary_sample:
            for om, f0, dt_dir, f1, ratio in draws:
                nrm = np.linalg.norm(om)
                if nrm == 0:
                    continue
                xi = om / nrm
                tau = ratio
                dn = 1.0
                dt = np.zeros(tdim) if np.linalg.norm(dt_dir) == 0 else \
                    mu0 * f0 * dn * dt_dir / np.linalg.norm(dt_dir)
                sigma = mu1 * f1 * tau * dn
                pt = TangentialPoint(np.asarray(x, dtype=float), xi, tau, sigma)
                jet = WeightJet(1.0, dt, dn)
                rep = ls_conjugated(b1, b2, jet, pt, metric, tol=tol)
                # marginal samples sit on classification boundaries; only a
                # definite failure disqualifies the candidate pair
                if rep.verdict is False:
                    return False
        return True

    for mu0 in grid:
        for mu1 in grid:
            if passes(mu0, mu1):
                return (mu0, mu1)
    return (0.0, 0.0)
