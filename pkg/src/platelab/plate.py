"""Finite-difference bi-Laplacians on intervals and tensor rectangles.

Interior rows use the five-point fourth-difference stencil (truncation
order h^2); boundary conditions are enforced by eliminating two ghost
layers.  Families containing the Dirichlet trace (hinged, clamped, ex4)
live on lattice nodes with the boundary values removed; the remaining
families (neumann_pair, ex2, ex3, ex5) live on cell centers, where the
half-offset geometry makes the eliminated rows symmetric with the plain
grid inner product <u, v> = h^d sum u v.

Discrete boundary parameters ("a" in ex3/ex4/ex5) are real scalars, the
1-D trace of the corresponding symbol-level parameter; defaults are chosen
so the operator stays nonnegative.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

__all__ = [
    "Grid",
    "make_grid",
    "SpectralScale",
    "DiscretePlateOperator",
    "assemble",
    "check_symmetry",
    "spectrum",
    "hkb_norm",
    "kernel",
    "catalog_families",
    "export_columnar",
    "load_damping_profile",
    "clamped_beam_beta",
]

NODE_FAMILIES = ("hinged", "clamped", "ex4_id_dn2_A")
CELL_FAMILIES = ("neumann_pair", "ex2_dn2_dn3", "ex3_dn_dn3_A", "ex5_dn2A_dn3")


def catalog_families():
    return NODE_FAMILIES + CELL_FAMILIES


@dataclass(frozen=True)
class Grid:
    """Uniform grid on an interval or rectangle: n cells per axis, spacing
    h = length/n, lattice nodes including the boundary."""

    dimension: int
    n: tuple
    lengths: tuple

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if any(k < 8 for k in self.n):
            raise ValueError("need at least 8 cells per axis for the stencil width")
        if any(l <= 0 for l in self.lengths):
            raise ValueError("lengths must be positive")

    @property
    def h(self) -> tuple:
        return tuple(l / k for l, k in zip(self.lengths, self.n))

    def axis_nodes(self, axis: int, layout: str) -> np.ndarray:
        h = self.h[axis]
        if layout == "node":
            return h * np.arange(1, self.n[axis])          # interior lattice
        return h * (np.arange(self.n[axis]) + 0.5)         # cell centers


def make_grid(n, lengths=None, dimension=None) -> Grid:
    if np.isscalar(n):
        n = (int(n),)
    n = tuple(int(k) for k in n)
    if dimension is None:
        dimension = len(n)
    if lengths is None:
        lengths = (1.0,) * dimension
    elif np.isscalar(lengths):
        lengths = (float(lengths),) * dimension
    return Grid(dimension, n, tuple(float(l) for l in lengths))


@dataclass
class SpectralScale:
    """Eigenpairs of a self-adjoint plate operator, grid-orthonormal, plus
    the spectrally defined Sobolev-like norms."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray    # columns, orthonormal for the grid product
    weight: float               # h^d
    full: bool = True


@dataclass
class DiscretePlateOperator:
    grid: Grid
    bc_name: str
    params: dict
    matrix: sp.csr_matrix
    nodes: np.ndarray           # (N, d) unknown coordinates
    layout: str
    weight: float               # quadrature weight h^d of the grid product
    metric: object = None       # coefficient function(s) when non-Euclidean
    tensor_factors: Optional[tuple] = None
    _scale: Optional[SpectralScale] = None

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u

    def inner(self, u, v) -> float:
        return self.weight * float(np.vdot(v, u).real)

    def norm(self, u) -> float:
        return math.sqrt(max(self.inner(u, u), 0.0))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


# ---------------------------------------------------------------------------
# one-dimensional building blocks
# ---------------------------------------------------------------------------

def _sl_coeff_at(coeff, xs):
    if coeff is None:
        return np.ones_like(xs)
    return np.array([float(coeff(x)) for x in xs])


def _dirichlet_laplacian(n: int, h: float, length: float, coeff=None) -> sp.csr_matrix:
    """-(a u')' on interior nodes with u = 0 at both ends; a at half nodes."""
    xs_half = h * (np.arange(n) + 0.5)
    a = _sl_coeff_at(coeff, xs_half)
    main = (a[:-1] + a[1:]) / h ** 2
    off = -a[1:-1] / h ** 2
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _neumann_laplacian(n: int, h: float, length: float, coeff=None) -> sp.csr_matrix:
    """-(a u')' on cell centers with zero-flux ends (graph Laplacian form)."""
    xs_faces = h * np.arange(1, n)
    a = _sl_coeff_at(coeff, xs_faces)
    main = np.zeros(n)
    main[:-1] += a / h ** 2
    main[1:] += a / h ** 2
    off = -a / h ** 2
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def _biharmonic_base(n_unknowns: int, h: float) -> np.ndarray:
    """Dense banded [1 -4 6 -4 1]/h^4 rows; boundary rows patched by caller."""
    M = np.zeros((n_unknowns, n_unknowns))
    stencil = np.array([1.0, -4.0, 6.0, -4.0, 1.0]) / h ** 4
    for i in range(n_unknowns):
        for k, c in zip(range(i - 2, i + 3), stencil):
            if 0 <= k < n_unknowns:
                M[i, k] += c
    return M


def _assemble_1d(grid: Grid, name: str, params: dict, coeff):
    n = grid.n[0]
    h = grid.h[0]
    a0 = float(params.get("a", {"ex3_dn_dn3_A": -1.0,
                                "ex4_id_dn2_A": 1.0,
                                "ex5_dn2A_dn3": 1.0}.get(name, 0.0)))

    if name == "hinged":
        L = _dirichlet_laplacian(n, h, grid.lengths[0], coeff)
        return (L @ L).tocsr(), "node"

    if name == "neumann_pair":
        L = _neumann_laplacian(n, h, grid.lengths[0], coeff)
        return (L @ L).tocsr(), "cell"

    if coeff is not None:
        raise NotImplementedError(
            f"variable coefficients are supported for hinged and neumann_pair "
            f"only, not {name}")

    if name == "clamped":
        # nodes 1..n-1; ghosts: u_0 = 0, u_-1 = u_1 (mirrored on the right)
        M = _biharmonic_base(n - 1, h)
        M[0, 0] += 1.0 / h ** 4
        M[-1, -1] += 1.0 / h ** 4
        return sp.csr_matrix(M), "node"

    if name == "ex4_id_dn2_A":
        # hinged ghosts with a first-order tilt: u_-1 = -c u_1,
        # c = (1 - a h/2)/(1 + a h/2); only the diagonal entry moves
        c = (1.0 - a0 * h / 2.0) / (1.0 + a0 * h / 2.0)
        M = _biharmonic_base(n - 1, h)
        M[0, 0] += -c / h ** 4
        M[-1, -1] += -c / h ** 4
        return sp.csr_matrix(M), "node"

    if name == "ex2_dn2_dn3":
        # free end: second and third normal derivatives vanish
        M = _biharmonic_base(n, h)
        M[0, 0] += -5.0 / h ** 4
        M[0, 1] += 2.0 / h ** 4
        M[1, 0] += 2.0 / h ** 4
        M[1, 1] += -1.0 / h ** 4
        M[-1, -1] += -5.0 / h ** 4
        M[-1, -2] += 2.0 / h ** 4
        M[-2, -1] += 2.0 / h ** 4
        M[-2, -2] += -1.0 / h ** 4
        return sp.csr_matrix(M), "cell"

    if name == "ex3_dn_dn3_A":
        # zero slope ends with a third-derivative load: equals the squared
        # zero-flux Laplacian plus a boundary diagonal -a/h
        L = _neumann_laplacian(n, h, grid.lengths[0], None)
        M = (L @ L).tolil()
        M[0, 0] += -a0 / h
        M[-1, -1] += -a0 / h
        return M.tocsr(), "cell"

    if name == "ex5_dn2A_dn3":
        # tilted second-derivative condition with free third derivative;
        # beta = 1/(1 + a h) keeps the eliminated rows symmetric
        beta = 1.0 / (1.0 + a0 * h)
        M = _biharmonic_base(n, h)
        for first, second in ((0, 1), (n - 1, n - 2)):
            M[first, first] += (3.0 - beta * (2.0 + a0 * h) - 6.0) / h ** 4
            M[first, second] += (beta - 3.0 + 4.0) / h ** 4
            M[second, first] += beta * (2.0 + a0 * h) / h ** 4
            M[second, second] += -beta / h ** 4
        return sp.csr_matrix(M), "cell"

    raise KeyError(f"unknown boundary pair '{name}' for assembly")


def assemble(grid: Grid, bc_pair, metric=None, params: Optional[dict] = None
             ) -> DiscretePlateOperator:
    """Constrained bi-Laplace matrix on the unknowns determined by the
    boundary family.

    bc_pair is a catalog name or (name, params).  metric, when given, is a
    positive coefficient function a(x) for the Sturm-Liouville composition
    (-(a u')')^2; 2-D assembly covers the two Laplacian-square families
    (hinged, neumann_pair) on tensor rectangles with separable coefficients.
    """
    if isinstance(bc_pair, tuple):
        bc_pair, params = bc_pair
    params = dict(params or {})
    name = bc_pair
    if name == "degenerate_equal":
        raise KeyError("degenerate_equal is an analysis fixture; it does not "
                       "determine a well-posed discretization")
    if name not in catalog_families():
        raise KeyError(f"unknown boundary pair '{name}'; "
                       f"families: {catalog_families()}")

    if grid.dimension == 1:
        M, layout = _assemble_1d(grid, name, params, metric)
        nodes = grid.axis_nodes(0, layout)[:, None]
        return DiscretePlateOperator(grid, name, params, M, nodes, layout,
                                     weight=grid.h[0], metric=metric)

    # 2-D tensor rectangles
    if name not in ("hinged", "neumann_pair"):
        raise NotImplementedError(
            f"2-D assembly is limited to the Laplacian-square families "
            f"hinged and neumann_pair; got {name}")
    builders = {"hinged": (_dirichlet_laplacian, "node"),
                "neumann_pair": (_neumann_laplacian, "cell")}
    build, layout = builders[name]
    coeffs = metric if isinstance(metric, (tuple, list)) else (metric, metric)
    Ls = [build(grid.n[ax], grid.h[ax], grid.lengths[ax], coeffs[ax])
          for ax in (0, 1)]
    I0 = sp.identity(Ls[0].shape[0], format="csr")
    I1 = sp.identity(Ls[1].shape[0], format="csr")
    Lap = sp.kron(Ls[0], I1, format="csr") + sp.kron(I0, Ls[1], format="csr")
    M = (Lap @ Lap).tocsr()
    xs = grid.axis_nodes(0, layout)
    ys = grid.axis_nodes(1, layout)
    nodes = np.array([(x, y) for x in xs for y in ys])
    return DiscretePlateOperator(grid, name, params, M, nodes, layout,
                                 weight=grid.h[0] * grid.h[1], metric=metric,
                                 tensor_factors=tuple(Ls))


# ---------------------------------------------------------------------------
# spectral machinery
# ---------------------------------------------------------------------------

def check_symmetry(op: DiscretePlateOperator, trials: int = 20,
                   seed: int = 0) -> float:
    """max over random u, v of |<Mu,v> - <u,Mv>| / (|u| |v| ||M||)."""
    rng = np.random.default_rng(seed)
    scale = float(np.abs(op.matrix).sum(axis=1).max())
    worst = 0.0
    for _ in range(trials):
        u = rng.normal(size=op.size)
        v = rng.normal(size=op.size)
        lhs = op.inner(op.apply(u), v)
        rhs = op.inner(u, op.apply(v))
        worst = max(worst, abs(lhs - rhs)
                    / (op.norm(u) * op.norm(v) * scale))
    return worst


def _eigh_full(op: DiscretePlateOperator) -> SpectralScale:
    if op.tensor_factors is not None:
        evs, vecs = [], []
        for L in op.tensor_factors:
            lam, V = scipy.linalg.eigh(L.toarray())
            evs.append(lam)
            vecs.append(V)
        lam0, lam1 = evs
        pairs = [(float((a + b) ** 2), i, j)
                 for i, a in enumerate(lam0) for j, b in enumerate(lam1)]
        pairs.sort()
        mu = np.array([p[0] for p in pairs])
        cols = np.empty((op.size, len(pairs)))
        for k, (_, i, j) in enumerate(pairs):
            cols[:, k] = np.kron(vecs[0][:, i], vecs[1][:, j])
        cols /= math.sqrt(op.weight)
        return SpectralScale(mu, cols, op.weight, full=True)

    if op.size > 3000:
        raise ValueError("dense eigensolve refused for this size; use a "
                         "tensor-structured family or a smaller grid")
    lam, V = scipy.linalg.eigh(op.dense())
    V = V / math.sqrt(op.weight)
    return SpectralScale(lam, V, op.weight, full=True)


def spectral_scale(op: DiscretePlateOperator) -> SpectralScale:
    if op._scale is None:
        op._scale = _eigh_full(op)
    return op._scale


def spectrum(op: DiscretePlateOperator, count: int):
    """Lowest eigenpairs, ascending, grid-orthonormal eigenvectors."""
    if count > op.size:
        raise ValueError(f"requested {count} eigenpairs of a size-{op.size} operator")
    s = spectral_scale(op)
    return s.eigenvalues[:count].copy(), s.eigenvectors[:, :count].copy()


def hkb_norm(u: np.ndarray, k: float, scale: SpectralScale) -> float:
    """Spectrally weighted norm (sum (1 + mu_j)^(k/2) |u_j|^2)^(1/2)."""
    coeffs = scale.weight * (scale.eigenvectors.T @ u)
    total = scale.weight * float(np.vdot(u, u).real)
    captured = float(np.vdot(coeffs, coeffs).real)
    # coefficients are <u, phi_j>_grid; with an incomplete cache some mass
    # is unaccounted for
    if not scale.full or scale.eigenvectors.shape[1] < scale.eigenvectors.shape[0]:
        tail = total - captured
        if tail > 1e-10 * max(total, 1e-300):
            warnings.warn(f"spectral cache truncates {tail:.3e} of the squared "
                          f"norm; H^k value is a lower bound")
    vals = (1.0 + scale.eigenvalues) ** (k / 2.0)
    return math.sqrt(float(np.sum(vals * np.abs(coeffs) ** 2)))


def kernel(op: DiscretePlateOperator, tol: float = 1e-8, count: int = 16):
    """Eigenvectors spanning the numerical kernel: mu_j <= tol * mu_ref with
    mu_ref the median of the lowest `count` eigenvalues.  Empty when mu_0
    clears the threshold."""
    s = spectral_scale(op)
    mu = s.eigenvalues
    count = min(count, mu.size)
    ref = mu[(count + 1) // 2]
    if ref <= 0:
        ref = abs(mu[:count]).max()
    idx = np.where(mu <= tol * ref)[0]
    return [s.eigenvectors[:, i].copy() for i in idx]


def clamped_beam_beta(k: int = 1, tol: float = 1e-13) -> float:
    """k-th positive root of cos(b) cosh(b) = 1 by bisection; the clamped
    beam eigenvalues are beta^4 on the unit interval."""
    f = lambda b: math.cos(b) * math.cosh(b) - 1.0
    # roots interlace near (k + 1/2) pi for k >= 1
    lo = (k + 0.25) * math.pi
    hi = (k + 0.75) * math.pi
    if f(lo) * f(hi) > 0:
        lo = k * math.pi
        hi = (k + 1) * math.pi
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(hi - lo) < tol:
            break
        if flo * fm <= 0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# external interfaces
# ---------------------------------------------------------------------------

def export_columnar(op: DiscretePlateOperator, directory, eig_count: int = 0):
    """Write node coordinates, matrix triplets, and optionally eigenvalues
    as plain columnar text files."""
    import os
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "nodes.txt"), "w") as fh:
        fh.write("# index coordinates\n")
        for i, xyz in enumerate(op.nodes):
            fh.write(f"{i} " + " ".join(f"{c:.17g}" for c in xyz) + "\n")
    coo = op.matrix.tocoo()
    with open(os.path.join(directory, "matrix.txt"), "w") as fh:
        fh.write("# row col value\n")
        order = np.lexsort((coo.col, coo.row))
        for k in order:
            fh.write(f"{coo.row[k]} {coo.col[k]} {coo.data[k]:.17g}\n")
    if eig_count:
        mu, _ = spectrum(op, eig_count)
        with open(os.path.join(directory, "eigenvalues.txt"), "w") as fh:
            fh.write("# index eigenvalue\n")
            for i, m in enumerate(mu):
                fh.write(f"{i} {m:.17g}\n")


def load_damping_profile(path, nodes: np.ndarray) -> np.ndarray:
    """Damping values on the operator's unknowns from a sampled-values file
    (columns: coordinates then value; '#' comments).  1-D profiles are
    linearly interpolated; higher dimensions require one row per node."""
    raw = np.loadtxt(path, ndmin=2)
    d = nodes.shape[1]
    if raw.shape[1] != d + 1:
        raise ValueError(f"profile file has {raw.shape[1]} columns, "
                         f"expected {d + 1}")
    if d == 1:
        order = np.argsort(raw[:, 0])
        return np.interp(nodes[:, 0], raw[order, 0], raw[order, 1])
    if raw.shape[0] != nodes.shape[0]:
        raise ValueError("2-D profiles must supply one row per grid unknown")
    # match rows to nodes by nearest coordinates
    out = np.empty(nodes.shape[0])
    for i, x in enumerate(nodes):
        k = int(np.argmin(np.sum((raw[:, :d] - x) ** 2, axis=1)))
        out[i] = raw[k, d]
    return out
