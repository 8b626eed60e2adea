"""Q1 finite elements on segment and quadrilateral meshes: quadrature,
tangential gradients for embedded cells, assembly of the linearized
eigenvalue system, and the nonlinear Rayleigh quotient.

All cell loops are vectorized; per-mesh geometry (Jacobians, metric, basis
gradients at quadrature points) is cached on the mesh, which is immutable.
Powers |v|^s for large exponents are evaluated as exp(s log|v|) with
underflow clamped to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh import Mesh
from .sparse import CsrMatrix

# Gauss-Legendre nodes/weights on [-1, 1]
_GAUSS = {
    2: (np.array([-1.0 / math.sqrt(3.0), 1.0 / math.sqrt(3.0)]), np.array([1.0, 1.0])),
    3: (
        np.array([-math.sqrt(3.0 / 5.0), 0.0, math.sqrt(3.0 / 5.0)]),
        np.array([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0]),
    ),
}
_QUAD_CORNERS = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])


@dataclass(frozen=True)
class QuadratureRule:
    """Reference-cell quadrature: points (nq, ref_dim) and positive weights."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def n_points(self) -> int:
        return len(self.weights)


def gauss_rule(ref_dim: int, n1d: int) -> QuadratureRule:
    """Tensor-product Gauss rule with n1d points per direction."""
    x, w = _GAUSS[n1d]
    if ref_dim == 1:
        return QuadratureRule(x[:, None].copy(), w.copy())
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w)
    return QuadratureRule(np.column_stack([X.ravel(), Y.ravel()]), W.ravel())


def shape_functions(ref_dim: int, pts: np.ndarray):
    """Q1 shape values (nq, nloc) and reference gradients (nq, nloc, ref_dim)."""
    if ref_dim == 1:
        xi = pts[:, 0]
        N = np.column_stack([(1.0 - xi) / 2.0, (1.0 + xi) / 2.0])
        dN = np.broadcast_to(np.array([[-0.5], [0.5]]), (len(pts), 2, 1)).copy()
        return N, dN
    xi, eta = pts[:, 0:1], pts[:, 1:2]
    xc, ec = _QUAD_CORNERS[:, 0], _QUAD_CORNERS[:, 1]
    N = 0.25 * (1.0 + xi * xc) * (1.0 + eta * ec)
    dN = np.empty((len(pts), 4, 2))
    dN[:, :, 0] = 0.25 * xc * (1.0 + eta * ec)
    dN[:, :, 1] = 0.25 * (1.0 + xi * xc) * ec
    return N, dN


class _Geometry:
    """Per-(mesh, rule) geometry: basis gradients B (nc,nq,dim,nloc) in the
    embedding space, quadrature measure dA (nc,nq), shape values N."""

    def __init__(self, m: Mesh, n1d: int):
        ref_dim = 1 if m.nodes_per_cell == 2 else 2
        rule = gauss_rule(ref_dim, n1d)
        N, dN = shape_functions(ref_dim, rule.points)
        coords = m.vertices[m.cells]  # (nc, nloc, dim)
        J = np.einsum("cvd,qvr->cqdr", coords, dN)  # (nc,nq,dim,ref_dim)
        G = np.einsum("cqdr,cqds->cqrs", J, J)
        if ref_dim == 1:
            detG = G[..., 0, 0].copy()
            invG = 1.0 / G
        else:
            detG = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]
            invG = np.empty_like(G)
            invG[..., 0, 0] = G[..., 1, 1]
            invG[..., 1, 1] = G[..., 0, 0]
            invG[..., 0, 1] = -G[..., 0, 1]
            invG[..., 1, 0] = -G[..., 1, 0]
            invG /= detG[..., None, None]
        if np.any(detG <= 0.0):
            bad = int(np.nonzero(np.any(detG <= 0.0, axis=1))[0][0])
            raise ValueError(f"degenerate cell {bad}: singular metric")
        self.rule = rule
        self.N = N
        self.B = np.einsum("cqdr,cqrs,qvs->cqdv", J, invG, dN, optimize=True)
        self.dA = np.sqrt(detG) * rule.weights[None, :]
        self._BtB = None

    @property
    def BtB(self):
        if self._BtB is None:
            self._BtB = np.einsum("cqdv,cqdw->cqvw", self.B, self.B, optimize=True)
        return self._BtB


def _geometry(m: Mesh, n1d: int) -> _Geometry:
    key = ("geom", n1d)
    g = m._cache.get(key)
    if g is None:
        g = _Geometry(m, n1d)
        m._cache[key] = g
    return g


@dataclass
class FeFunction:
    """Piecewise (bi)linear scalar field given by one coefficient per vertex."""

    mesh: Mesh
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.mesh.n_vertices,):
            raise ValueError(
                f"expected {self.mesh.n_vertices} coefficients, "
                f"got {self.coefficients.shape}"
            )

    def copy(self) -> "FeFunction":
        return FeFunction(self.mesh, self.coefficients.copy())


def _abs_power(vals: np.ndarray, expo: float) -> np.ndarray:
    """|vals|**expo via exp/log; 0**0 = 1, underflow clamps to 0."""
    if expo == 0.0:
        return np.ones_like(vals)
    a = np.abs(vals)
    out = np.zeros_like(a)
    nz = a > 0.0
    with np.errstate(under="ignore"):
        out[nz] = np.exp(expo * np.log(a[nz]))
    return out


def gamma_coefficient(grad, p: float, eta: float) -> float:
    """Regularized diffusion weight (eta^2 + |grad|^2)^((p-2)/2)."""
    if p < 2.0:
        raise ValueError(f"need p >= 2, got {p}")
    if eta <= 0.0:
        raise ValueError(f"need eta > 0, got {eta}")
    g2 = float(np.dot(grad, grad)) if np.ndim(grad) else float(grad) ** 2
    return math.exp(0.5 * (p - 2.0) * math.log(eta * eta + g2))


def _gamma_array(g2: np.ndarray, p: float, eta: float) -> np.ndarray:
    if p == 2.0:
        return np.ones_like(g2)
    with np.errstate(under="ignore"):
        return np.exp(0.5 * (p - 2.0) * np.log(eta * eta + g2))


def tangential_gradient(m: Mesh, f: FeFunction, cell: int, ref_point) -> np.ndarray:
    """Intrinsic gradient of f on one cell at a reference point.

    For planar and 1D cells this is the ordinary gradient; for embedded
    surface quads it is J (J^T J)^{-1} grad_ref(f), a vector in the
    embedding space tangent to the cell.
    """
    ref_dim = 1 if m.nodes_per_cell == 2 else 2
    pt = np.atleast_1d(np.asarray(ref_point, dtype=float))[None, :]
    _, dN = shape_functions(ref_dim, pt)
    coords = m.vertices[m.cells[cell]]  # (nloc, dim)
    J = np.einsum("vd,qvr->dr", coords, dN)
    G = J.T @ J
    det = np.linalg.det(G) if ref_dim == 2 else G[0, 0]
    if det <= 0.0 or not np.isfinite(det):
        raise ValueError(f"degenerate cell {cell}: singular metric")
    gref = np.einsum("qvr,v->r", dN, f.coefficients[m.cells[cell]])
    return J @ np.linalg.solve(G, gref)


def _quotient_rule_points(p: float) -> int:
    # |grad u|^p is far from polynomial for large p; upgrade the rule.
    return 3 if p > 10.0 else 2


def _gradient_terms(m: Mesh, coeffs: np.ndarray, n1d: int):
    g = _geometry(m, n1d)
    uc = coeffs[m.cells]
    gu = np.einsum("cqdv,cv->cqd", g.B, uc, optimize=True)  # (nc,nq,dim)
    g2 = np.einsum("cqd,cqd->cq", gu, gu)
    return g, uc, gu, g2


def assemble_newton_system(m: Mesh, u: FeFunction, p: float, eta: float, lam: float):
    """Assemble the linearized system at state (u, lam) for exponent p.

    Returns (K, M, b) reduced to the free (non-Dirichlet) vertices by
    symmetric elimination:

    * K: grad-grad form with weight gamma (I + (p-2)/(eta^2+|grad u|^2)
      grad u ⊗ grad u),
    * M: mass form with weight (p-1) |u|^(p-2),
    * b: residual  lam |u|^(p-2) u phi_i - gamma grad u . grad phi_i.

    Uses the same quadrature rule as the Rayleigh quotient (3x3 above
    p = 10); the Newton fixed point and the line-search functional must
    agree or tiny near-converged updates stop being descent directions.
    """
    if p < 2.0:
        raise ValueError(f"need p >= 2, got {p}")
    if eta <= 0.0:
        raise ValueError(f"need eta > 0, got {eta}")
    if lam <= 0.0:
        raise ValueError(f"need lambda > 0, got {lam}")
    g, uc, gu, g2 = _gradient_terms(m, u.coefficients, _quotient_rule_points(p))
    gamma = _gamma_array(g2, p, eta)
    dA = g.dA
    Bg = np.einsum("cqdv,cqd->cqv", g.B, gu, optimize=True)
    Kloc = np.einsum("cq,cqvw->cvw", gamma * dA, g.BtB, optimize=True)
    if p > 2.0:
        rank1 = gamma * (p - 2.0) / (eta * eta + g2)
        Kloc += np.einsum("cq,cqv,cqw->cvw", rank1 * dA, Bg, Bg, optimize=True)
    uq = np.einsum("qv,cv->cq", g.N, uc)
    w = _abs_power(uq, p - 2.0)
    Mloc = np.einsum("cq,qv,qw->cvw", (p - 1.0) * w * dA, g.N, g.N, optimize=True)
    bloc = np.einsum("cq,qv->cv", lam * w * uq * dA, g.N) - np.einsum(
        "cq,cqv->cv", gamma * dA, Bg, optimize=True
    )

    nv = m.n_vertices
    free = m.free_nodes()
    glob2free = -np.ones(nv, dtype=np.int64)
    glob2free[free] = np.arange(len(free))
    cells = m.cells
    npc = m.nodes_per_cell
    rows = np.repeat(cells, npc, axis=1).ravel()
    cols = np.tile(cells, (1, npc)).ravel()
    fr, fc = glob2free[rows], glob2free[cols]
    keep = (fr >= 0) & (fc >= 0)
    nf = len(free)
    K = CsrMatrix.from_triplets(fr[keep], fc[keep], Kloc.ravel()[keep], nf)
    M = CsrMatrix.from_triplets(fr[keep], fc[keep], Mloc.ravel()[keep], nf)
    b_full = np.zeros(nv)
    np.add.at(b_full, cells.ravel(), bloc.ravel())
    return K, M, b_full[free]


def rayleigh_quotient(m: Mesh, u: FeFunction, p: float) -> float:
    """R_p(u) = integral |grad u|^p / integral |u|^p over the mesh.

    Both integrals are accumulated with compensated summation over the
    per-cell contributions; a 3x3 rule replaces the 2x2 rule for p > 10.
    """
    n1d = _quotient_rule_points(p)
    g, uc, gu, g2 = _gradient_terms(m, u.coefficients, n1d)
    num_cells = np.einsum("cq,cq->c", _abs_power(g2, p / 2.0), g.dA)
    uq = np.einsum("qv,cv->cq", g.N, uc)
    den_cells = np.einsum("cq,cq->c", _abs_power(uq, p), g.dA)
    den = math.fsum(den_cells)
    if den == 0.0:
        raise ValueError("zero function")
    return math.fsum(num_cells) / den


def rayleigh_directional_derivative(m: Mesh, u: FeFunction, du: FeFunction, p: float) -> float:
    """Derivative of R_p at u in direction du (same quadrature as R_p)."""
    n1d = _quotient_rule_points(p)
    g, uc, gu, g2 = _gradient_terms(m, u.coefficients, n1d)
    dc = du.coefficients[m.cells]
    gd = np.einsum("cqdv,cv->cqd", g.B, dc, optimize=True)
    uq = np.einsum("qv,cv->cq", g.N, uc)
    dq = np.einsum("qv,cv->cq", g.N, dc)

    grad_w = _abs_power(g2, (p - 2.0) / 2.0)
    t_num = np.einsum("cq,cq,cq->c", grad_w, np.einsum("cqd,cqd->cq", gu, gd), g.dA)
    mass_w = _abs_power(uq, p - 2.0)
    t_mass = np.einsum("cq,cq->c", mass_w * uq * dq, g.dA)
    den_cells = np.einsum("cq,cq->c", _abs_power(uq, p), g.dA)
    den = math.fsum(den_cells)
    if den == 0.0:
        raise ValueError("zero function")
    num_cells = np.einsum("cq,cq->c", _abs_power(g2, p / 2.0), g.dA)
    R = math.fsum(num_cells) / den
    return p * (math.fsum(t_num) - R * math.fsum(t_mass)) / den


def sup_norm(u: FeFunction) -> float:
    """Discrete sup-norm: max over vertices of |u| (exact for Q1 cells)."""
    return float(np.abs(u.coefficients).max())


def normalize_sup(u: FeFunction) -> FeFunction:
    """Scale so the maximum nodal value is +1 (sign flipped if needed)."""
    c = u.coefficients
    i = int(np.argmax(np.abs(c)))
    s = sup_norm(u)
    if s == 0.0:
        raise ValueError("zero function")
    scale = 1.0 / s if c[i] > 0 else -1.0 / s
    return FeFunction(u.mesh, c * scale)


# ---------------------------------------------------------------------------
# integration helpers (used by studies and exports)
# ---------------------------------------------------------------------------

def surface_area(m: Mesh) -> float:
    """Total measure of the mesh (length in 1D, area for surfaces)."""
    g = _geometry(m, 2)
    return float(math.fsum(g.dA.sum(axis=1)))


def quadrature_coordinates(m: Mesh, n1d: int = 3):
    """Physical coordinates (nc, nq, dim) and measures dA (nc, nq)."""
    g = _geometry(m, n1d)
    coords = np.einsum("qv,cvd->cqd", g.N, m.vertices[m.cells])
    return coords, g.dA


def values_at_quadrature(m: Mesh, nodal: np.ndarray, n1d: int = 3) -> np.ndarray:
    """Interpolate nodal values to the quadrature points, (nc, nq)."""
    g = _geometry(m, n1d)
    return np.einsum("qv,cv->cq", g.N, nodal[m.cells])


def l2_norm_nodal(m: Mesh, nodal: np.ndarray, n1d: int = 3) -> float:
    """L2 norm of the Q1 interpolant of the given nodal values."""
    g = _geometry(m, n1d)
    vq = np.einsum("qv,cv->cq", g.N, nodal[m.cells])
    return math.sqrt(math.fsum(np.einsum("cq,cq->c", vq * vq, g.dA)))
