"""Discrete computational domains: segment meshes in 1D and quadrilateral
meshes embedded in 2D or 3D.

All generators produce immutable :class:`Mesh` objects.  Curved domains
(disk, hemisphere, half torus) are built from coarse base layouts that are
uniformly quadrisected, with new vertices projected back onto the analytic
surface where appropriate.  Boundary vertices carry the homogeneous
Dirichlet condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra


class MeshParseError(ValueError):
    """Raised when a mesh file cannot be parsed; message names the line."""


# 2x2 Gauss abscissa used for the cell-degeneracy check at construction.
_G2 = 1.0 / math.sqrt(3.0)
_QUAD_CHECK_PTS = np.array(
    [(-_G2, -_G2), (_G2, -_G2), (_G2, _G2), (-_G2, _G2)]
)
_QUAD_CORNERS = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])


def _quad_shape_gradients(pts):
    """Reference gradients of the four bilinear shape functions, (npts, 4, 2)."""
    xi = pts[:, 0:1]
    eta = pts[:, 1:2]
    xc = _QUAD_CORNERS[:, 0]
    ec = _QUAD_CORNERS[:, 1]
    d = np.empty((len(pts), 4, 2))
    d[:, :, 0] = 0.25 * xc * (1.0 + eta * ec)
    d[:, :, 1] = 0.25 * (1.0 + xi * xc) * ec
    return d


@dataclass
class Mesh:
    """A segment or quadrilateral mesh embedded in ``dim_embed`` dimensions.

    Attributes
    ----------
    dim_embed : int
        Dimension of the vertex coordinates (1, 2 or 3).
    vertices : ndarray, shape (nv, dim_embed)
    cells : ndarray, shape (nc, 2) for segments or (nc, 4) for quads,
        counterclockwise with respect to the cell normal for generated meshes.
    boundary_nodes : ndarray of int, sorted
        Vertex indices where u = 0 is imposed.
    """

    dim_embed: int
    vertices: np.ndarray
    cells: np.ndarray
    boundary_nodes: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        if self.vertices.ndim == 1:
            self.vertices = self.vertices[:, None]
        self.cells = np.ascontiguousarray(self.cells, dtype=np.int64)
        self.boundary_nodes = np.unique(
            np.asarray(self.boundary_nodes, dtype=np.int64)
        )
        self._validate()

    # -- queries ---------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def nodes_per_cell(self) -> int:
        return self.cells.shape[1]

    def free_nodes(self) -> np.ndarray:
        """Sorted indices of non-Dirichlet vertices."""
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.nonzero(mask)[0]

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_nodes] = True
        return mask

    # -- validation ------------------------------------------------------

    def _validate(self):
        nv = self.n_vertices
        if self.dim_embed not in (1, 2, 3):
            raise ValueError(f"dim_embed must be 1, 2 or 3, got {self.dim_embed}")
        if self.vertices.shape[1] != self.dim_embed:
            raise ValueError("vertex coordinate length does not match dim_embed")
        if self.cells.size == 0:
            raise ValueError("mesh has no cells")
        if self.nodes_per_cell not in (2, 4):
            raise ValueError("cells must have 2 (segment) or 4 (quad) vertices")
        if self.cells.min() < 0 or self.cells.max() >= nv:
            raise ValueError("cell references a vertex index out of range")
        for k in range(self.nodes_per_cell):
            for l in range(k + 1, self.nodes_per_cell):
                if np.any(self.cells[:, k] == self.cells[:, l]):
                    bad = int(np.nonzero(self.cells[:, k] == self.cells[:, l])[0][0])
                    raise ValueError(f"degenerate cell {bad}: repeated vertex")
        if self.boundary_nodes.size == 0:
            raise ValueError("boundary_nodes is empty (Dirichlet problem needs a boundary)")
        if self.boundary_nodes.min() < 0 or self.boundary_nodes.max() >= nv:
            raise ValueError("boundary node index out of range")
        self._check_nondegenerate()

    def _check_nondegenerate(self):
        coords = self.vertices[self.cells]  # (nc, npc, dim)
        if self.nodes_per_cell == 2:
            lengths = np.linalg.norm(coords[:, 1] - coords[:, 0], axis=1)
            if np.any(lengths <= 0.0):
                bad = int(np.argmin(lengths))
                raise ValueError(f"degenerate cell {bad}: zero length")
            return
        dN = _quad_shape_gradients(_QUAD_CHECK_PTS)  # (4, 4, 2)
        J = np.einsum("cvd,qvr->cqdr", coords, dN)
        G = np.einsum("cqdr,cqds->cqrs", J, J)
        detG = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]
        scale = np.max(np.abs(coords)) ** 4 + 1e-300
        if np.any(detG <= 1e-24 * scale):
            bad = int(np.nonzero(np.any(detG <= 1e-24 * scale, axis=1))[0][0])
            raise ValueError(f"degenerate cell {bad}: vanishing Jacobian")


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

def build_interval_mesh(a: float, b: float, n_cells: int) -> Mesh:
    """Uniform segment mesh of (a, b) with Dirichlet nodes at both ends."""
    if not (a < b):
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if n_cells < 2:
        raise ValueError(f"need n_cells >= 2, got {n_cells}")
    x = np.linspace(a, b, n_cells + 1)
    cells = np.column_stack([np.arange(n_cells), np.arange(1, n_cells + 1)])
    return Mesh(1, x[:, None], cells, np.array([0, n_cells]))


def _square_base(c: float) -> Mesh:
    # 3x3 lattice in rotated coordinates (s, t); x = c(s+t)/2, y = c(t-s)/2
    s = np.linspace(-1.0, 1.0, 3)
    S, T = np.meshgrid(s, s, indexing="ij")
    x = c * (S + T) / 2.0
    y = c * (T - S) / 2.0
    verts = np.column_stack([x.ravel(), y.ravel()])
    idx = np.arange(9).reshape(3, 3)
    cells = np.column_stack(
        [idx[:-1, :-1].ravel(), idx[1:, :-1].ravel(), idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()]
    )
    bnd = np.nonzero(np.maximum(np.abs(S), np.abs(T)).ravel() >= 1.0 - 1e-14)[0]
    return Mesh(2, verts, cells, bnd)


def build_square_mesh(c: float, refinements: int) -> Mesh:
    """Quad mesh of the rotated square |x| + |y| < c.

    The 4-cell base (a 2x2 grid aligned with the square's sides) is
    quadrisected ``refinements`` times; boundary midpoints stay on the
    straight sides exactly.
    """
    return square_mesh_chain(c, refinements)[-1][0]


def square_mesh_chain(c: float, refinements: int):
    """All refinement levels of the square mesh with prolongation tables."""
    if c <= 0:
        raise ValueError(f"need c > 0, got {c}")
    if refinements < 0:
        raise ValueError("refinements must be >= 0")
    chain = [(_square_base(c), None)]
    for _ in range(refinements):
        m, parents = refine_quad_mesh(chain[-1][0])
        chain.append((m, parents))
    return chain


def _disk_base(radius: float) -> Mesh:
    # Balanced two-square layout: outer corners on the circle along the
    # diagonals, inner square shrunk by 1/(1 + sqrt(2)).
    d_out = radius / math.sqrt(2.0)
    d_in = d_out / (1.0 + math.sqrt(2.0))
    pat = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])
    verts = np.vstack([d_out * pat, d_in * pat])
    cells = np.array(
        [
            (4, 5, 6, 7),  # center square
            (0, 1, 5, 4),  # south
            (1, 2, 6, 5),  # east
            (2, 3, 7, 6),  # north
            (3, 0, 4, 7),  # west
        ]
    )
    return Mesh(2, verts, cells, np.array([0, 1, 2, 3]))


def build_disk_mesh(radius: float, refinements: int) -> Mesh:
    """Quad mesh of the disk of given radius centered at the origin.

    Five-cell circle-in-square base; each quadrisection projects new
    boundary-edge midpoints radially onto the circle, so every boundary
    vertex satisfies |x| = radius to rounding.
    """
    return disk_mesh_chain(radius, refinements)[-1][0]


def disk_mesh_chain(radius: float, refinements: int):
    """All refinement levels of the disk mesh with prolongation tables."""
    if radius <= 0:
        raise ValueError(f"need radius > 0, got {radius}")
    if refinements < 0:
        raise ValueError("refinements must be >= 0")

    def project(v):
        return radius * v / np.linalg.norm(v, axis=1, keepdims=True)

    chain = [(_disk_base(radius), None)]
    for _ in range(refinements):
        m, parents = refine_quad_mesh(chain[-1][0], boundary_projection=project)
        chain.append((m, parents))
    return chain


def _hemisphere_base(radius: float) -> Mesh:
    # Equidistant azimuthal image of the disk base: planar radius r maps to
    # polar angle (pi/2) (r / R), so the map is quasi-uniform up to the pole.
    disk = _disk_base(radius)
    xy = disk.vertices
    r = np.linalg.norm(xy, axis=1)
    theta = 0.5 * math.pi * r / radius
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(r[:, None] > 0, xy / np.maximum(r, 1e-300)[:, None], 0.0)
    verts = np.column_stack(
        [
            radius * np.sin(theta) * unit[:, 0],
            radius * np.sin(theta) * unit[:, 1],
            radius * np.cos(theta),
        ]
    )
    return Mesh(3, verts, disk.cells, disk.boundary_nodes)


def build_hemisphere_mesh(radius: float, refinements: int) -> Mesh:
    """Quad mesh of the upper hemisphere of given radius (z > 0 half).

    The disk base layout is mapped onto the sphere; each refinement
    projects all new vertices radially back onto the sphere.  Boundary
    vertices lie on the equator z = 0.
    """
    return hemisphere_mesh_chain(radius, refinements)[-1][0]


def hemisphere_mesh_chain(radius: float, refinements: int):
    """All refinement levels of the hemisphere mesh with prolongation tables."""
    if radius <= 0:
        raise ValueError(f"need radius > 0, got {radius}")
    if refinements < 0:
        raise ValueError("refinements must be >= 0")

    def project(v):
        return radius * v / np.linalg.norm(v, axis=1, keepdims=True)

    chain = [(_hemisphere_base(radius), None)]
    for _ in range(refinements):
        m, parents = refine_quad_mesh(chain[-1][0], all_projection=project)
        chain.append((m, parents))
    return chain


def build_half_torus_mesh(major_radius: float, tube_radius: float, refinements: int) -> Mesh:
    """Structured quad mesh of the upper half torus (z > 0).

    The grid covers toroidal angle theta in [0, 2 pi) periodically and tube
    angle phi in [0, pi]; points are

        x = (Rmaj + r cos(phi)) cos(theta)
        y = (Rmaj + r cos(phi)) sin(theta)
        z = r sin(phi)

    so phi = 0 is the outer boundary circle and phi = pi the inner one.
    """
    if not (major_radius > tube_radius > 0):
        raise ValueError(
            f"need major_radius > tube_radius > 0, got {major_radius}, {tube_radius}"
        )
    if refinements < 0:
        raise ValueError("refinements must be >= 0")
    n_phi = 2 * 2**refinements
    n_theta = max(4, int(round(2.0 * major_radius / tube_radius))) * n_phi
    phi = np.linspace(0.0, math.pi, n_phi + 1)
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    P, T = np.meshgrid(phi, theta, indexing="ij")
    rho = major_radius + tube_radius * np.cos(P)
    verts = np.column_stack(
        [(rho * np.cos(T)).ravel(), (rho * np.sin(T)).ravel(), (tube_radius * np.sin(P)).ravel()]
    )
    idx = np.arange((n_phi + 1) * n_theta).reshape(n_phi + 1, n_theta)
    jn = (np.arange(n_theta) + 1) % n_theta  # periodic in theta
    cells = np.column_stack(
        [
            idx[:-1, :].ravel(),
            idx[1:, :].ravel(),
            idx[1:, jn].ravel(),
            idx[:-1, jn].ravel(),
        ]
    )
    bnd = np.concatenate([idx[0, :], idx[-1, :]])
    return Mesh(3, verts, cells, bnd)


# ---------------------------------------------------------------------------
# refinement
# ---------------------------------------------------------------------------

def refine_quad_mesh(m: Mesh, boundary_projection=None, all_projection=None):
    """Uniformly quadrisect a quad mesh.

    New vertices are edge midpoints and cell centroids, appended after the
    existing vertices in a deterministic order.  ``boundary_projection``
    is applied to new midpoints of boundary edges only (disk), while
    ``all_projection`` is applied to every new vertex (hemisphere).  An
    edge is a boundary edge when it belongs to exactly one cell.

    Returns
    -------
    (refined, parents) : (Mesh, ndarray)
        ``parents`` has shape (n_new, 4); each new vertex is the arithmetic
        mean of its parent vertices (edge midpoints list both endpoints
        twice), which is also the exact bilinear prolongation stencil.
    """
    if m.nodes_per_cell != 4:
        raise ValueError("refine_quad_mesh requires a quadrilateral mesh")
    nv = m.n_vertices
    cells = m.cells
    # cell edges in local order (v0v1, v1v2, v2v3, v3v0)
    e = np.stack(
        [cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 3]], cells[:, [3, 0]]], axis=1
    )  # (nc, 4, 2)
    ekey = np.sort(e.reshape(-1, 2), axis=1)
    uniq, inverse, counts = np.unique(
        ekey, axis=0, return_inverse=True, return_counts=True
    )
    n_edges = len(uniq)
    edge_mid = 0.5 * (m.vertices[uniq[:, 0]] + m.vertices[uniq[:, 1]])
    boundary_edge = counts == 1

    bmask = m.boundary_mask()
    new_bnd_edge = boundary_edge & bmask[uniq[:, 0]] & bmask[uniq[:, 1]]
    if boundary_projection is not None and np.any(new_bnd_edge):
        edge_mid[new_bnd_edge] = boundary_projection(edge_mid[new_bnd_edge])

    centroids = m.vertices[cells].mean(axis=1)
    if all_projection is not None:
        edge_mid = all_projection(edge_mid)
        centroids = all_projection(centroids)

    verts = np.vstack([m.vertices, edge_mid, centroids])
    parents = np.vstack(
        [
            np.column_stack([uniq, uniq]),  # edge nodes: endpoints twice
            cells,  # centroids: the four corners
        ]
    )

    eid = inverse.reshape(-1, 4) + nv  # (nc, 4) edge-midpoint vertex ids
    cid = np.arange(m.n_cells) + nv + n_edges
    c0, c1, c2, c3 = cells.T
    e01, e12, e23, e30 = eid.T
    sub = np.empty((m.n_cells, 4, 4), dtype=np.int64)
    sub[:, 0] = np.column_stack([c0, e01, cid, e30])
    sub[:, 1] = np.column_stack([e01, c1, e12, cid])
    sub[:, 2] = np.column_stack([e30, cid, e23, c3])
    sub[:, 3] = np.column_stack([cid, e12, c2, e23])
    new_cells = sub.reshape(-1, 4)

    bnd = np.concatenate([m.boundary_nodes, nv + np.nonzero(new_bnd_edge)[0]])
    refined = Mesh(m.dim_embed, verts, new_cells, bnd)
    return refined, parents


def prolongate(coarse_values: np.ndarray, parents: np.ndarray) -> np.ndarray:
    """Transfer nodal values from a mesh to its quadrisection (exact for Q1)."""
    return np.concatenate([coarse_values, coarse_values[parents].mean(axis=1)])


# ---------------------------------------------------------------------------
# queries and transforms
# ---------------------------------------------------------------------------

def scale_mesh(m: Mesh, alpha: float) -> Mesh:
    """Dilate every vertex by alpha; connectivity and boundary set unchanged."""
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha <= 0:
        raise ValueError(f"scale factor must be positive and finite, got {alpha}")
    return Mesh(m.dim_embed, m.vertices * alpha, m.cells.copy(), m.boundary_nodes.copy())


def mesh_size(m: Mesh) -> float:
    """h = max over cells of the maximum pairwise vertex distance in the cell."""
    coords = m.vertices[m.cells]  # (nc, npc, dim)
    npc = m.nodes_per_cell
    h = 0.0
    for i in range(npc):
        for j in range(i + 1, npc):
            d = np.linalg.norm(coords[:, i] - coords[:, j], axis=1)
            h = max(h, float(d.max()))
    return h


def edge_graph(m: Mesh) -> sp.csr_matrix:
    """Symmetric sparse adjacency of cell edges weighted by Euclidean length."""
    cells = m.cells
    if m.nodes_per_cell == 2:
        pairs = cells
    else:
        pairs = np.vstack(
            [cells[:, [0, 1]], cells[:, [1, 2]], cells[:, [2, 3]], cells[:, [3, 0]]]
        )
    pairs = np.unique(np.sort(pairs, axis=1), axis=0)
    w = np.linalg.norm(m.vertices[pairs[:, 0]] - m.vertices[pairs[:, 1]], axis=1)
    nv = m.n_vertices
    g = sp.coo_matrix(
        (np.concatenate([w, w]), (np.concatenate([pairs[:, 0], pairs[:, 1]]),
                                  np.concatenate([pairs[:, 1], pairs[:, 0]]))),
        shape=(nv, nv),
    )
    return g.tocsr()


def approx_max_boundary_distance(m: Mesh) -> float:
    """Largest shortest-path distance from the boundary along mesh edges.

    Multi-source Dijkstra sweep seeded at all Dirichlet vertices; an
    overestimate of the geodesic distance by the grid anisotropy.
    """
    g = edge_graph(m)
    dist = _csgraph_dijkstra(g, directed=False, indices=m.boundary_nodes, min_only=True)
    if not np.all(np.isfinite(dist)):
        bad = int(np.nonzero(~np.isfinite(dist))[0][0])
        raise ValueError(f"vertex {bad} is unreachable from the boundary (disconnected mesh)")
    return float(dist.max())


# ---------------------------------------------------------------------------
# text format I/O
# ---------------------------------------------------------------------------

def write_mesh(m: Mesh, path) -> None:
    """Write the line-oriented mesh text format (17 significant digits)."""
    with open(path, "w") as f:
        f.write("pmesh 1\n")
        f.write(f"dim {m.dim_embed}\n")
        f.write(f"vertices {m.n_vertices}\n")
        for v in m.vertices:
            f.write(" ".join(f"{x:.17g}" for x in v) + "\n")
        f.write(f"cells {m.n_cells}\n")
        for c in m.cells:
            f.write(" ".join(str(i) for i in c) + "\n")
        f.write(f"boundary {len(m.boundary_nodes)}\n")
        for i in m.boundary_nodes:
            f.write(f"{i}\n")


def read_mesh(path) -> Mesh:
    """Read a mesh from the text format written by :func:`write_mesh`.

    Raises :class:`MeshParseError` naming the offending line on any
    malformed content, out-of-range index, or empty boundary block.
    """
    with open(path) as f:
        raw = f.readlines()
    lines = []  # (lineno, tokens)
    for no, text in enumerate(raw, start=1):
        text = text.split("#", 1)[0].strip()
        if text:
            lines.append((no, text.split()))
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(lines):
            raise MeshParseError(f"unexpected end of file while reading {what}")
        item = lines[pos]
        pos += 1
        return item

    no, tok = take("header")
    if tok != ["pmesh", "1"]:
        raise MeshParseError(f"line {no}: expected 'pmesh 1' header")
    no, tok = take("dim")
    if len(tok) != 2 or tok[0] != "dim" or tok[1] not in ("1", "2", "3"):
        raise MeshParseError(f"line {no}: expected 'dim <1|2|3>'")
    dim = int(tok[1])

    def block(name):
        no, tok = take(name)
        if len(tok) != 2 or tok[0] != name:
            raise MeshParseError(f"line {no}: expected '{name} <count>'")
        try:
            n = int(tok[1])
        except ValueError:
            raise MeshParseError(f"line {no}: bad {name} count '{tok[1]}'") from None
        return n

    nv = block("vertices")
    verts = np.empty((nv, dim))
    for i in range(nv):
        no, tok = take("vertex")
        if len(tok) != dim:
            raise MeshParseError(f"line {no}: expected {dim} coordinates")
        try:
            verts[i] = [float(t) for t in tok]
        except ValueError:
            raise MeshParseError(f"line {no}: bad coordinate") from None

    nc = block("cells")
    rows = []
    width = None
    for i in range(nc):
        no, tok = take("cell")
        if len(tok) not in (2, 4) or (width is not None and len(tok) != width):
            raise MeshParseError(f"line {no}: expected {width or '2 or 4'} vertex indices")
        width = len(tok)
        try:
            row = [int(t) for t in tok]
        except ValueError:
            raise MeshParseError(f"line {no}: bad vertex index") from None
        for j in row:
            if not (0 <= j < nv):
                raise MeshParseError(f"line {no}: vertex index {j} out of range")
        rows.append(row)
    cells = np.array(rows, dtype=np.int64)

    nb = block("boundary")
    if nb == 0:
        raise MeshParseError("boundary block is empty")
    bnd = []
    for i in range(nb):
        no, tok = take("boundary node")
        if len(tok) != 1:
            raise MeshParseError(f"line {no}: expected one vertex index")
        try:
            j = int(tok[0])
        except ValueError:
            raise MeshParseError(f"line {no}: bad vertex index") from None
        if not (0 <= j < nv):
            raise MeshParseError(f"line {no}: boundary index {j} out of range")
        bnd.append(j)

    try:
        return Mesh(dim, verts, cells, np.array(bnd))
    except ValueError as err:
        raise MeshParseError(str(err)) from None
