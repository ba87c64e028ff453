"""Structured triangular mesh and finite element spaces on the channel.

The domain is the rectangle [0, L] x [0, h_f], meshed by an nx x ny grid of
squares each split into two triangles along the lower-left to upper-right
diagonal.  Spaces:

- velocity: vector P2, one scalar block per component, x block first;
- pressure: scalar P1 on the vertices;
- wall displacement: P2 on the 1D grid induced on the top side Sigma.

Boundary tags: ``in`` (x = 0), ``out`` (x = L), ``sym`` (y = 0, symmetry
axis), ``sigma`` (y = h_f, elastic wall).

Scalar P2 nodes live on the refined lattice (2nx+1) x (2ny+1); node (I, J)
has index J*(2nx+1) + I.  Velocity dof n is the x component at node n and
N_scalar + n the y component.  Displacement dof l sits at x = l*L/(2nx) on
the top side and its matching velocity node is given by ``trace_nodes``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError, UsageError

TAGS = ("in", "out", "sym", "sigma")

# Degree-4 rule on the reference triangle (6 points, two symmetry orbits);
# weights are normalized against the unit-area triangle, hence the 1/2 so
# that integral = |det J| * sum(w * f).
_A1, _W1 = 0.445948490915965, 0.223381589678011
_A2, _W2 = 0.091576213509771, 0.109951743655322
TRI_PTS = np.array([
    [_A1, _A1], [1.0 - 2.0 * _A1, _A1], [_A1, 1.0 - 2.0 * _A1],
    [_A2, _A2], [1.0 - 2.0 * _A2, _A2], [_A2, 1.0 - 2.0 * _A2],
])
TRI_W = 0.5 * np.array([_W1, _W1, _W1, _W2, _W2, _W2])

# 3-point Gauss rule on [0, 1], exact through degree 5.
_G = 0.5 * np.sqrt(0.6)
EDGE_PTS = np.array([0.5 - _G, 0.5, 0.5 + _G])
EDGE_W = np.array([5.0, 8.0, 5.0]) / 18.0


def p2_values(pts):
    """P2 basis values at reference points, order (v0, v1, v2, m01, m12, m20)."""
    xi, ze = pts[:, 0], pts[:, 1]
    l0 = 1.0 - xi - ze
    return np.column_stack([
        l0 * (2.0 * l0 - 1.0), xi * (2.0 * xi - 1.0), ze * (2.0 * ze - 1.0),
        4.0 * l0 * xi, 4.0 * xi * ze, 4.0 * ze * l0,
    ])


def p2_grads(pts):
    """P2 reference gradients, shape (npts, 6, 2)."""
    xi, ze = pts[:, 0], pts[:, 1]
    l0 = 1.0 - xi - ze
    g = np.empty((len(pts), 6, 2))
    g[:, 0, 0] = 1.0 - 4.0 * l0
    g[:, 0, 1] = 1.0 - 4.0 * l0
    g[:, 1, 0] = 4.0 * xi - 1.0
    g[:, 1, 1] = 0.0
    g[:, 2, 0] = 0.0
    g[:, 2, 1] = 4.0 * ze - 1.0
    g[:, 3, 0] = 4.0 * (l0 - xi)
    g[:, 3, 1] = -4.0 * xi
    g[:, 4, 0] = 4.0 * ze
    g[:, 4, 1] = 4.0 * xi
    g[:, 5, 0] = -4.0 * ze
    g[:, 5, 1] = 4.0 * (l0 - ze)
    return g


def p1_values(pts):
    xi, ze = pts[:, 0], pts[:, 1]
    return np.column_stack([1.0 - xi - ze, xi, ze])


P1_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def p2_line_values(s):
    """1D P2 basis on [0, 1] at points s, node order (end 0, midpoint, end 1)."""
    s = np.asarray(s)
    return np.column_stack([
        2.0 * (s - 0.5) * (s - 1.0), 4.0 * s * (1.0 - s), 2.0 * s * (s - 0.5),
    ])


def p2_line_grads(s):
    s = np.asarray(s)
    return np.column_stack([4.0 * s - 3.0, 4.0 - 8.0 * s, 4.0 * s - 1.0])


def p1_line_values(s):
    s = np.asarray(s)
    return np.column_stack([1.0 - s, s])


@dataclass
class Mesh:
    """Structured triangulation of the channel rectangle."""

    nx: int
    ny: int
    L: float
    h_f: float
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: dict


def build_mesh(nx, ny, L, h_f):
    """Triangulate [0, L] x [0, h_f] with an nx x ny grid, diagonal up-right.

    Each grid cell contributes the triangles (v00, v10, v11) and
    (v00, v11, v01), both counterclockwise.
    """
    if nx < 1 or ny < 1:
        raise ParameterError(f"mesh resolution must be positive, got {nx}x{ny}")
    if L <= 0 or h_f <= 0:
        raise ParameterError("domain dimensions must be positive")

    xs = np.linspace(0.0, L, nx + 1)
    ys = np.linspace(0.0, h_f, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    tris = np.empty((2 * nx * ny, 3), dtype=np.int64)
    for j in range(ny):
        for i in range(nx):
            c = 2 * (j * nx + i)
            tris[c] = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1))
            tris[c + 1] = (vid(i, j), vid(i + 1, j + 1), vid(i, j + 1))

    edges = {
        "sym": np.array([[vid(i, 0), vid(i + 1, 0)] for i in range(nx)]),
        "sigma": np.array([[vid(i, ny), vid(i + 1, ny)] for i in range(nx)]),
        "in": np.array([[vid(0, j), vid(0, j + 1)] for j in range(ny)]),
        "out": np.array([[vid(nx, j), vid(nx, j + 1)] for j in range(ny)]),
    }
    return Mesh(nx=nx, ny=ny, L=L, h_f=h_f, vertices=vertices,
                triangles=tris, boundary_edges=edges)


@dataclass
class FieldVector:
    """Coefficient vector of a discrete field, tagged by its space."""

    tag: str
    data: np.ndarray


def as_array(v):
    """Coefficients of a FieldVector, or the array itself."""
    return v.data if isinstance(v, FieldVector) else np.asarray(v, dtype=float)


class FESystem:
    """Spaces, connectivity, geometry and boundary dof sets for one mesh."""

    def __init__(self, mesh):
        self.mesh = mesh
        nx, ny = mesh.nx, mesh.ny
        self.n_scalar = (2 * nx + 1) * (2 * ny + 1)
        self.n_u = 2 * self.n_scalar
        self.n_p = (nx + 1) * (ny + 1)
        self.n_eta = 2 * nx + 1

        # P2 node coordinates on the refined lattice.
        rx = np.linspace(0.0, mesh.L, 2 * nx + 1)
        ry = np.linspace(0.0, mesh.h_f, 2 * ny + 1)
        RX, RY = np.meshgrid(rx, ry)
        self.p2_coords = np.column_stack([RX.ravel(), RY.ravel()])

        # Element connectivity: P1 from the triangulation, P2 through refined
        # lattice coordinates (vertex (i, j) -> refined (2i, 2j), midpoints at
        # the integer sums).
        tris = mesh.triangles
        vi = tris % (nx + 1)
        vj = tris // (nx + 1)
        ri, rj = 2 * vi, 2 * vj
        W = 2 * nx + 1

        def rid(i, j):
            return j * W + i

        self.p1_nodes = tris
        p2 = np.empty((len(tris), 6), dtype=np.int64)
        p2[:, :3] = rid(ri, rj)
        p2[:, 3] = rid((ri[:, 0] + ri[:, 1]) // 2, (rj[:, 0] + rj[:, 1]) // 2)
        p2[:, 4] = rid((ri[:, 1] + ri[:, 2]) // 2, (rj[:, 1] + rj[:, 2]) // 2)
        p2[:, 5] = rid((ri[:, 2] + ri[:, 0]) // 2, (rj[:, 2] + rj[:, 0]) // 2)
        self.p2_nodes = p2

        v = mesh.vertices[tris]
        J = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
        self.det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        if np.any(self.det <= 0):
            raise ParameterError("triangulation contains inverted elements")
        self.jinv_t = np.linalg.inv(J).transpose(0, 2, 1)
        self.cell_origin = v[:, 0]
        self.cell_jac = J

        # Boundary node sets.
        I, Jr = np.meshgrid(np.arange(2 * nx + 1), np.arange(2 * ny + 1))
        I, Jr = I.ravel(), Jr.ravel()
        self.sigma_trace_nodes = np.arange(2 * ny * W, 2 * ny * W + W)
        self.sym_nodes = np.arange(0, W)
        self.boundary_nodes_p2 = np.unique(np.concatenate([
            np.flatnonzero(Jr == 0), np.flatnonzero(Jr == 2 * ny),
            np.flatnonzero(I == 0), np.flatnonzero(I == 2 * nx),
        ]))
        self.p1_in = np.arange(0, self.n_p, nx + 1)
        self.p1_out = np.arange(nx, self.n_p, nx + 1)
        self.p1_top = np.arange(ny * (nx + 1), (ny + 1) * (nx + 1))
        self.eta_ends = np.array([0, 2 * nx])

        # Interface facets: the top edge of the second triangle of each top
        # row cell (local vertices 1 -> 2); reference points (s, 1 - s) map
        # to x = x_i + s * hx on it.
        self.sigma_cells = np.array(
            [2 * ((ny - 1) * nx + i) + 1 for i in range(nx)], dtype=np.int64)
        self.facet_edofs = np.array(
            [[2 * i, 2 * i + 1, 2 * i + 2] for i in range(nx)], dtype=np.int64)
        self.hx = mesh.L / nx
        self.hy = mesh.h_f / ny

        self._forms = {}

    def dim(self, tag):
        sizes = {"u": self.n_u, "z": self.n_u, "p": self.n_p,
                 "eta": self.n_eta, "lambda": self.n_eta,
                 "scalar": self.n_scalar}
        if tag not in sizes:
            raise UsageError(f"unknown field tag {tag!r}")
        return sizes[tag]

    def field(self, tag, data):
        """Validated FieldVector in one of this system's spaces."""
        data = np.asarray(data, dtype=float)
        if data.shape != (self.dim(tag),):
            raise UsageError(
                f"field {tag!r} expects length {self.dim(tag)}, "
                f"got shape {data.shape}"
            )
        return FieldVector(tag, data)

    def vel_dof(self, component, nodes):
        """Velocity dof indices of the given component at scalar nodes."""
        offset = 0 if component == 0 else self.n_scalar
        return offset + np.asarray(nodes)

    def eta_x(self):
        """Interface dof abscissas."""
        return np.linspace(0.0, self.mesh.L, self.n_eta)


def build_system(mesh):
    """Finite element system (spaces and geometry) on a channel mesh."""
    return FESystem(mesh)


def _accumulate(rows, cols, loc, shape):
    mat = sp.coo_matrix(
        (loc.ravel(), (rows.ravel(), cols.ravel())), shape=shape)
    return mat.tocsr()


def _scalar_local(fesys, kind):
    """Local element matrices for scalar P2/P1 forms, vectorized over cells.

    kind is one of 'mass_p2', 'mass_p1', 'stiff_p2', 'stiff_p1',
    'kxx', 'kyy', 'kxy' (the last three are the P2 gradient components,
    (K_ab)_ij = integral of d_a phi_i * d_b phi_j).
    """
    w, pts = TRI_W, TRI_PTS
    det = fesys.det
    if kind == "mass_p2":
        V = p2_values(pts)
        return np.einsum("q,qi,qj,e->eij", w, V, V, det)
    if kind == "mass_p1":
        V = p1_values(pts)
        return np.einsum("q,qi,qj,e->eij", w, V, V, det)
    G2 = np.einsum("eab,qib->eqia", fesys.jinv_t, p2_grads(pts))
    if kind == "stiff_p2":
        return np.einsum("q,eqia,eqja,e->eij", w, G2, G2, det)
    if kind in ("kxx", "kyy", "kxy"):
        a = 0 if kind[1] == "x" else 1
        b = 0 if kind[2] == "x" else 1
        return np.einsum("q,eqi,eqj,e->eij", w, G2[..., a], G2[..., b], det)
    if kind == "stiff_p1":
        G1 = np.einsum("eab,ib->eia", fesys.jinv_t, P1_GRADS)
        return np.einsum("eia,eja,e->eij", G1, G1, det) * 0.5
    raise UsageError(f"unknown local form kind {kind!r}")


def _scalar_p2_matrix(fesys, kind):
    n = fesys.n_scalar
    loc = _scalar_local(fesys, kind)
    rows = np.repeat(fesys.p2_nodes, 6, axis=1)
    cols = np.tile(fesys.p2_nodes, (1, 6))
    return _accumulate(rows, cols, loc, (n, n))


def _line_local(fesys, kind):
    """Local matrices of the 1D interface forms on one facet of length hx."""
    s, w = EDGE_PTS, EDGE_W
    if kind == "mass":
        V = p2_line_values(s)
        return fesys.hx * np.einsum("q,qi,qj->ij", w, V, V)
    if kind == "stiff":
        G = p2_line_grads(s)
        return np.einsum("q,qi,qj->ij", w, G, G) / fesys.hx
    if kind == "mixed":
        V2, V1 = p2_line_values(s), p1_line_values(s)
        return fesys.hx * np.einsum("q,qi,qj->ij", w, V2, V1)
    if kind == "mass_p1":
        V1 = p1_line_values(s)
        return fesys.hx * np.einsum("q,qi,qj->ij", w, V1, V1)
    raise UsageError(f"unknown line form kind {kind!r}")


def _interface_mass(fesys):
    loc = np.broadcast_to(_line_local(fesys, "mass"),
                          (fesys.mesh.nx, 3, 3))
    rows = np.repeat(fesys.facet_edofs, 3, axis=1)
    cols = np.tile(fesys.facet_edofs, (1, 3))
    return _accumulate(rows, cols, loc, (fesys.n_eta, fesys.n_eta))


def _t_visc(fesys):
    """One-sided normal-derivative pairing on the interface.

    Rows: displacement dofs; cols: velocity dofs.  Entry (i, j) integrates
    (d phi_j / dy) zeta_i over Sigma using the value of the y component
    gradient from the adjacent top row element.
    """
    s, w = EDGE_PTS, EDGE_W
    # The facet of the top row cell i is its local edge 1 -> 2, which the
    # reference points (s, 1 - s) trace out as x = x_i + s * hx at y = h_f.
    ref = np.column_stack([s, 1.0 - s])
    grads = p2_grads(ref)
    cells = fesys.sigma_cells
    gphys = np.einsum("eab,qib->eqia", fesys.jinv_t[cells], grads)
    dy = gphys[..., 1]
    Z = p2_line_values(s)
    loc = fesys.hx * np.einsum("q,qi,eqj->eij", w, Z, dy)
    rows = np.repeat(fesys.facet_edofs, 6, axis=1)
    cols = np.tile(fesys.p2_nodes[cells] + fesys.n_scalar, (1, 3))
    return _accumulate(rows, cols, loc, (fesys.n_eta, fesys.n_u))


def assemble(form_id, fesys, params=None):
    """Assemble one of the named bilinear forms as a CSR matrix.

    Supported ids (V velocity, Q pressure, E interface displacement,
    S scalar on the domain):

    - ``m_u``      (V x V)  (rho_f / dt) * integral u . v
    - ``a_visc``   (V x V)  2 mu_f * integral eps(u) : eps(v)
    - ``grad_p``   (V x Q)  integral grad(p) . v
    - ``div_u``    (Q x V)  integral div(u) q
    - ``k_p``      (Q x Q)  integral grad(p) . grad(q)
    - ``m_p``      (Q x Q)  integral p q
    - ``m_sigma_p``(Q x Q)  interface integral p q (traces)
    - ``m_e``      (E x E)  interface integral eta zeta
    - ``k_e``      (E x E)  interface integral eta' zeta'
    - ``m_sigma_e``(E x Q)  interface integral p zeta (pressure trace)
    - ``c_n``      (V x E)  interface integral zeta (v . n)
    - ``t_visc``   (E x V)  interface integral (du_y/dy) zeta, one-sided
    - ``k_omega``  (S x S)  integral grad(w) . grad(s), scalar P2

    Forms ``m_u`` and ``a_visc`` require `params`; the rest are geometric.
    """
    if form_id in ("m_u", "a_visc") and params is None:
        raise UsageError(f"form {form_id!r} requires params")

    key = form_id
    if form_id == "m_u":
        key = ("m_u", params.rho_f, params.dt)
    elif form_id == "a_visc":
        key = ("a_visc", params.mu_f)
    if key in fesys._forms:
        return fesys._forms[key]

    n_s, n_u, n_p, n_e = (fesys.n_scalar, fesys.n_u, fesys.n_p, fesys.n_eta)

    if form_id == "m_u":
        Ms = _scalar_p2_matrix(fesys, "mass_p2")
        mat = (params.rho_f / params.dt) * sp.block_diag((Ms, Ms)).tocsr()
    elif form_id == "a_visc":
        kxx = _scalar_p2_matrix(fesys, "kxx")
        kyy = _scalar_p2_matrix(fesys, "kyy")
        kxy = _scalar_p2_matrix(fesys, "kxy")
        mat = params.mu_f * sp.bmat(
            [[2.0 * kxx + kyy, kxy.T], [kxy, kxx + 2.0 * kyy]]).tocsr()
    elif form_id in ("grad_p", "div_u"):
        w, pts, det = TRI_W, TRI_PTS, fesys.det
        V2 = p2_values(pts)
        V1 = p1_values(pts)
        G1 = np.einsum("eab,ib->eia", fesys.jinv_t, P1_GRADS)
        G2 = np.einsum("eab,qib->eqia", fesys.jinv_t, p2_grads(pts))
        blocks = []
        for a in (0, 1):
            if form_id == "grad_p":
                loc = np.einsum("q,qi,ej,e->eij", w, V2, G1[..., a], det)
                rows = np.repeat(fesys.p2_nodes, 3, axis=1)
                cols = np.tile(fesys.p1_nodes, (1, 6))
                blocks.append(_accumulate(rows, cols, loc, (n_s, n_p)))
            else:
                loc = np.einsum("q,qi,eqj,e->eij", w, V1, G2[..., a], det)
                rows = np.repeat(fesys.p1_nodes, 6, axis=1)
                cols = np.tile(fesys.p2_nodes, (1, 3))
                blocks.append(_accumulate(rows, cols, loc, (n_p, n_s)))
        if form_id == "grad_p":
            mat = sp.vstack(blocks).tocsr()
        else:
            mat = sp.hstack(blocks).tocsr()
    elif form_id == "k_p":
        loc = _scalar_local(fesys, "stiff_p1")
        rows = np.repeat(fesys.p1_nodes, 3, axis=1)
        cols = np.tile(fesys.p1_nodes, (1, 3))
        mat = _accumulate(rows, cols, loc, (n_p, n_p))
    elif form_id == "m_p":
        loc = _scalar_local(fesys, "mass_p1")
        rows = np.repeat(fesys.p1_nodes, 3, axis=1)
        cols = np.tile(fesys.p1_nodes, (1, 3))
        mat = _accumulate(rows, cols, loc, (n_p, n_p))
    elif form_id == "m_sigma_p":
        loc1 = _line_local(fesys, "mass_p1")
        pairs = np.column_stack([fesys.p1_top[:-1], fesys.p1_top[1:]])
        loc = np.broadcast_to(loc1, (fesys.mesh.nx, 2, 2))
        rows = np.repeat(pairs, 2, axis=1)
        cols = np.tile(pairs, (1, 2))
        mat = _accumulate(rows, cols, loc, (n_p, n_p))
    elif form_id == "m_e":
        mat = _interface_mass(fesys)
    elif form_id == "k_e":
        loc = np.broadcast_to(_line_local(fesys, "stiff"),
                              (fesys.mesh.nx, 3, 3))
        rows = np.repeat(fesys.facet_edofs, 3, axis=1)
        cols = np.tile(fesys.facet_edofs, (1, 3))
        mat = _accumulate(rows, cols, loc, (n_e, n_e))
    elif form_id == "m_sigma_e":
        loc1 = _line_local(fesys, "mixed")
        pairs = np.column_stack([fesys.p1_top[:-1], fesys.p1_top[1:]])
        loc = np.broadcast_to(loc1, (fesys.mesh.nx, 3, 2))
        rows = np.repeat(fesys.facet_edofs, 2, axis=1)
        cols = np.tile(pairs, (1, 3))
        mat = _accumulate(rows, cols, loc, (n_e, n_p))
    elif form_id == "c_n":
        # The wall normal is e2, so the pairing only loads the y component
        # of the velocity trace, whose restriction to Sigma is the 1D P2
        # space itself: inject the interface mass at the trace dofs.
        me = _interface_mass(fesys).tocoo()
        vel_rows = fesys.n_scalar + fesys.sigma_trace_nodes[me.row]
        mat = sp.coo_matrix((me.data, (vel_rows, me.col)),
                            shape=(n_u, n_e)).tocsr()
    elif form_id == "t_visc":
        mat = _t_visc(fesys)
    elif form_id == "k_omega":
        mat = _scalar_p2_matrix(fesys, "stiff_p2")
    else:
        raise UsageError(f"unknown form id {form_id!r}")

    fesys._forms[key] = mat
    return mat


def apply_dirichlet(matrix, rhs, dofs, values):
    """Eliminate Dirichlet dofs symmetrically.

    Zeroes the constrained rows and columns, puts 1 on the diagonal, moves
    the coupling to the right-hand side and overwrites the constrained
    entries of the right-hand side with the prescribed values.

    Returns the modified (matrix, rhs) pair; the inputs are not changed.
    """
    matrix = matrix.tocsr()
    n = matrix.shape[0]
    if matrix.shape[0] != matrix.shape[1]:
        raise UsageError("Dirichlet elimination expects a square matrix")
    dofs = np.asarray(dofs, dtype=np.int64)
    values = np.broadcast_to(np.asarray(values, dtype=float), dofs.shape)
    if dofs.size and (dofs.min() < 0 or dofs.max() >= n):
        raise UsageError("Dirichlet dof index out of range")

    uniq, first = np.unique(dofs, return_index=True)
    if uniq.size != dofs.size:
        g = np.zeros(n)
        g[dofs] = values
        if not np.allclose(g[dofs], values, rtol=0.0, atol=0.0):
            raise UsageError("conflicting values for a repeated Dirichlet dof")
        dofs, values = uniq, g[uniq]

    g_full = np.zeros(n)
    g_full[dofs] = values
    new_rhs = np.asarray(rhs, dtype=float) - matrix @ g_full
    new_rhs[dofs] = values

    keep = np.ones(n)
    keep[dofs] = 0.0
    D = sp.diags(keep)
    pin = sp.coo_matrix((np.ones(dofs.size), (dofs, dofs)), shape=(n, n))
    new_matrix = (D @ matrix @ D + pin).tocsr()
    return new_matrix, new_rhs


def load_vector(fesys, space, func):
    """Right-hand side vector of integral f . (test function) over the domain.

    `func` receives coordinate arrays (x, y) at the quadrature points and
    returns the integrand values: a single array for scalar spaces ('p',
    'scalar'), a pair (f_x, f_y) for the vector space 'u'.
    """
    w, pts, det = TRI_W, TRI_PTS, fesys.det
    xq = (fesys.cell_origin[:, None, :]
          + np.einsum("eab,qb->eqa", fesys.cell_jac, pts))
    x, y = xq[..., 0], xq[..., 1]

    if space == "u":
        fx, fy = func(x, y)
        V = p2_values(pts)
        out = np.zeros(fesys.n_u)
        for comp, f in ((0, np.asarray(fx)), (1, np.asarray(fy))):
            loc = np.einsum("q,qi,eq,e->ei", w, V, f, det)
            np.add.at(out, fesys.p2_nodes + comp * fesys.n_scalar, loc)
        return out
    if space in ("p", "scalar"):
        f = np.asarray(func(x, y))
        if space == "p":
            V, nodes, n = p1_values(pts), fesys.p1_nodes, fesys.n_p
        else:
            V, nodes, n = p2_values(pts), fesys.p2_nodes, fesys.n_scalar
        loc = np.einsum("q,qi,eq,e->ei", w, V, f, det)
        out = np.zeros(n)
        np.add.at(out, nodes, loc)
        return out
    raise UsageError(f"unknown space {space!r} for a load vector")


def sigma_load_vector(fesys, func):
    """Interface load: integral over Sigma of f(x) * (displacement test)."""
    s, w = EDGE_PTS, EDGE_W
    Z = p2_line_values(s)
    x0 = np.arange(fesys.mesh.nx) * fesys.hx
    x = x0[:, None] + s[None, :] * fesys.hx
    f = np.asarray(func(x))
    loc = fesys.hx * np.einsum("q,qi,eq->ei", w, Z, f)
    out = np.zeros(fesys.n_eta)
    np.add.at(out, fesys.facet_edofs, loc)
    return out


def traction_load(u, p, fesys, params, m_sigma_e=None, t_visc=None):
    """Fluid traction load on the wall: the displacement-space dual vector of

        integral over Sigma of (p - 2 mu_f du_y/dy) zeta

    which is -sigma(u, p) n . n weakly, using one-sided traces from the
    fluid side.  Accepts FieldVectors or plain coefficient arrays.
    """
    u = as_array(u)
    p = as_array(p)
    if m_sigma_e is None:
        m_sigma_e = assemble("m_sigma_e", fesys)
    if t_visc is None:
        t_visc = assemble("t_visc", fesys)
    data = m_sigma_e @ p - 2.0 * params.mu_f * (t_visc @ u)
    return FieldVector("eta", data)


class HarmonicExtension:
    """Prefactored harmonic extension of wall data into the domain.

    Solves the scalar Laplace problem on the channel with the given values
    on Sigma and zero on the remaining boundary, in the P2 space.
    """

    def __init__(self, fesys):
        from . import linalg

        self.fesys = fesys
        k = assemble("k_omega", fesys)
        self.constrained = fesys.boundary_nodes_p2
        mat, _ = apply_dirichlet(k, np.zeros(fesys.n_scalar),
                                 self.constrained,
                                 np.zeros(self.constrained.size))
        self.k = k
        self.factor = linalg.factorize(mat)
        self.solve_count = 0

    def extend(self, eta):
        """Extended scalar field (P2 on the domain) matching eta on Sigma."""
        eta = as_array(eta)
        if eta.shape != (self.fesys.n_eta,):
            raise UsageError("extension data must live in the wall space")
        fes = self.fesys
        g = np.zeros(fes.n_scalar)
        g[fes.sigma_trace_nodes] = eta
        values = g[self.constrained]
        rhs = -(self.k @ g)
        rhs[self.constrained] = values
        self.solve_count += 1
        return self.factor(rhs)


def harmonic_extend(eta, fesys):
    """One-off harmonic extension; see HarmonicExtension for the repeated case."""
    return FieldVector("scalar", HarmonicExtension(fesys).extend(eta))
