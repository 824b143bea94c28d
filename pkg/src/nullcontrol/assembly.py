"""P1 space-time finite elements and assembly of the mixed saddle system.

Unknowns per vertex: u (2 components), m (2), k (1); multipliers lambda (2)
and mu (1).  The primal block W is laid out [u1 u2 m1 m2 k], the multiplier
block M as [l1 l2 mu], each field occupying a contiguous run of nv entries.

The mixed forms are

    b1((u,m,k),(u',m',k')) = int_Q u.u' + chi m.m'
    B1((u,m,k),(l,mu))     = int_Q l.[u + rho3^-1 (rho4 m)_t + grad(rho4 k)]
                             - nu0 int_Q grad(rho3^-1 l) : grad(rho4 m)
                             - int_Q rho3^-1 mu div(rho4 m)

with all weights evaluated pointwise at quadrature nodes, the time
derivative (rho4 m)_t expanded as rho4 m_t + rho4' m, and grad/div acting
in the two spatial directions only.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .mesh import SpaceTimeMesh, TAG_INITIAL, TAG_TERMINAL, chi_smooth, default_cutoff
from .weights import CarlemanSetup, ell, ell_prime, mu_log, named_weight

# 4-point, degree-2 tetrahedron rule (barycentric points, weights sum to 1)
_A4 = (5.0 + 3.0 * np.sqrt(5.0)) / 20.0
_B4 = (5.0 - np.sqrt(5.0)) / 20.0
TET_RULE_4 = (
    np.array([
        [_A4, _B4, _B4, _B4],
        [_B4, _A4, _B4, _B4],
        [_B4, _B4, _A4, _B4],
        [_B4, _B4, _B4, _A4],
    ]),
    np.full(4, 0.25),
)

# 11-point, degree-4 Keast rule (weights normalized to sum to 1)
_G1 = 1.0 / 14.0
_B11 = (1.0 + np.sqrt(5.0 / 14.0)) / 4.0
_C11 = (1.0 - np.sqrt(5.0 / 14.0)) / 4.0


def _rule11():
    pts = [[0.25, 0.25, 0.25, 0.25]]
    wts = [-74.0 / 5625.0]
    for i in range(4):
        p = [_G1] * 4
        p[i] = 1.0 - 3.0 * _G1
        pts.append(p)
        wts.append(343.0 / 45000.0)
    import itertools
    seen = set()
    for pair in itertools.combinations(range(4), 2):
        p = [_C11] * 4
        p[pair[0]] = p[pair[1]] = _B11
        key = tuple(round(v, 12) for v in p)
        if key not in seen:
            seen.add(key)
            pts.append(p)
            wts.append(28.0 / 1125.0)
    return np.array(pts), np.array(wts) * 6.0


TET_RULE_11 = _rule11()


@dataclass
class FieldFunction:
    """P1 coefficient field on the space-time mesh (scalar or 2-vector)."""

    mesh: SpaceTimeMesh
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        nv = self.mesh.num_vertices
        if self.data.shape not in ((nv,), (nv, 2)):
            raise ValidationError(
                f"field data shape {self.data.shape} does not match {nv} vertices")

    @property
    def components(self):
        return 1 if self.data.ndim == 1 else 2

    @classmethod
    def zero(cls, mesh, components=2):
        shape = (mesh.num_vertices,) if components == 1 else (mesh.num_vertices, 2)
        return cls(mesh, np.zeros(shape))

    def copy(self):
        return FieldFunction(self.mesh, self.data.copy())


def element_data(mesh: SpaceTimeMesh):
    """Per-tet volumes and constant P1 basis gradients, cached on the mesh."""
    if "element_data" not in mesh._cache:
        x = mesh.vertices[mesh.tets]          # (M,4,3)
        e = x[:, 1:, :] - x[:, :1, :]         # (M,3,3) rows = edge vectors
        det = np.linalg.det(e)
        vols = np.abs(det) / 6.0
        inv = np.linalg.inv(e)                # columns map to barycentric grads
        grads = np.empty((x.shape[0], 4, 3))
        grads[:, 1:, :] = np.transpose(inv, (0, 2, 1))
        grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
        mesh._cache["element_data"] = (vols, grads)
    return mesh._cache["element_data"]


def quad_points(mesh: SpaceTimeMesh, rule=TET_RULE_4):
    """Physical quadrature coordinates: (M, nq, 3) rows (t, x1, x2)."""
    pts, _ = rule
    x = mesh.vertices[mesh.tets]
    return np.einsum("qi,mic->mqc", pts, x)


def field_at_quad(f: FieldFunction, rule=TET_RULE_4):
    """Values of a P1 field at the quadrature nodes: (M, nq) or (M, nq, 2)."""
    pts, _ = rule
    nodal = f.data[f.mesh.tets]
    if f.components == 1:
        return np.einsum("qi,mi->mq", pts, nodal)
    return np.einsum("qi,mic->mqc", pts, nodal)


def field_gradient(f: FieldFunction):
    """Per-tet constant gradient: (M, 3) scalar or (M, 3, 2) vector fields.

    The leading gradient axis is (t, x1, x2).
    """
    _, grads = element_data(f.mesh)
    nodal = f.data[f.mesh.tets]
    if f.components == 1:
        return np.einsum("mid,mi->md", grads, nodal)
    return np.einsum("mid,mic->mdc", grads, nodal)


def _scatter(mesh, loc, row_off, col_off):
    """Scatter (M,4,4) local blocks into COO triplets with global offsets."""
    tets = mesh.tets
    rows = np.repeat(tets, 4, axis=1).ravel() + row_off
    cols = np.tile(tets, (1, 4)).ravel() + col_off
    return rows, cols, loc.ravel()


def _mat_val_val(mesh, cq, rule):
    pts, w = rule
    vols, _ = element_data(mesh)
    loc = np.einsum("q,mq,qi,qj->mij", w, cq, pts, pts)
    return loc * vols[:, None, None]


def _mat_val_grad(mesh, cq, axis, rule):
    pts, w = rule
    vols, grads = element_data(mesh)
    tmp = np.einsum("q,mq,qi->mi", w, cq, pts)
    loc = np.einsum("mi,mj->mij", tmp, grads[:, :, axis])
    return loc * vols[:, None, None]


def _mat_grad_grad(mesh, cq, axes, rule):
    pts, w = rule
    vols, grads = element_data(mesh)
    tmp = np.einsum("q,mq->m", w, cq)
    loc = np.zeros((mesh.num_tets, 4, 4))
    for a in axes:
        loc += np.einsum("mi,mj->mij", grads[:, :, a], grads[:, :, a])
    return loc * (tmp * vols)[:, None, None]


def _block_from_local(mesh, loc, shape):
    rows, cols, vals = _scatter(mesh, loc, 0, 0)
    return sp.coo_matrix((vals, (rows, cols)), shape=shape).tocsr()


def scalar_block(mesh, kind, cq, rule=TET_RULE_4, axis=None):
    """Assemble one nv x nv scalar block of a given pairing kind."""
    nv = mesh.num_vertices
    if kind == "val_val":
        loc = _mat_val_val(mesh, cq, rule)
    elif kind == "val_grad":
        loc = _mat_val_grad(mesh, cq, axis, rule)
    elif kind == "grad_xy":
        loc = _mat_grad_grad(mesh, cq, (1, 2), rule)
    else:
        raise ValueError(kind)
    return _block_from_local(mesh, loc, (nv, nv))


@dataclass(frozen=True)
class WeightCoeffs:
    """Time coefficients of the B1 form, evaluated on arrays of t values.

    c1 = rho3^-1 rho4, c2 = rho3^-1 d(rho4)/dt, c3 = rho4.  Tests substitute
    constants here to expose the unweighted structure of the form.
    """

    c1: callable
    c2: callable
    c3: callable

    @classmethod
    def from_setup(cls, setup: CarlemanSetup):
        r3 = named_weight("rho3")
        r4 = named_weight("rho4")

        def c1(t):
            return np.exp(mu_log(r4, t, setup) - mu_log(r3, t, setup))

        def c2(t):
            length = np.asarray(ell(t, setup))
            lp = np.asarray(ell_prime(t, setup))
            coeff = setup.exponent_coeff(r4)
            factor = -4.0 * lp * coeff / length ** 5 + r4.r * lp / length
            return c1(t) * factor

        def c3(t):
            return np.exp(mu_log(r4, t, setup))

        return cls(c1=c1, c2=c2, c3=c3)

    @classmethod
    def unit(cls):
        one = lambda t: np.ones_like(np.asarray(t, dtype=float))
        zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))
        return cls(c1=one, c2=zero, c3=one)


@dataclass(frozen=True)
class FeLayout:
    """Global dof layout and constraint bookkeeping."""

    nv: int
    nt: int
    free_scalar: np.ndarray      # boolean mask of non-lateral vertices
    w_fields: tuple = ("u1", "u2", "m1", "m2", "k")
    m_fields: tuple = ("l1", "l2", "mu")

    @property
    def n_w(self):
        return 5 * self.nv

    @property
    def n_m(self):
        return 3 * self.nv

    @property
    def total_dofs(self):
        return 8 * self.nv

    def w_offset(self, name):
        return self.w_fields.index(name) * self.nv

    def m_offset(self, name):
        return self.m_fields.index(name) * self.nv

    def w_free_mask(self):
        mask = np.ones(self.n_w, dtype=bool)
        for f in ("m1", "m2"):
            off = self.w_offset(f)
            mask[off:off + self.nv] = self.free_scalar
        return mask

    def m_free_mask(self):
        mask = np.ones(self.n_m, dtype=bool)
        for f in ("l1", "l2"):
            off = self.m_offset(f)
            mask[off:off + self.nv] = self.free_scalar
        return mask


def make_layout(mesh: SpaceTimeMesh) -> FeLayout:
    free = np.ones(mesh.num_vertices, dtype=bool)
    free[mesh.lateral_vertex_ids()] = False
    return FeLayout(nv=mesh.num_vertices, nt=mesh.nt, free_scalar=free)


def assemble_b1(mesh: SpaceTimeMesh, setup: CarlemanSetup, cutoff=None,
                rule=TET_RULE_4):
    """Primal block: space-time L2 pairing of u plus the chi-weighted one of m."""
    if cutoff is None:
        cutoff = default_cutoff(mesh.domain)
    nv = mesh.num_vertices
    q = quad_points(mesh, rule)
    ones = np.ones(q.shape[:2])
    chi = chi_smooth(q[:, :, 1], q[:, :, 2], mesh.domain, cutoff)
    mass = scalar_block(mesh, "val_val", ones, rule)
    mass_chi = scalar_block(mesh, "val_val", chi, rule)
    zero = sp.csr_matrix((nv, nv))
    return sp.block_diag([mass, mass, mass_chi, mass_chi, zero]).tocsr()


def assemble_B1(mesh: SpaceTimeMesh, setup: CarlemanSetup, nu0: float,
                coeffs: WeightCoeffs = None, rule=TET_RULE_4):
    """Constraint block pairing (lambda, mu) rows against (u, m, k) columns."""
    if coeffs is None:
        coeffs = WeightCoeffs.from_setup(setup)
    nv = mesh.num_vertices
    tq = quad_points(mesh, rule)[:, :, 0]
    c1q, c2q, c3q = coeffs.c1(tq), coeffs.c2(tq), coeffs.c3(tq)

    mass = scalar_block(mesh, "val_val", np.ones_like(tq), rule)
    conv_t = scalar_block(mesh, "val_grad", c1q, rule, axis=0)
    mass_c2 = scalar_block(mesh, "val_val", c2q, rule)
    stiff = scalar_block(mesh, "grad_xy", c1q, rule)
    lm_block = conv_t + mass_c2 - nu0 * stiff
    grad_k = [scalar_block(mesh, "val_grad", c3q, rule, axis=a) for a in (1, 2)]
    div_m = [scalar_block(mesh, "val_grad", c1q, rule, axis=a) for a in (1, 2)]

    zero = sp.csr_matrix((nv, nv))
    # rows (l1, l2, mu) x cols (u1, u2, m1, m2, k)
    return sp.bmat([
        [mass, zero, lm_block, zero, grad_k[0]],
        [zero, mass, zero, lm_block, grad_k[1]],
        [zero, zero, -div_m[0], -div_m[1], zero],
    ]).tocsr()


def _initial_face_mass(mesh: SpaceTimeMesh):
    """Exact P1 mass matrix of the t=0 face triangulation (global indices)."""
    if "initial_mass" not in mesh._cache:
        tris = mesh.boundary_faces[mesh.face_tags == TAG_INITIAL]
        p = mesh.vertices[tris][:, :, 1:]
        area = 0.5 * np.abs(
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
        loc = np.full((tris.shape[0], 3, 3), 1.0 / 12.0)
        loc[:, np.arange(3), np.arange(3)] = 1.0 / 6.0
        loc *= area[:, None, None]
        rows = np.repeat(tris, 3, axis=1).ravel()
        cols = np.tile(tris, (1, 3)).ravel()
        nv = mesh.num_vertices
        mesh._cache["initial_mass"] = sp.coo_matrix(
            (loc.ravel(), (rows, cols)), shape=(nv, nv)).tocsr()
    return mesh._cache["initial_mass"]


def assemble_rhs(mesh: SpaceTimeMesh, setup: CarlemanSetup, f: FieldFunction,
                 y0: np.ndarray, cutoff=None, rule=TET_RULE_4,
                 coeffs: WeightCoeffs = None):
    """Load vector: int_Q rho4 f.m' plus the t=0 surface term with y0.

    `y0` holds (ns, 2) nodal values on the spatial grid of one time level.
    Only m entries are nonzero, which is what makes the lambda = -u identity
    an exact consequence of the assembled system.
    """
    if coeffs is None:
        coeffs = WeightCoeffs.from_setup(setup)
    nv = mesh.num_vertices
    rhs = np.zeros(5 * nv)
    pts, w = rule
    vols, _ = element_data(mesh)

    if f is not None:
        q = quad_points(mesh, rule)
        c3q = coeffs.c3(q[:, :, 0])
        fq = field_at_quad(f, rule)                      # (M, nq, 2)
        contrib = np.einsum("q,mq,mqc,qi->mic", w, c3q, fq, pts)
        contrib *= vols[:, None, None]
        for comp, name in enumerate(("m1", "m2")):
            off = 2 * nv + comp * nv
            np.add.at(rhs, mesh.tets.ravel() + off,
                      contrib[:, :, comp].ravel())

    if y0 is not None:
        y0 = np.asarray(y0, dtype=float)
        ns = mesh.spatial_count
        if y0.shape != (ns, 2):
            raise ValidationError(f"y0 must have shape ({ns}, 2)")
        rho4_at_0 = float(coeffs.c3(np.array(0.0)))
        mass0 = _initial_face_mass(mesh)
        full = np.zeros((nv, 2))
        full[mesh.level_slice(0)] = y0
        weighted = rho4_at_0 * (mass0 @ full)
        rhs[2 * nv:3 * nv] += weighted[:, 0]
        rhs[3 * nv:4 * nv] += weighted[:, 1]

    return rhs


def _element_h2(mesh: SpaceTimeMesh):
    """Squared longest edge per tet."""
    if "h2" not in mesh._cache:
        x = mesh.vertices[mesh.tets]
        pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        d2 = np.stack([((x[:, i] - x[:, j]) ** 2).sum(axis=1) for i, j in pairs])
        mesh._cache["h2"] = d2.max(axis=0)
    return mesh._cache["h2"]


def pressure_stabilization(mesh: SpaceTimeMesh, coeffs: WeightCoeffs,
                           alpha=1.0, rule=TET_RULE_4):
    """h^2-scaled gradient stabilization blocks for the pressure-like fields.

    Equal-order P1 leaves both k and mu with spurious modes invisible to the
    interior multiplier tests (the classical checkerboard instability, plus
    boundary-layer modes: k has fewer constraint rows than dofs).  Returns
    (S_k, S_mu), each nv x nv SPD on non-t-only modes, weighted by the same
    time coefficients that scale the corresponding B1 couplings so the
    perturbation is O(h^2) relative to the terms it stabilizes.
    """
    tq = quad_points(mesh, rule)[:, :, 0]
    h2 = _element_h2(mesh)[:, None]
    s_k = scalar_block(mesh, "grad_xy", alpha * h2 * coeffs.c3(tq) ** 2, rule)
    s_mu = scalar_block(mesh, "grad_xy", alpha * h2 * coeffs.c1(tq) ** 2, rule)
    return s_k, s_mu


def _slice_constraint_rows(mesh: SpaceTimeMesh):
    """Per-time-level spatial lumped-mass rows (nt+1, nv)."""
    tris_global = mesh.boundary_faces[mesh.face_tags == TAG_INITIAL]
    p = mesh.vertices[tris_global][:, :, 1:]
    area = 0.5 * np.abs(
        (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
        - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    ns = mesh.spatial_count
    lumped = np.zeros(ns)
    np.add.at(lumped, tris_global.ravel(), np.repeat(area / 3.0, 3))
    rows, cols, vals = [], [], []
    for lvl in range(mesh.nt + 1):
        ids = mesh.level_slice(lvl)
        rows.extend([lvl] * ns)
        cols.extend(ids.tolist())
        vals.extend(lumped.tolist())
    return sp.coo_matrix((vals, (rows, cols)),
                         shape=(mesh.nt + 1, mesh.num_vertices)).tocsr()


@dataclass
class AssembledSaddleSystem:
    """Reduced symmetric indefinite system K x = b with scatter maps."""

    K: sp.csr_matrix
    rhs: np.ndarray
    layout: FeLayout
    mesh: SpaceTimeMesh
    w_free_idx: np.ndarray
    m_free_idx: np.ndarray
    n_slice_rows: int

    def split_solution(self, x):
        """Scatter a reduced solution vector back to full per-field arrays."""
        nv = self.layout.nv
        nw, nm = self.w_free_idx.size, self.m_free_idx.size
        w_full = np.zeros(self.layout.n_w)
        m_full = np.zeros(self.layout.n_m)
        w_full[self.w_free_idx] = x[:nw]
        m_full[self.m_free_idx] = x[nw:nw + nm]
        fields = {}
        for i, name in enumerate(self.layout.w_fields):
            fields[name] = w_full[i * nv:(i + 1) * nv]
        for i, name in enumerate(self.layout.m_fields):
            fields[name] = m_full[i * nv:(i + 1) * nv]
        return fields

    def dump_matrix(self, path):
        """Coordinate text dump (row, col, value per line)."""
        coo = self.K.tocoo()
        with open(path, "w") as fh:
            fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{r} {c} {v:.17g}\n")


def apply_constraints(b1, B1, rhs_w, mesh: SpaceTimeMesh,
                      setup: CarlemanSetup = None, coeffs: WeightCoeffs = None,
                      stab_alpha=1.0) -> AssembledSaddleSystem:
    """Eliminate lateral m and lambda dofs, stabilize k and mu, add mean rows.

    The spatially-constant-per-level modes of k have exactly zero columns in
    B1 (their interpolants depend on t alone), and the matching modes of mu
    span the left kernel of the divergence pairing, so both families get one
    lumped-mass zero-mean row per time level.  The remaining equal-order
    pressure modes are removed by the h^2 gradient stabilization, added to
    the (k,k) diagonal of the primal block and subtracted on the (mu,mu)
    diagonal of the otherwise zero multiplier block; the bordered system is
    then nonsingular, symmetric, and an O(h^2)-consistent perturbation.
    """
    if coeffs is None:
        if setup is None:
            raise ValidationError("apply_constraints needs a setup or coeffs")
        coeffs = WeightCoeffs.from_setup(setup)
    layout = make_layout(mesh)
    nv = layout.nv
    w_idx = np.nonzero(layout.w_free_mask())[0]
    m_idx = np.nonzero(layout.m_free_mask())[0]

    s_k, s_mu = pressure_stabilization(mesh, coeffs, alpha=stab_alpha)
    zero = sp.csr_matrix((nv, nv))
    b1_stab = b1 + sp.block_diag([zero, zero, zero, zero, s_k]).tocsr()
    mu_stab = sp.block_diag([zero, zero, s_mu]).tocsr()

    b1_ff = b1_stab[w_idx][:, w_idx]
    B1_f = B1[m_idx][:, w_idx]
    mu_ff = mu_stab[m_idx][:, m_idx]
    rhs_f = rhs_w[w_idx]

    slice_rows = _slice_constraint_rows(mesh)
    n_lvl = slice_rows.shape[0]
    # k occupies the last nv entries of the W block, mu the last of M
    Sk = sp.hstack([sp.csr_matrix((n_lvl, 4 * nv)), slice_rows]).tocsr()[:, w_idx]
    Smu = sp.hstack([sp.csr_matrix((n_lvl, 2 * nv)), slice_rows]).tocsr()[:, m_idx]

    K = sp.bmat([
        [b1_ff, B1_f.T, Sk.T, None],
        [B1_f, -mu_ff, None, Smu.T],
        [Sk, None, None, None],
        [None, Smu, None, None],
    ], format="csr")
    rhs = np.concatenate([rhs_f, np.zeros(m_idx.size + 2 * n_lvl)])
    return AssembledSaddleSystem(
        K=K, rhs=rhs, layout=layout, mesh=mesh,
        w_free_idx=w_idx, m_free_idx=m_idx, n_slice_rows=n_lvl,
    )
