"""Structured simplicial mesh of the space-time cylinder Q = ]0,T[ x Omega.

Vertices carry coordinates (t, x1, x2).  Each box cell of the nx*ny*nt grid
is split into six tetrahedra sharing the cell's main diagonal (Kuhn split),
which makes the triangulation conforming and the total volume exact.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .geometry import BoxDomain

TAG_LATERAL = 0
TAG_INITIAL = 1
TAG_TERMINAL = 2

TAG_NAMES = {TAG_LATERAL: "lateral", TAG_INITIAL: "initial", TAG_TERMINAL: "terminal"}
TAG_CODES = {v: k for k, v in TAG_NAMES.items()}


@dataclass(frozen=True)
class CutoffSpec:
    """Ramp width of the smooth cutoff between omega1 and the boundary of omega."""

    margin: float

    def __post_init__(self):
        if self.margin <= 0.0:
            raise ValidationError("cutoff margin must be positive")


def default_cutoff(domain: BoxDomain) -> CutoffSpec:
    """Half the minimal gap between omega1 and the boundary of omega."""
    gap = domain.omega1.gap_to(domain.omega)
    return CutoffSpec(margin=0.5 * gap)


@dataclass(frozen=True)
class SpaceTimeMesh:
    """Conforming tetrahedral mesh of Q with tagged boundary faces."""

    domain: BoxDomain
    nx: int
    ny: int
    nt: int
    vertices: np.ndarray          # (nv, 3) rows (t, x1, x2)
    tets: np.ndarray              # (ntet, 4) vertex ids, positively oriented
    boundary_faces: np.ndarray    # (nface, 3) vertex ids
    face_tags: np.ndarray         # (nface,) TAG_* codes
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_tets(self):
        return self.tets.shape[0]

    @property
    def spatial_count(self):
        """Vertices per time level."""
        return (self.nx + 1) * (self.ny + 1)

    @property
    def time_levels(self):
        return np.linspace(0.0, self.domain.T, self.nt + 1)

    def level_of_vertex(self, ids=None):
        lv = np.arange(self.num_vertices) // self.spatial_count
        return lv if ids is None else lv[ids]

    def level_slice(self, level):
        """Vertex ids of one time level, ordered like the spatial grid."""
        ns = self.spatial_count
        return np.arange(level * ns, (level + 1) * ns)

    def spatial_points(self):
        """(ns, 2) coordinates (x1, x2) of the per-level spatial grid."""
        return self.vertices[self.level_slice(0)][:, 1:]

    def lateral_vertex_ids(self):
        """All vertices lying on the lateral boundary Sigma."""
        x1 = self.vertices[:, 1]
        x2 = self.vertices[:, 2]
        a, b = self.domain.a, self.domain.b
        on = (x1 == 0.0) | (x1 == a) | (x2 == 0.0) | (x2 == b)
        return np.nonzero(on)[0]

    def tet_volumes(self):
        if "volumes" not in self._cache:
            x = self.vertices[self.tets]
            e = x[:, 1:, :] - x[:, :1, :]
            self._cache["volumes"] = np.abs(np.linalg.det(e)) / 6.0
        return self._cache["volumes"]

    def volume(self):
        return float(self.tet_volumes().sum())

    def spatial_triangles(self):
        """Triangulation of one time level induced by the initial face tags.

        Returned as (ntri, 3) indices into the per-level spatial ordering.
        """
        if "spatial_triangles" not in self._cache:
            tris = self.boundary_faces[self.face_tags == TAG_INITIAL]
            self._cache["spatial_triangles"] = np.sort(tris, axis=1)
        return self._cache["spatial_triangles"]


# permutations of the axis order (t, x1, x2); odd ones get their last two
# vertices swapped to keep a positive orientation
_PERMS = list(itertools.permutations(range(3)))


def _perm_sign(p):
    s = 1
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            s = -s
    return s


def build_mesh(domain: BoxDomain, nx: int, ny: int, nt: int) -> SpaceTimeMesh:
    """Kuhn-split box mesh: (nx+1)(ny+1)(nt+1) vertices, 6 nx ny nt tets."""
    if min(nx, ny, nt) < 2:
        raise ValidationError("nx, ny, nt must all be at least 2")

    ns = (nx + 1) * (ny + 1)
    tg = np.linspace(0.0, domain.T, nt + 1)
    xg = np.linspace(0.0, domain.a, nx + 1)
    yg = np.linspace(0.0, domain.b, ny + 1)
    TT, YY, XX = np.meshgrid(tg, yg, xg, indexing="ij")
    vertices = np.column_stack([TT.ravel(), XX.ravel(), YY.ravel()])

    def vid(it, ix, iy):
        return it * ns + iy * (nx + 1) + ix

    # vertex-id increments for the unit steps along (t, x1, x2)
    step = np.array([ns, 1, nx + 1], dtype=np.int64)

    it, iy, ix = np.meshgrid(np.arange(nt), np.arange(ny), np.arange(nx),
                             indexing="ij")
    origin = (it.ravel() * ns + iy.ravel() * (nx + 1) + ix.ravel()).astype(np.int64)

    tets = np.empty((6 * origin.size, 4), dtype=np.int64)
    for k, perm in enumerate(_PERMS):
        v0 = origin
        v1 = v0 + step[perm[0]]
        v2 = v1 + step[perm[1]]
        v3 = v2 + step[perm[2]]
        block = np.column_stack([v0, v1, v2, v3])
        if _perm_sign(perm) < 0:
            block = block[:, [0, 1, 3, 2]]
        tets[k::6] = block

    faces = np.concatenate([
        tets[:, [1, 2, 3]], tets[:, [0, 2, 3]],
        tets[:, [0, 1, 3]], tets[:, [0, 1, 2]],
    ])
    faces_sorted = np.sort(faces, axis=1)
    uniq, counts = np.unique(faces_sorted, axis=0, return_counts=True)
    boundary = uniq[counts == 1]

    t = vertices[boundary, 0]
    on_initial = np.all(t == 0.0, axis=1)
    on_terminal = np.all(t == domain.T, axis=1)
    tags = np.full(boundary.shape[0], TAG_LATERAL, dtype=np.int64)
    tags[on_initial] = TAG_INITIAL
    tags[on_terminal] = TAG_TERMINAL

    return SpaceTimeMesh(
        domain=domain, nx=nx, ny=ny, nt=nt, vertices=vertices, tets=tets,
        boundary_faces=boundary, face_tags=tags,
    )


def chi_omega(x1, x2, domain: BoxDomain):
    """Indicator of the open control region omega; accepts arrays."""
    return np.asarray(domain.omega.contains(x1, x2), dtype=float)[()]


def _axis_ramp(x, lo, hi, margin):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x >= lo) & (x <= hi)
    out[inside] = 1.0
    left = (x < lo) & (x > lo - margin)
    out[left] = 0.5 * (1.0 + np.cos(np.pi * (lo - x[left]) / margin))
    right = (x > hi) & (x < hi + margin)
    out[right] = 0.5 * (1.0 + np.cos(np.pi * (x[right] - hi) / margin))
    return out


def chi_smooth(x1, x2, domain: BoxDomain, cutoff: CutoffSpec = None):
    """C^1 tensor-product cutoff: 1 on omega1, 0 outside omega.

    A cosine smoothstep of width `cutoff.margin` bridges omega1 and the
    complement of omega along each axis.
    """
    if cutoff is None:
        cutoff = default_cutoff(domain)
    gap = domain.omega1.gap_to(domain.omega)
    if cutoff.margin > gap + 1e-14:
        raise ValidationError(
            f"cutoff margin {cutoff.margin} exceeds the omega1-to-omega gap {gap}")
    w1 = domain.omega1
    r1 = _axis_ramp(x1, w1.x1min, w1.x1max, cutoff.margin)
    r2 = _axis_ramp(x2, w1.x2min, w1.x2max, cutoff.margin)
    out = r1 * r2
    return float(out) if out.ndim == 0 else out


def export_mesh(mesh: SpaceTimeMesh, path):
    """Write the documented plain-text mesh format."""
    with open(path, "w") as fh:
        fh.write("# nullcontrol space-time mesh v1\n")
        fh.write(f"{mesh.num_vertices} {mesh.num_tets} {mesh.boundary_faces.shape[0]} "
                 f"{mesh.nx} {mesh.ny} {mesh.nt}\n")
        fh.write(f"{mesh.domain.a:.17g} {mesh.domain.b:.17g} {mesh.domain.T:.17g} "
                 f"{mesh.domain.omega.x1min:.17g} {mesh.domain.omega.x1max:.17g} "
                 f"{mesh.domain.omega.x2min:.17g} {mesh.domain.omega.x2max:.17g}\n")
        for t, x1, x2 in mesh.vertices:
            fh.write(f"v {t:.17g} {x1:.17g} {x2:.17g}\n")
        for a, b, c, d in mesh.tets:
            fh.write(f"t {a} {b} {c} {d}\n")
        for (a, b, c), tag in zip(mesh.boundary_faces, mesh.face_tags):
            fh.write(f"f {a} {b} {c} {TAG_NAMES[int(tag)]}\n")


def load_mesh(path) -> SpaceTimeMesh:
    """Read a mesh written by export_mesh."""
    from .geometry import Rect

    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# nullcontrol space-time mesh"):
            raise ValidationError(f"{path}: not a nullcontrol mesh file")
        nv, ntet, nface, nx, ny, nt = map(int, fh.readline().split())
        a, b, T, ox1, ox2, oy1, oy2 = map(float, fh.readline().split())
        domain = BoxDomain(a=a, b=b, T=T, omega=Rect(ox1, ox2, oy1, oy2))
        vertices = np.empty((nv, 3))
        tets = np.empty((ntet, 4), dtype=np.int64)
        faces = np.empty((nface, 3), dtype=np.int64)
        tags = np.empty(nface, dtype=np.int64)
        for i in range(nv):
            parts = fh.readline().split()
            vertices[i] = [float(p) for p in parts[1:4]]
        for i in range(ntet):
            parts = fh.readline().split()
            tets[i] = [int(p) for p in parts[1:5]]
        for i in range(nface):
            parts = fh.readline().split()
            faces[i] = [int(p) for p in parts[1:4]]
            tags[i] = TAG_CODES[parts[4]]
    return SpaceTimeMesh(domain=domain, nx=nx, ny=ny, nt=nt, vertices=vertices,
                         tets=tets, boundary_faces=faces, face_tags=tags)
