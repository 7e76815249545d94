"""Curvilinear hexahedral meshes and their metric terms.

Element-local conventions
-------------------------
Reference coordinates ``xi = (xi1, xi2, xi3)`` in ``[-1, 1]^3``.  Nodal arrays
are indexed ``[element, i, j, k, ...]`` with ``i`` along ``xi1``.  Element
sides are numbered ``2*d + (0 for xi_d = -1, 1 for xi_d = +1)``.  A face
array keeps the two remaining axes in increasing order.

Geometry is stored as the element's polynomial map sampled on Gauss-Lobatto
nodes of order ``geo_order``.

Interior faces carry an orientation code ``o`` in ``0..7`` that maps the
right element's face array ``R`` into the left element's frame: transpose if
``o & 1``, then flip the first axis if ``o & 2``, then flip the second if
``o & 4``.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .basis import NodeKind, apply_along_axis, build_basis, lagrange_matrix
from .errors import ConfigurationError, MeshValidityError

__all__ = [
    "BC_KINDS",
    "Mesh",
    "MetricTerms",
    "bc_kind",
    "validate_tag",
    "build_box_mesh",
    "build_deformed_box_mesh",
    "build_channel_mesh",
    "remove_elements",
    "compute_metrics",
    "metric_identity_residual",
    "orientation_permutation",
    "check_connectivity",
]

BC_KINDS = ("Inflow", "Outflow", "FreeSlipWall", "NoSlipWall", "MovingWall", "Periodic")
SIDE_NAMES = ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")


def bc_kind(tag):
    """Boundary-condition kind of a tag; ``"NoSlipWall:flap"`` -> ``"NoSlipWall"``."""
    return tag.split(":", 1)[0]


def validate_tag(tag):
    if not isinstance(tag, str) or bc_kind(tag) not in BC_KINDS:
        raise ConfigurationError(
            f"unknown boundary tag {tag!r}; legal tags are {', '.join(BC_KINDS)} "
            "(optionally suffixed ':<patch name>')"
        )
    return tag


def orientation_permutation(n, code):
    """Flat index map ``perm`` with ``left_frame.flat = right.flat[perm]``."""
    a = np.arange(n * n).reshape(n, n)
    if code & 1:
        a = a.T
    if code & 2:
        a = a[::-1, :]
    if code & 4:
        a = a[:, ::-1]
    return a.ravel().copy()


@dataclass(eq=False)
class MetricTerms:
    """Metric terms of a mesh evaluated on a solution basis.

    ``Ja[..., d, k]`` is the Cartesian component ``k`` of the contravariant
    vector ``J a^d``.  ``face_nJ`` is the outward normal scaled by the surface
    Jacobian, ``face_normal`` its unit direction and ``face_Js`` its length.
    """

    basis: object
    x: np.ndarray
    J: np.ndarray
    Ja: np.ndarray
    face_x: np.ndarray
    face_nJ: np.ndarray
    face_normal: np.ndarray
    face_Js: np.ndarray
    volume: np.ndarray

    @property
    def mass(self):
        """Nodal quadrature weights ``J w_i w_j w_k``."""
        w = self.basis.weights
        return self.J * np.einsum("i,j,k->ijk", w, w, w)[None]


@dataclass(eq=False)
class Mesh:
    geometry: np.ndarray
    geo_order: int
    interior: np.ndarray
    boundary: np.ndarray
    boundary_tags: tuple
    metrics: MetricTerms | None = field(default=None, repr=False)

    def __post_init__(self):
        self.geometry = np.ascontiguousarray(self.geometry, dtype=float)
        self.interior = np.asarray(self.interior, dtype=np.int64).reshape(-1, 6)
        self.boundary = np.asarray(self.boundary, dtype=np.int64).reshape(-1, 2)
        self.boundary_tags = tuple(self.boundary_tags)
        for tag in set(self.boundary_tags):
            validate_tag(tag)
        if len(self.boundary_tags) != len(self.boundary):
            raise ConfigurationError("one tag is required per boundary face")

    @property
    def n_elements(self):
        return self.geometry.shape[0]

    @property
    def n_periodic(self):
        return int(self.interior[:, 5].sum())

    @property
    def bc_tags(self):
        tags = set(self.boundary_tags)
        if self.n_periodic:
            tags.add("Periodic")
        return frozenset(tags)

    def patch_faces(self, tag):
        """Indices into ``boundary`` of the faces carrying ``tag``."""
        return np.array([i for i, t in enumerate(self.boundary_tags) if t == tag], dtype=np.int64)

    def hash(self):
        h = hashlib.sha256()
        h.update(np.int64(self.geo_order).tobytes())
        h.update(self.geometry.astype("<f8").tobytes())
        h.update(self.interior.astype("<i8").tobytes())
        h.update(self.boundary.astype("<i8").tobytes())
        h.update("\n".join(self.boundary_tags).encode())
        return h.hexdigest()[:16]

    def same_as(self, other):
        return (
            self.geo_order == other.geo_order
            and np.array_equal(self.geometry, other.geometry)
            and np.array_equal(self.interior, other.interior)
            and np.array_equal(self.boundary, other.boundary)
            and self.boundary_tags == other.boundary_tags
        )


def check_connectivity(mesh):
    """Every element side must appear exactly once among all face records."""
    k = mesh.n_elements
    count = np.zeros((k, 6), dtype=int)
    fi, bd = mesh.interior, mesh.boundary
    for col_e, col_s in ((0, 1), (2, 3)):
        if len(fi) and (fi[:, col_e].min() < 0 or fi[:, col_e].max() >= k):
            raise MeshValidityError("interior face references a missing element")
        np.add.at(count, (fi[:, col_e], fi[:, col_s]), 1)
    if len(bd):
        if bd[:, 0].min() < 0 or bd[:, 0].max() >= k:
            raise MeshValidityError("boundary face references a missing element")
        np.add.at(count, (bd[:, 0], bd[:, 1]), 1)
    if np.any(count != 1):
        e, s = np.argwhere(count != 1)[0]
        raise MeshValidityError(
            f"element {e} side {s} appears {count[e, s]} times in the face list", element=int(e)
        )


# ---------------------------------------------------------------------------
# generators


def _check_extents(extents):
    ext = np.asarray(extents, dtype=float).reshape(3, 2)
    if np.any(ext[:, 1] - ext[:, 0] <= 0.0):
        raise ConfigurationError(f"extents must be increasing intervals, got {ext.tolist()}")
    return ext


def _structured_geometry(coords, geo_order):
    """Geometry nodes of a tensor grid given 1D vertex coordinate arrays."""
    geo = build_basis(NodeKind.GAUSS_LOBATTO, geo_order).nodes
    t = 0.5 * (geo + 1.0)
    per_axis = []
    for c in coords:
        lo, hi = c[:-1], c[1:]
        per_axis.append(lo[:, None] + (hi - lo)[:, None] * t[None, :])
    nx, ny, nz = (len(c) - 1 for c in coords)
    g = geo_order + 1
    geom = np.empty((nz, ny, nx, g, g, g, 3))
    gx, gy, gz = per_axis
    geom[..., 0] = gx[None, None, :, :, None, None]
    geom[..., 1] = gy[None, :, None, None, :, None]
    geom[..., 2] = gz[:, None, None, None, None, :]
    return geom.reshape(nx * ny * nz, g, g, g, 3)


def _structured_faces(nx, ny, nz, periodic, tags):
    def eid(i, j, k):
        return i + nx * (j + ny * k)

    shape = (nx, ny, nz)
    interior, boundary, btags = [], [], []
    for d in range(3):
        for k in range(nz):
            for j in range(ny):
                for i in range(nx):
                    idx = [i, j, k]
                    e = eid(i, j, k)
                    if idx[d] + 1 < shape[d]:
                        nb = list(idx)
                        nb[d] += 1
                        interior.append((e, 2 * d + 1, eid(*nb), 2 * d, 0, 0))
                    elif periodic[d]:
                        nb = list(idx)
                        nb[d] = 0
                        interior.append((e, 2 * d + 1, eid(*nb), 2 * d, 0, 1))
                    else:
                        boundary.append((e, 2 * d + 1))
                        btags.append(tags[2 * d + 1])
                    if idx[d] == 0 and not periodic[d]:
                        boundary.append((e, 2 * d))
                        btags.append(tags[2 * d])
    return np.array(interior, dtype=np.int64).reshape(-1, 6), np.array(boundary, dtype=np.int64).reshape(-1, 2), btags


def _resolve_tags(boundary_tags, default="FreeSlipWall"):
    tags = [default] * 6
    if boundary_tags:
        for name, tag in dict(boundary_tags).items():
            if name not in SIDE_NAMES:
                raise ConfigurationError(f"unknown box side {name!r}; expected one of {SIDE_NAMES}")
            tags[SIDE_NAMES.index(name)] = validate_tag(tag)
    return tags


def build_box_mesh(nx, ny, nz, extents, periodic=(False, False, False), geo_order=1, boundary_tags=None, grading=None):
    """Cartesian hexahedral mesh of a box.

    Parameters
    ----------
    extents : sequence of three ``(lo, hi)`` intervals
    periodic : three booleans
    boundary_tags : mapping from side name (``"xmin"`` ... ``"zmax"``) to tag,
        default ``FreeSlipWall`` on every non-periodic side.
    grading : optional three growth ratios for geometric vertex spacing.
    """
    for name, val in (("nx", nx), ("ny", ny), ("nz", nz)):
        if int(val) != val or val < 1:
            raise ConfigurationError(f"{name} must be a positive integer, got {val!r}")
    if int(geo_order) != geo_order or geo_order < 1:
        raise ConfigurationError(f"geometry order must be a positive integer, got {geo_order!r}")
    ext = _check_extents(extents)
    periodic = tuple(bool(p) for p in periodic)
    counts = (int(nx), int(ny), int(nz))
    coords = []
    for d in range(3):
        r = 1.0 if grading is None else float(grading[d])
        if r == 1.0:
            s = np.linspace(0.0, 1.0, counts[d] + 1)
        else:
            s = np.concatenate([[0.0], np.cumsum(r ** np.arange(counts[d]))])
            s /= s[-1]
        coords.append(ext[d, 0] + (ext[d, 1] - ext[d, 0]) * s)
    geom = _structured_geometry(coords, int(geo_order))
    tags = _resolve_tags(boundary_tags)
    interior, boundary, btags = _structured_faces(*counts, periodic, tags)
    return Mesh(geom, int(geo_order), interior, boundary, btags)


def _jacobian_on(geometry, geo_order, points):
    geo = build_basis(NodeKind.GAUSS_LOBATTO, geo_order)
    interp = lagrange_matrix(geo.nodes, points)
    dgeo = lagrange_matrix(geo.nodes, points) @ geo.diff
    jac = np.empty(geometry.shape[:1] + (len(points),) * 3 + (3, 3))
    for d in range(3):
        x = geometry
        for ax in range(3):
            x = apply_along_axis(dgeo if ax == d else interp, x, 1 + ax)
        jac[..., d, :] = x
    return np.linalg.det(jac)


def _check_positive_jacobian(mesh, points=None):
    if points is None:
        points = build_basis(NodeKind.GAUSS_LOBATTO, max(2 * mesh.geo_order, 2)).nodes
    det = _jacobian_on(mesh.geometry, mesh.geo_order, points)
    bad = np.min(det.reshape(det.shape[0], -1), axis=1) <= 0.0
    if np.any(bad):
        e = int(np.argmax(bad))
        raise MeshValidityError(
            f"mapping Jacobian is non-positive in element {e} (min J = {det[e].min():.3e})", element=e
        )


def build_deformed_box_mesh(nx, ny, nz, extents, periodic=(False, False, False), geo_order=3, amplitude=0.05, boundary_tags=None):
    """Box mesh with a smooth sinusoidal perturbation of the geometry nodes.

    The displacement ``amplitude * L_d * prod_k sin(2 pi s_k)`` (``s_k`` the
    normalised coordinate) vanishes on the box boundary and is periodic, so
    domain volume and periodic face pairing are unchanged.
    """
    mesh = build_box_mesh(nx, ny, nz, extents, periodic, geo_order, boundary_tags)
    if amplitude == 0.0:
        return mesh
    ext = _check_extents(extents)
    length = ext[:, 1] - ext[:, 0]
    s = (mesh.geometry - ext[:, 0]) / length
    bump = np.prod(np.sin(2.0 * np.pi * s), axis=-1)
    geom = mesh.geometry + amplitude * bump[..., None] * length
    out = dataclasses.replace(mesh, geometry=geom)
    _check_positive_jacobian(out)
    return out


def build_channel_mesh(nx, ny, nz, length=2.0, height=1.0, width=1.0, geo_order=1, grading=1.0,
                       bottom="NoSlipWall", top="MovingWall"):
    """Channel periodic in x and z between two walls at ``y = 0`` and ``y = height``."""
    return build_box_mesh(
        nx, ny, nz,
        [(0.0, length), (0.0, height), (0.0, width)],
        periodic=(True, False, True),
        geo_order=geo_order,
        boundary_tags={"ymin": bottom, "ymax": top},
        grading=(1.0, grading, 1.0),
    )


def remove_elements(mesh, elements, tag):
    """Cut ``elements`` out of ``mesh``; the exposed faces get boundary ``tag``.

    Useful to create closed internal "bodies" for force integration.
    """
    validate_tag(tag)
    removed = np.zeros(mesh.n_elements, dtype=bool)
    removed[np.asarray(elements, dtype=int)] = True
    new_id = np.cumsum(~removed) - 1
    interior, boundary, tags = [], [], []
    for el, sl, er, sr, o, per in mesh.interior:
        if removed[el] and removed[er]:
            continue
        if removed[el]:
            boundary.append((new_id[er], sr))
            tags.append(tag)
        elif removed[er]:
            boundary.append((new_id[el], sl))
            tags.append(tag)
        else:
            interior.append((new_id[el], sl, new_id[er], sr, o, per))
    for (e, s), t in zip(mesh.boundary, mesh.boundary_tags):
        if not removed[e]:
            boundary.append((new_id[e], s))
            tags.append(t)
    return Mesh(mesh.geometry[~removed], mesh.geo_order, interior, boundary, tags)


# ---------------------------------------------------------------------------
# metric terms


def _face_take(arr, side, first_axis=1):
    d, plus = divmod(side, 2)
    return np.take(arr, -1 if plus else 0, axis=first_axis + d)


def compute_metrics(mesh, basis):
    """Return a copy of ``mesh`` with :class:`MetricTerms` for ``basis``.

    Metric terms use the conservative curl form.  The curl potential
    ``X_l grad X_m`` is interpolated on Gauss-Lobatto nodes of the solution
    order, so ``J a^d`` is a polynomial of degree ``N``: the discrete metric
    identities hold to round-off on either node family and the face values
    depend only on face data.
    """
    order = basis.order
    if mesh.geo_order > order:
        raise ConfigurationError(
            f"geometry order {mesh.geo_order} exceeds solution order {order}: the mapping "
            "cannot be represented and metric identities would be violated"
        )
    lob = basis if basis.kind is NodeKind.GAUSS_LOBATTO else build_basis(NodeKind.GAUSS_LOBATTO, order)
    geo = build_basis(NodeKind.GAUSS_LOBATTO, mesh.geo_order)
    to_lob = lagrange_matrix(geo.nodes, lob.nodes)
    X = mesh.geometry
    for ax in range(3):
        X = apply_along_axis(to_lob, X, 1 + ax)
    dX = [apply_along_axis(lob.diff, X, 1 + d) for d in range(3)]

    def dxi(arr, d):
        return apply_along_axis(lob.diff, arr, 1 + d)

    # centring shrinks round-off in X_l grad X_m; the curl of the dropped term vanishes
    Xc = X - X.mean(axis=(1, 2, 3), keepdims=True)
    ja_lob = np.empty(X.shape[:4] + (3, 3))
    for k in range(3):
        m, l = (k + 1) % 3, (k + 2) % 3
        v = [Xc[..., l] * dX[d][..., m] for d in range(3)]
        curl = (
            dxi(v[2], 1) - dxi(v[1], 2),
            dxi(v[0], 2) - dxi(v[2], 0),
            dxi(v[1], 0) - dxi(v[0], 1),
        )
        for i in range(3):
            ja_lob[..., i, k] = -curl[i]

    to_sol = lagrange_matrix(lob.nodes, basis.nodes)

    def to_solution(arr, axes=(1, 2, 3)):
        if basis is lob:
            return arr
        for ax in axes:
            arr = apply_along_axis(to_sol, arr, ax)
        return arr

    x = to_solution(X)
    Ja = to_solution(ja_lob)
    jac = np.stack([to_solution(a) for a in dX], axis=-2)
    J = np.linalg.det(jac)
    if np.any(J <= 0.0):
        e = int(np.argwhere(J <= 0.0)[0, 0])
        raise MeshValidityError(f"non-positive Jacobian in element {e}", element=e)

    n = basis.n
    k_el = mesh.n_elements
    face_x = np.empty((k_el, 6, n, n, 3))
    face_nJ = np.empty((k_el, 6, n, n, 3))
    for s in range(6):
        d, plus = divmod(s, 2)
        sign = 1.0 if plus else -1.0
        face_x[:, s] = to_solution(_face_take(X, s), axes=(1, 2))
        face_nJ[:, s] = sign * to_solution(_face_take(ja_lob[..., d, :], s), axes=(1, 2))

    # one normal per interior face, shared by both sides
    fi = mesh.interior
    for code in np.unique(fi[:, 4]) if len(fi) else []:
        sel = fi[fi[:, 4] == code]
        inv = np.argsort(orientation_permutation(n, int(code)))
        left = face_nJ[sel[:, 0], sel[:, 1]].reshape(len(sel), n * n, 3)
        face_nJ[sel[:, 2], sel[:, 3]] = -left[:, inv].reshape(len(sel), n, n, 3)

    face_Js = np.linalg.norm(face_nJ, axis=-1)
    w = basis.weights
    volume = np.einsum("eijk,i,j,k->e", J, w, w, w)
    metrics = MetricTerms(
        basis=basis,
        x=x,
        J=J,
        Ja=Ja,
        face_x=face_x,
        face_nJ=face_nJ,
        face_normal=face_nJ / face_Js[..., None],
        face_Js=face_Js,
        volume=volume,
    )
    return dataclasses.replace(mesh, metrics=metrics)


def metric_identity_residual(metrics):
    """Max-norm of ``sum_d d(J a^d_k)/d xi_d`` over all nodes and components."""
    D = metrics.basis.diff
    res = sum(apply_along_axis(D, metrics.Ja[..., d, :], 1 + d) for d in range(3))
    return float(np.max(np.abs(res)))
