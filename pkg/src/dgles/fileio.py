"""Mesh and checkpoint containers: a text header followed by a binary payload.

Mesh file layout (version 1)::

    DGLES-MESH
    version 1
    geo_order <g>
    elements <K>
    interior_faces <F>
    boundary_faces <B>
    tags <T>
    tag <index> <name>          (T lines)
    end

immediately followed by little-endian arrays, in order:

* geometry ``float64[K, g+1, g+1, g+1, 3]``
* interior faces ``int64[F, 6]`` (eL, sL, eR, sR, orientation, periodic)
* boundary faces ``int64[B, 2]`` (element, side)
* boundary tag indices ``int32[B]`` into the tag table

Checkpoints use the same idea with a ``DGLES-CHECKPOINT`` header carrying
step, time, formulation, order, mesh hash and the state shape, followed by
``float64`` nodal conservative variables.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    MeshConnectivityError,
    MeshFormatError,
    MeshHeaderError,
    MeshTruncatedError,
    MeshValidityError,
    MeshVersionError,
)
from .mesh import Mesh, _check_positive_jacobian, check_connectivity, validate_tag

__all__ = ["MESH_VERSION", "CHECKPOINT_VERSION", "write_mesh", "read_mesh", "Checkpoint", "write_checkpoint", "read_checkpoint"]

MESH_MAGIC = "DGLES-MESH"
CHECKPOINT_MAGIC = "DGLES-CHECKPOINT"
MESH_VERSION = 1
CHECKPOINT_VERSION = 1
_END = b"\nend\n"


def _write_atomic(path, header, arrays):
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header.encode("ascii"))
        for a in arrays:
            fh.write(np.ascontiguousarray(a).tobytes())
    os.replace(tmp, path)


def _split_header(blob, magic):
    pos = blob.find(_END)
    if pos < 0:
        raise MeshHeaderError(f"no header terminator found; not a {magic} file", offset=0)
    try:
        lines = blob[:pos].decode("ascii").splitlines()
    except UnicodeDecodeError as exc:
        raise MeshHeaderError(f"header is not ASCII text: {exc}", offset=exc.start) from exc
    if not lines or lines[0].strip() != magic:
        first = lines[0] if lines else ""
        raise MeshHeaderError(f"bad magic line {first!r}; expected {magic}", offset=0)
    return lines[1:], pos + len(_END)


def _parse_fields(lines, required, repeated=()):
    fields, extra = {}, []
    for ln in lines:
        parts = ln.split(None, 1)
        if not parts:
            continue
        key = parts[0]
        value = parts[1].strip() if len(parts) > 1 else ""
        if key in repeated:
            extra.append(value)
        else:
            fields[key] = value
    missing = [k for k in required if k not in fields]
    if missing:
        raise MeshHeaderError(f"header is missing field(s) {missing}", offset=0)
    return fields, extra


def _int_field(fields, key):
    try:
        return int(fields[key])
    except ValueError as exc:
        raise MeshHeaderError(f"header field {key!r} is not an integer: {fields[key]!r}", offset=0) from exc


def _check_version(fields, expected):
    version = _int_field(fields, "version")
    if version != expected:
        raise MeshVersionError(f"file format version {version} is not supported (expected {expected})", offset=0)


class _Reader:
    def __init__(self, blob, offset):
        self.blob = blob
        self.offset = offset

    def take(self, dtype, shape, what):
        dtype = np.dtype(dtype)
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = count * dtype.itemsize
        end = self.offset + nbytes
        if end > len(self.blob):
            raise MeshTruncatedError(
                f"file truncated while reading {what}: needed bytes {self.offset}..{end}, "
                f"file ends at byte offset {len(self.blob)}",
                offset=len(self.blob),
            )
        arr = np.frombuffer(self.blob, dtype=dtype, count=count, offset=self.offset).reshape(shape)
        self.offset = end
        return arr.astype(dtype.newbyteorder("="))


def write_mesh(mesh, path):
    """Write ``mesh`` (geometry and connectivity only) to ``path``."""
    tags = sorted(set(mesh.boundary_tags))
    index = {t: i for i, t in enumerate(tags)}
    lines = [
        MESH_MAGIC,
        f"version {MESH_VERSION}",
        f"geo_order {mesh.geo_order}",
        f"elements {mesh.n_elements}",
        f"interior_faces {len(mesh.interior)}",
        f"boundary_faces {len(mesh.boundary)}",
        f"tags {len(tags)}",
    ]
    lines += [f"tag {i} {t}" for i, t in enumerate(tags)]
    lines.append("end\n")
    tag_idx = np.array([index[t] for t in mesh.boundary_tags], dtype="<i4")
    _write_atomic(
        path,
        "\n".join(lines),
        [mesh.geometry.astype("<f8"), mesh.interior.astype("<i8"), mesh.boundary.astype("<i8"), tag_idx],
    )


def read_mesh(path):
    """Read a mesh written by :func:`write_mesh`.

    Raises
    ------
    MeshHeaderError, MeshVersionError, MeshTruncatedError
        Malformed header, unsupported version, or a payload that ends early.
    MeshConnectivityError
        Face records referencing elements or sides that do not exist.
    ConfigurationError
        An unknown boundary tag in the tag table.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    lines, offset = _split_header(blob, MESH_MAGIC)
    fields, tag_lines = _parse_fields(
        lines, ("version", "geo_order", "elements", "interior_faces", "boundary_faces", "tags"), repeated=("tag",)
    )
    _check_version(fields, MESH_VERSION)
    g = _int_field(fields, "geo_order")
    k = _int_field(fields, "elements")
    nf = _int_field(fields, "interior_faces")
    nb = _int_field(fields, "boundary_faces")
    nt = _int_field(fields, "tags")
    if min(g, k) < 1 or min(nf, nb, nt) < 0 or len(tag_lines) != nt:
        raise MeshHeaderError(f"inconsistent header counts in {path}", offset=0)
    table = {}
    for entry in tag_lines:
        parts = entry.split(None, 1)
        if len(parts) != 2 or not parts[0].isdigit():
            raise MeshHeaderError(f"bad tag line {entry!r}", offset=0)
        table[int(parts[0])] = validate_tag(parts[1].strip())

    rd = _Reader(blob, offset)
    geometry = rd.take("<f8", (k, g + 1, g + 1, g + 1, 3), "geometry")
    interior = rd.take("<i8", (nf, 6), "interior faces")
    boundary = rd.take("<i8", (nb, 2), "boundary faces")
    tag_idx = rd.take("<i4", (nb,), "boundary tags")
    if rd.offset != len(blob):
        raise MeshFormatError(f"{len(blob) - rd.offset} trailing bytes after payload", offset=rd.offset)

    for arr, cols, what in ((interior, (1, 3), "interior"), (boundary, (1,), "boundary")):
        if len(arr) and (arr[:, list(cols)].min() < 0 or arr[:, list(cols)].max() > 5):
            raise MeshConnectivityError(f"{what} face record has a side index outside 0..5")
    if len(interior) and (interior[:, 4].min() < 0 or interior[:, 4].max() > 7):
        raise MeshConnectivityError("interior face record has an orientation code outside 0..7")
    bad = [i for i in np.unique(tag_idx) if int(i) not in table]
    if bad:
        raise MeshConnectivityError(f"boundary faces reference undefined tag indices {bad}")
    mesh = Mesh(geometry, g, interior, boundary, [table[int(i)] for i in tag_idx])
    try:
        check_connectivity(mesh)
    except MeshValidityError as exc:
        raise MeshConnectivityError(f"dangling or duplicated face reference: {exc}") from exc
    _check_positive_jacobian(mesh)
    return mesh


@dataclass
class Checkpoint:
    step: int
    time: float
    formulation: str
    order: int
    mesh_hash: str
    state: np.ndarray


def write_checkpoint(path, state, step, time, formulation, order, mesh_hash):
    state = np.asarray(state, dtype=float)
    lines = [
        CHECKPOINT_MAGIC,
        f"version {CHECKPOINT_VERSION}",
        f"step {int(step)}",
        f"time {float(time).hex()}",
        f"formulation {formulation}",
        f"order {int(order)}",
        f"mesh_hash {mesh_hash}",
        "shape " + " ".join(str(s) for s in state.shape),
        "end\n",
    ]
    _write_atomic(path, "\n".join(lines), [state.astype("<f8")])


def read_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    lines, offset = _split_header(blob, CHECKPOINT_MAGIC)
    fields, _ = _parse_fields(lines, ("version", "step", "time", "formulation", "order", "mesh_hash", "shape"))
    _check_version(fields, CHECKPOINT_VERSION)
    try:
        shape = tuple(int(s) for s in fields["shape"].split())
        t = float.fromhex(fields["time"])
    except ValueError as exc:
        raise MeshHeaderError(f"bad checkpoint header: {exc}", offset=0) from exc
    state = _Reader(blob, offset).take("<f8", shape, "state")
    return Checkpoint(
        step=_int_field(fields, "step"),
        time=t,
        formulation=fields["formulation"],
        order=_int_field(fields, "order"),
        mesh_hash=fields["mesh_hash"],
        state=state,
    )
