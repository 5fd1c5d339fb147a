"""Triangulated surfaces with per-vertex fields.

A :class:`TriMesh` is immutable: arrays are flagged read-only and every
operation returns a new mesh.  Vector fields are stored as ``(V, 3)``
arrays, which flatten to xyz-interleaved state vectors.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

SCALAR = "scalar"
VECTOR3 = "vector3"
_WIDTH = {SCALAR: 1, VECTOR3: 3}


class MeshError(ValueError):
    """Invalid mesh, field or state vector."""


class StlParseError(MeshError):
    """Malformed STL input. ``offset`` is a byte offset (binary) or a
    1-based line number (ASCII), as given by ``unit``."""

    def __init__(self, message: str, offset: int | None = None, unit: str = "byte"):
        if offset is not None:
            message = f"{message} (at {unit} {offset})"
        super().__init__(message)
        self.offset = offset
        self.unit = unit


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Field:
    name: str
    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in _WIDTH:
            raise MeshError(f"field {self.name!r}: unknown kind {self.kind!r}")
        vals = np.asarray(self.values, dtype=np.float64)
        if self.kind == VECTOR3:
            if vals.ndim == 1:
                if vals.size % 3:
                    raise MeshError(f"field {self.name!r}: vector length {vals.size} not a multiple of 3")
                vals = vals.reshape(-1, 3)
            if vals.ndim != 2 or vals.shape[1] != 3:
                raise MeshError(f"field {self.name!r}: expected shape (V, 3), got {vals.shape}")
        elif vals.ndim != 1:
            raise MeshError(f"field {self.name!r}: expected shape (V,), got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals.reshape(len(vals), -1)).any(axis=1))[0])
            raise MeshError(f"field {self.name!r}: non-finite value at vertex {bad}")
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def n_vertices(self) -> int:
        return self.values.shape[0]

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass(frozen=True)
class StateVector:
    data: np.ndarray
    layout: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "layout", tuple((str(n), str(k)) for n, k in self.layout))
        object.__setattr__(self, "data", _frozen(np.asarray(self.data, dtype=np.float64).reshape(-1)))

    def width(self) -> int:
        """Values per vertex implied by the layout."""
        return layout_width(self.layout)


def layout_width(layout: Sequence[tuple[str, str]]) -> int:
    try:
        return sum(_WIDTH[kind] for _, kind in layout)
    except KeyError as exc:
        raise MeshError(f"unknown field kind {exc.args[0]!r} in layout") from None


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray
    faces: np.ndarray
    fields: Mapping[str, Field] = field(default_factory=dict)

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=np.float64)
        faces = np.asarray(self.faces, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3:
            raise MeshError(f"vertices must have shape (V, 3), got {verts.shape}")
        if faces.size == 0:
            faces = faces.reshape(0, 3)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshError(f"faces must have shape (F, 3), got {faces.shape}")
        if faces.size and (faces.min() < 0 or faces.max() >= len(verts)):
            raise MeshError("face index out of range")
        degenerate = (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
        if degenerate.any():
            raise MeshError(f"degenerate face {int(np.flatnonzero(degenerate)[0])} (repeated vertex index)")
        for name, f in self.fields.items():
            if f.n_vertices != len(verts):
                raise MeshError(f"field {name!r} has {f.n_vertices} values, mesh has {len(verts)} vertices")
        object.__setattr__(self, "vertices", _frozen(verts))
        object.__setattr__(self, "faces", _frozen(faces))
        object.__setattr__(self, "fields", dict(self.fields))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def with_vertices(self, vertices: np.ndarray) -> "TriMesh":
        return TriMesh(vertices, self.faces, self.fields)

    def with_fields(self, *fields: Field) -> "TriMesh":
        merged = dict(self.fields)
        merged.update({f.name: f for f in fields})
        return TriMesh(self.vertices, self.faces, merged)

    def face_geometry(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(unit_normals, areas)`` per face, right-hand rule from winding."""
        v = self.vertices
        f = self.faces
        cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        twice_area = np.linalg.norm(cross, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            normals = cross / twice_area[:, None]
        return normals, 0.5 * twice_area


# ---------------------------------------------------------------------------
# state vectors


def flatten_fields(mesh: TriMesh, names: Sequence[str]) -> StateVector:
    """Concatenate the named fields, in order, into one state vector."""
    parts = []
    layout = []
    for name in names:
        if name not in mesh.fields:
            raise MeshError(f"mesh has no field named {name!r}")
        fld = mesh.fields[name]
        parts.append(fld.flat)
        layout.append((name, fld.kind))
    data = np.concatenate(parts) if parts else np.zeros(0)
    return StateVector(data, tuple(layout))


def unflatten_fields(mesh: TriMesh, state: StateVector) -> TriMesh:
    V = mesh.n_vertices
    expected = V * layout_width(state.layout)
    if state.data.size != expected:
        raise MeshError(
            f"state vector has length {state.data.size}, layout needs {expected} for {V} vertices"
        )
    fields = []
    pos = 0
    for name, kind in state.layout:
        n = V * _WIDTH[kind]
        fields.append(Field(name, kind, state.data[pos : pos + n]))
        pos += n
    return mesh.with_fields(*fields)


# ---------------------------------------------------------------------------
# STL


def _dedup(points: np.ndarray, weld_tol: float | None) -> tuple[np.ndarray, np.ndarray]:
    """Unique vertices in order of first appearance, plus the inverse map."""
    if weld_tol:
        keys = np.round(points / weld_tol).astype(np.int64)
    else:
        # exact bit equality
        keys = np.ascontiguousarray(points).view(np.uint64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return points[first[order]], rank[inverse]


def _parse_binary(data: bytes) -> np.ndarray:
    (count,) = struct.unpack_from("<I", data, 80)
    need = 84 + 50 * count
    if len(data) < need:
        done = (len(data) - 84) // 50
        raise StlParseError(f"truncated binary STL: facet {done} of {count} incomplete", 84 + 50 * done)
    rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
    facets = np.frombuffer(data, dtype=rec, count=count, offset=84)
    return facets["v"].astype(np.float64)


def _parse_ascii(text: str) -> np.ndarray:
    tris = []
    state = "start"
    current: list[list[float]] = []
    lineno = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts:
            continue
        key = parts[0].lower()
        if state == "start":
            if key != "solid":
                raise StlParseError("expected 'solid'", lineno, "line")
            state = "solid"
        elif state == "solid":
            if key == "facet":
                state = "facet"
                current = []
            elif key == "endsolid":
                state = "end"
            else:
                raise StlParseError(f"unexpected {parts[0]!r} in solid", lineno, "line")
        elif state == "facet":
            if key == "outer":
                state = "loop"
            else:
                raise StlParseError("expected 'outer loop'", lineno, "line")
        elif state == "loop":
            if key == "vertex":
                if len(parts) != 4:
                    raise StlParseError("vertex needs three coordinates", lineno, "line")
                try:
                    current.append([float(x) for x in parts[1:]])
                except ValueError:
                    raise StlParseError("bad vertex coordinate", lineno, "line") from None
            elif key == "endloop":
                if len(current) != 3:
                    raise StlParseError(f"facet has {len(current)} vertices, expected 3", lineno, "line")
                state = "endloop"
            else:
                raise StlParseError(f"unexpected {parts[0]!r} in loop", lineno, "line")
        elif state == "endloop":
            if key != "endfacet":
                raise StlParseError("expected 'endfacet'", lineno, "line")
            tris.append(current)
            state = "solid"
        elif state == "end":
            raise StlParseError("content after 'endsolid'", lineno, "line")
    if state not in ("end", "solid"):
        raise StlParseError("unexpected end of file inside facet", lineno, "line")
    return np.array(tris, dtype=np.float64).reshape(-1, 3, 3)


def load_stl(path, weld_tol: float | None = None) -> TriMesh:
    """Read an ASCII or binary STL, merging vertices with identical coordinates.

    ``weld_tol`` switches to tolerance-based welding (off by default).
    """
    data = Path(path).read_bytes()
    binary = False
    if len(data) >= 84:
        (count,) = struct.unpack_from("<I", data, 80)
        binary = len(data) == 84 + 50 * count or not data.lstrip()[:5].lower() == b"solid"
    elif not data.lstrip()[:5].lower() == b"solid":
        raise StlParseError("file too short for binary STL header", len(data))
    if binary:
        tris = _parse_binary(data)
    else:
        try:
            tris = _parse_ascii(data.decode("ascii"))
        except UnicodeDecodeError as exc:
            raise StlParseError("non-ASCII byte in ASCII STL", exc.start) from None
    if len(tris) == 0:
        raise StlParseError("STL contains no facets")
    verts, inverse = _dedup(tris.reshape(-1, 3), weld_tol)
    return TriMesh(verts, inverse.reshape(-1, 3))


def save_stl(mesh: TriMesh, path, format: str = "binary") -> None:
    if mesh.n_faces == 0:
        raise MeshError("cannot write an STL with zero faces")
    normals, _ = mesh.face_geometry()
    normals = np.nan_to_num(normals)
    tris = mesh.vertices[mesh.faces]
    if format == "binary":
        rec = np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
        out = np.zeros(mesh.n_faces, dtype=rec)
        out["n"] = normals
        out["v"] = tris
        header = b"romopt binary STL".ljust(80, b"\0")
        Path(path).write_bytes(header + struct.pack("<I", mesh.n_faces) + out.tobytes())
    elif format == "ascii":
        buf = io.StringIO()
        buf.write("solid romopt\n")
        for n, tri in zip(normals, tris):
            buf.write(f"  facet normal {n[0]!r} {n[1]!r} {n[2]!r}\n    outer loop\n")
            for p in tri:
                buf.write(f"      vertex {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
            buf.write("    endloop\n  endfacet\n")
        buf.write("endsolid romopt\n")
        Path(path).write_text(buf.getvalue())
    else:
        raise ValueError(f"unknown STL format {format!r}")


# ---------------------------------------------------------------------------
# field CSV


def _columns(name: str, kind: str) -> list[str]:
    if kind == SCALAR:
        return [name]
    return [f"{name}_x", f"{name}_y", f"{name}_z"]


def write_fields_csv(path, fields: Iterable[Field]) -> None:
    """Write fields as ``vertex_id,<cols...>``; one row per vertex."""
    fields = list(fields)
    if not fields:
        raise MeshError("no fields to write")
    V = fields[0].n_vertices
    header = ["vertex_id"]
    cols = []
    for f in fields:
        if f.n_vertices != V:
            raise MeshError("fields disagree on vertex count")
        header += _columns(f.name, f.kind)
        cols.append(f.values.reshape(V, -1))
    table = np.hstack(cols)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, row in enumerate(table):
            w.writerow([i] + [repr(float(x)) for x in row])


def read_fields_csv(path, layout: Sequence[tuple[str, str]], n_vertices: int | None = None) -> list[Field]:
    """Read fields written by :func:`write_fields_csv`, checking the header
    against ``layout`` and, if given, the vertex count."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MeshError(f"{path}: empty field file")
    expected = ["vertex_id"]
    for name, kind in layout:
        expected += _columns(name, kind)
    if rows[0] != expected:
        raise MeshError(f"{path}: header {rows[0]} does not match layout {expected}")
    body = rows[1:]
    if n_vertices is not None and len(body) != n_vertices:
        raise MeshError(f"{path}: {len(body)} rows, mesh has {n_vertices} vertices")
    try:
        table = np.array([[float(x) for x in r] for r in body], dtype=np.float64).reshape(len(body), len(expected))
    except ValueError as exc:
        raise MeshError(f"{path}: unparsable row ({exc})") from None
    ids = table[:, 0]
    if not np.array_equal(ids, np.arange(len(body))):
        raise MeshError(f"{path}: vertex_id column must ascend from 0")
    bad = ~np.isfinite(table[:, 1:]).all(axis=1)
    if bad.any():
        raise MeshError(f"{path}: non-finite value at vertex {int(np.flatnonzero(bad)[0])}")
    out = []
    pos = 1
    for name, kind in layout:
        w = _WIDTH[kind]
        vals = table[:, pos : pos + w]
        out.append(Field(name, kind, vals[:, 0] if kind == SCALAR else vals))
        pos += w
    return out
