"""Flat-triangle surface meshes for the benchmark geometries.

Every interface of a scene gets its own :class:`TriangleMesh` patch whose
right-hand-rule normals point from the interface's ``from_region`` into its
``to_region``.  Patches of touching boxes are cut from one rectilinear grid,
so they share vertex coordinates along faces, edges and junctions.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scene import DomainGraph, build_domain_graph


class MeshError(ValueError):
    pass


@dataclass
class Element:
    vertices: np.ndarray  # (3, 3)
    centroid: np.ndarray
    normal: np.ndarray
    area: float


@dataclass
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray = None

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.tags is None:
            self.tags = np.zeros(len(self.triangles), dtype=np.int64)
        self.tags = np.ascontiguousarray(self.tags, dtype=np.int64).reshape(-1)
        if len(self.tags) != len(self.triangles):
            raise MeshError("one tag per triangle required")

    def __len__(self):
        return len(self.triangles)

    @property
    def corners(self) -> np.ndarray:
        """Triangle corner coordinates, shape (n, 3, 3)."""
        return self.vertices[self.triangles]

    @property
    def centroids(self) -> np.ndarray:
        return self.corners.mean(axis=1)

    def _cross(self):
        c = self.corners
        return np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._cross(), axis=1)

    @property
    def normals(self) -> np.ndarray:
        cr = self._cross()
        return cr / np.linalg.norm(cr, axis=1)[:, None]

    @property
    def diameters(self) -> np.ndarray:
        c = self.corners
        e = np.stack([c[:, 1] - c[:, 0], c[:, 2] - c[:, 1], c[:, 0] - c[:, 2]], axis=1)
        return np.linalg.norm(e, axis=2).max(axis=1)

    def element(self, index: int) -> Element:
        return Element(self.corners[index].copy(), self.centroids[index], self.normals[index], float(self.areas[index]))

    def flipped(self) -> "TriangleMesh":
        """Same surface with reversed winding, hence reversed normals."""
        return TriangleMesh(self.vertices.copy(), self.triangles[:, [0, 2, 1]].copy(), self.tags.copy())

    def with_tag(self, tag: int) -> "TriangleMesh":
        return TriangleMesh(self.vertices, self.triangles, np.full(len(self.triangles), tag))

    def total_area(self) -> float:
        return float(self.areas.sum())

    def validate(self):
        if len(self.triangles) == 0 or len(self.vertices) == 0:
            raise MeshError("empty mesh")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise MeshError("triangle references a vertex index out of range")
        used = np.zeros(len(self.vertices), dtype=bool)
        used[self.triangles.ravel()] = True
        if not used.all():
            raise MeshError(f"{int((~used).sum())} vertices are not referenced by any triangle")
        if not np.all(self.areas > 0):
            raise MeshError("degenerate triangle (zero area)")
        return self


def merge_meshes(meshes) -> TriangleMesh:
    verts, tris, tags = [], [], []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        tags.append(m.tags)
        offset += len(m.vertices)
    return TriangleMesh(np.vstack(verts), np.vstack(tris), np.concatenate(tags))


def _compact(vertices, triangles, tags) -> TriangleMesh:
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    used, inverse = np.unique(triangles.ravel(), return_inverse=True)
    return TriangleMesh(np.asarray(vertices, dtype=float)[used], inverse.reshape(-1, 3), tags)


# --- icosphere ---------------------------------------------------------------

def _icosahedron():
    t = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=float)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    return v / np.linalg.norm(v, axis=1)[:, None], f


def icosphere(center=(0.0, 0.0, 0.0), radius: float = 1.0, subdivisions: int = 0, tag: int = 0) -> TriangleMesh:
    """Subdivided icosahedron projected to a sphere; 20 * 4**subdivisions outward triangles."""
    if not radius > 0:
        raise MeshError("radius must be positive")
    if subdivisions < 0:
        raise MeshError("subdivisions must be >= 0")
    verts, faces = _icosahedron()
    verts = list(verts)
    for _ in range(subdivisions):
        cache = {}

        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]])
        faces = np.array(new)
    v = np.array(verts)
    # enforce outward winding face by face
    n = np.cross(v[faces[:, 1]] - v[faces[:, 0]], v[faces[:, 2]] - v[faces[:, 0]])
    inward = np.einsum("ij,ij->i", n, v[faces].mean(axis=1)) < 0
    faces[inward] = faces[inward][:, [0, 2, 1]]
    v = np.asarray(center, dtype=float) + radius * v
    return TriangleMesh(v, faces, np.full(len(faces), tag))


# --- boxes -------------------------------------------------------------------

def _axis_lines(bounds, spacing=None, divisions=None):
    """Sorted grid coordinates along one axis.

    ``bounds`` are the breakpoints every box face must land on; each gap is
    split into ``divisions`` pieces or into pieces no longer than ``spacing``.
    """
    b = np.unique(np.asarray(bounds, dtype=float))
    lines = [b[0]]
    for lo, hi in zip(b[:-1], b[1:]):
        n = divisions if divisions is not None else max(1, int(math.ceil((hi - lo) / spacing - 1e-9)))
        lines.extend(np.linspace(lo, hi, n + 1)[1:])
    return np.array(lines)


def _box_faces(lines, labels):
    """Quads between differently-labelled grid cells.

    ``labels`` has one padding layer of region 1 on every side.  Yields
    ``(lower_label, upper_label, axis, corner_node_indices)`` where the quad
    normal +axis points from the lower-index cell into the upper-index one.
    """
    shape = labels.shape
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(0, shape[axis] - 1)
        hi[axis] = slice(1, shape[axis])
        a, b = labels[tuple(lo)], labels[tuple(hi)]
        for idx in np.argwhere(a != b):
            cell = idx.copy()  # cell index in padded grid of the lower cell
            # node index along axis of the shared face = cell[axis] (padding shift cancels)
            u, v = (axis + 1) % 3, (axis + 2) % 3
            base = cell - 1
            base[axis] = cell[axis]
            corners = []
            for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
                node = base.copy()
                node[u] += du
                node[v] += dv
                corners.append(tuple(int(c) for c in node))
            yield int(a[tuple(idx)]), int(b[tuple(idx)]), axis, corners


def box_union_meshes(boxes, pairs, spacing=None, divisions=None):
    """Conforming interface patches for a union of axis-aligned boxes.

    ``boxes`` is a list of ``(region, min_corner, max_corner)``; cells not in
    any box belong to region 1.  ``pairs`` lists the oriented interfaces; one
    :class:`TriangleMesh` is returned per pair, tagged by its position.
    """
    mins = np.array([b[1] for b in boxes], dtype=float)
    maxs = np.array([b[2] for b in boxes], dtype=float)
    if np.any(maxs <= mins):
        raise MeshError("degenerate box")
    grid = [_axis_lines(np.concatenate([mins[:, d], maxs[:, d]]), spacing, divisions) for d in range(3)]
    centers = [0.5 * (g[:-1] + g[1:]) for g in grid]
    labels = np.ones(tuple(len(c) + 2 for c in centers), dtype=np.int64)
    cx, cy, cz = np.meshgrid(*centers, indexing="ij")
    inner = labels[1:-1, 1:-1, 1:-1]
    for region, lo, hi in boxes:
        inside = (cx > lo[0]) & (cx < hi[0]) & (cy > lo[1]) & (cy < hi[1]) & (cz > lo[2]) & (cz < hi[2])
        if np.any(inside & (inner != 1)):
            raise MeshError(f"box of region {region} overlaps another box")
        inner[inside] = region

    index = {frozenset(p): (b, p) for b, p in enumerate(pairs)}
    quads = {b: [] for b in range(len(pairs))}
    for low, up, axis, corners in _box_faces(grid, labels):
        key = frozenset((low, up))
        if key not in index:
            raise MeshError(f"regions {low} and {up} touch but no interface is declared")
        b, (i, j) = index[key]
        # corners are counter-clockwise about +axis; reverse if the normal must be -axis
        if (i, j) == (up, low):
            corners = corners[::-1]
        quads[b].append(corners)

    meshes = []
    for b in range(len(pairs)):
        if not quads[b]:
            raise MeshError(f"interface {pairs[b]} has no faces in this box arrangement")
        nodes = {}
        tris = []
        for q in quads[b]:
            ids = [nodes.setdefault(c, len(nodes)) for c in q]
            tris.append([ids[0], ids[1], ids[2]])
            tris.append([ids[0], ids[2], ids[3]])
        coords = np.array([[grid[d][c[d]] for d in range(3)] for c in nodes])
        meshes.append(TriangleMesh(coords, tris, np.full(len(tris), b)))
    return meshes


def cuboid_mesh(min_corner, max_corner, divisions_per_axis=(1, 1, 1), tag: int = 0) -> TriangleMesh:
    """Outward-oriented surface of one box; each face gridded into split quads."""
    lo = np.asarray(min_corner, dtype=float)
    hi = np.asarray(max_corner, dtype=float)
    if np.any(hi <= lo):
        raise MeshError("degenerate box")
    div = np.broadcast_to(np.asarray(divisions_per_axis, dtype=int), (3,))
    if np.any(div < 1):
        raise MeshError("divisions must be >= 1")
    verts, tris = [], []
    for axis in range(3):
        u, v = (axis + 1) % 3, (axis + 2) % 3
        for side, coord in ((-1, lo[axis]), (1, hi[axis])):
            su = np.linspace(lo[u], hi[u], div[u] + 1)
            sv = np.linspace(lo[v], hi[v], div[v] + 1)
            base = len(verts)
            for a in su:
                for b in sv:
                    p = np.empty(3)
                    p[axis], p[u], p[v] = coord, a, b
                    verts.append(p)
            nv = div[v] + 1
            for ia in range(div[u]):
                for ib in range(div[v]):
                    q = [base + ia * nv + ib, base + (ia + 1) * nv + ib,
                         base + (ia + 1) * nv + ib + 1, base + ia * nv + ib + 1]
                    # (u, v, axis) is right-handed, so q is ccw about +axis
                    if side < 0:
                        q = q[::-1]
                    tris.append([q[0], q[1], q[2]])
                    tris.append([q[0], q[2], q[3]])
    mesh = _compact(np.array(verts), tris, np.full(len(tris), tag))
    # merge duplicated edge vertices so the surface is closed
    key = np.round(mesh.vertices, 12)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    return TriangleMesh(uniq, inv.reshape(-1)[mesh.triangles], mesh.tags)


# --- benchmark scenes ------------------------------------------------------

def build_scene_spheres(r_inner=0.5, r_outer=1.0, subdivisions=2, epsilons=(1.0, 2.0, 3.0), omega=5.0):
    """Concentric spheres: host 1, shell 2, core 3, interfaces [(1,2), (3,2)].

    Normals point from the first region into the second: inward on the
    outer sphere (host into shell) and outward on the inner (core into shell).
    """
    if not 0 < r_inner < r_outer:
        raise MeshError("need 0 < r_inner < r_outer")
    graph = build_domain_graph(epsilons, [(1, 2, "outer"), (3, 2, "inner")], omega)
    meshes = [icosphere((0, 0, 0), r_outer, subdivisions, tag=0).flipped(),
              icosphere((0, 0, 0), r_inner, subdivisions, tag=1)]
    return graph, meshes


def build_scene_single_sphere(radius=1.0, subdivisions=2, epsilons=(1.0, 2.0), omega=1.0):
    graph = build_domain_graph(epsilons, [(1, 2, "sphere")], omega)
    return graph, [icosphere((0, 0, 0), radius, subdivisions, tag=0).flipped()]


TWO_CUBOIDS = [(2, (-1.0, -0.5, -0.5), (0.0, 0.5, 0.5)), (3, (0.0, -0.5, -0.5), (1.0, 0.5, 0.5))]

# lower pair stacked along x2, upper pair along x1, so each upper box touches both lower ones
FOUR_BOXES = [
    (2, (-1.0, -1.0, -0.5), (1.0, 0.0, 0.0)),
    (3, (-1.0, 0.0, -0.5), (1.0, 1.0, 0.0)),
    (4, (-1.0, -1.0, 0.0), (0.0, 1.0, 0.5)),
    (5, (0.0, -1.0, 0.0), (1.0, 1.0, 0.5)),
]
FOUR_BOX_PAIRS = [(1, 2), (1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (3, 4), (4, 5), (5, 2), (5, 3)]


def build_scene_boxes(boxes, pairs, epsilons, omega, spacing=None, divisions=None):
    graph = build_domain_graph(epsilons, [(i, j, f"patch{i}{j}") for i, j in pairs], omega)
    meshes = box_union_meshes(boxes, pairs, spacing=spacing, divisions=divisions)
    return graph, meshes


def build_scene_two_cuboids(divisions=2, epsilons=(1.0, 2.0, 3.0), omega=5.0):
    """Two unit cubes sharing one face; interfaces [(1,2), (1,3), (3,2)]."""
    return build_scene_boxes(TWO_CUBOIDS, [(1, 2), (1, 3), (3, 2)], epsilons, omega, divisions=divisions)


def build_scene_four_boxes(divisions=1, epsilons=(1.0, 2.0, 10.0, 0.1, 3.0), omega=5.0):
    return build_scene_boxes(FOUR_BOXES, FOUR_BOX_PAIRS, epsilons, omega, divisions=divisions)


def orient_meshes(base_graph: DomainGraph, graph: DomainGraph, meshes):
    """Flip patches whose orientation in ``graph`` differs from ``base_graph``."""
    out = []
    for a, b, m in zip(base_graph.interfaces, graph.interfaces, meshes):
        if a.pair == b.pair:
            out.append(m)
        elif a.pair == b.pair[::-1]:
            out.append(m.flipped())
        else:
            raise MeshError(f"interface {a.pair} does not correspond to {b.pair}")
    return out


# --- file I/O -----------------------------------------------------------------

def save_mesh(mesh: TriangleMesh, path):
    data = {
        "vertices": mesh.vertices.tolist(),
        "triangles": mesh.triangles.tolist(),
        "tags": mesh.tags.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(data, fh)


def load_mesh(path) -> TriangleMesh:
    try:
        with open(Path(path)) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MeshError(f"malformed mesh file {path}: {exc}") from exc
    try:
        verts = np.asarray(data["vertices"], dtype=float)
        tris = np.asarray(data["triangles"], dtype=np.int64)
        tags = np.asarray(data.get("tags", [0] * len(tris)), dtype=np.int64)
    except (KeyError, TypeError, ValueError) as exc:
        raise MeshError(f"malformed mesh file {path}: {exc}") from exc
    if verts.size == 0 or tris.size == 0:
        raise MeshError(f"empty mesh file {path}")
    if verts.ndim != 2 or verts.shape[1] != 3 or tris.ndim != 2 or tris.shape[1] != 3:
        raise MeshError(f"malformed mesh file {path}: bad array shapes")
    return TriangleMesh(verts, tris, tags).validate()


# --- scene files ----------------------------------------------------------------

def scene_meshes(scene, level: int = 2):
    """One oriented patch per interface of a :class:`~helmbem.scene.SceneFile`.

    ``geometry.type`` selects the generator:

    * ``"spheres"``: ``spheres`` lists ``{patch, radius, center, inside}``;
      ``level`` is the icosphere subdivision count.
    * ``"boxes"``: ``boxes`` lists ``{region, min, max}``; every gap between
      box faces is split into ``level`` pieces.
    * absent: each interface's ``mesh`` entry is a mesh file path.
    """
    graph = scene.graph
    geom = scene.geometry or {}
    kind = geom.get("type")
    if kind == "spheres":
        spheres = {s["patch"]: s for s in geom["spheres"]}
        out = []
        for itf in graph.interfaces:
            if itf.patch not in spheres:
                raise MeshError(f"no sphere declared for patch {itf.patch!r}")
            s = spheres[itf.patch]
            m = icosphere(s.get("center", (0.0, 0.0, 0.0)), float(s["radius"]), level, tag=len(out))
            # icosphere normals point out of the ball
            if int(s["inside"]) == itf.to_region:
                m = m.flipped()
            elif int(s["inside"]) != itf.from_region:
                raise MeshError(f"sphere {itf.patch!r} does not bound region {itf.from_region} or {itf.to_region}")
            out.append(m)
        return out
    if kind == "boxes":
        boxes = [(int(b["region"]), tuple(b["min"]), tuple(b["max"])) for b in geom["boxes"]]
        return box_union_meshes(boxes, graph.pairs, divisions=max(1, int(level)))
    if kind is not None:
        raise MeshError(f"unknown geometry type {kind!r}")
    out = []
    for itf in graph.interfaces:
        if not itf.patch:
            raise MeshError(f"interface {itf.pair} names no mesh file")
        out.append(load_mesh(Path(scene.base_dir) / itf.patch))
    return out
