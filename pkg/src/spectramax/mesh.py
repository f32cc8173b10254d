"""Closed triangulated surfaces: representation, topology, generators, file IO.

A :class:`TriMesh` is an indexed face set over 3D vertex positions with a
derived edge/adjacency structure.  Geometry (areas, edge lengths, cotangents)
is always taken from per-face corner coordinates, which default to the stored
vertex positions but may be supplied separately by generators whose faces wrap
around a combinatorial identification (flat tori).
"""

import hashlib
import io
import math
import os

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import (
    DegenerateFace,
    DegenerateLattice,
    LimitExceeded,
    ParseError,
    TopologyError,
)

MAX_ICOSPHERE_SUBDIVISIONS = 7


class TriMesh:
    """Closed oriented triangulated surface.

    Parameters
    ----------
    vertices : (V, 3) array_like
        Vertex positions.
    faces : (F, 3) array_like of int
        Vertex-index triples, counterclockwise as seen from outside.
    face_corners : (F, 3, 3) array_like, optional
        Authoritative corner coordinates per face.  Defaults to
        ``vertices[faces]``; generators with combinatorial identifications
        pass unwrapped coordinates here so face geometry stays exact.

    Raises
    ------
    TopologyError
        Boundary edge, non-manifold edge, inconsistent orientation, or a
        disconnected vertex graph.
    DegenerateFace
        Any triangle with zero area.

    Notes
    -----
    Instances are immutable after construction and safe to share across
    concurrent readers.
    """

    def __init__(self, vertices, faces, face_corners=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ParseError("vertices must be an (V, 3) array")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ParseError("faces must be an (F, 3) array")
        if self.faces.size and (self.faces.min() < 0 or
                                self.faces.max() >= len(self.vertices)):
            raise ParseError("face index out of range")
        if face_corners is None:
            face_corners = self.vertices[self.faces]
        self.face_corners = np.ascontiguousarray(face_corners, dtype=float)
        if self.face_corners.shape != (len(self.faces), 3, 3):
            raise ParseError("face_corners must be (F, 3, 3)")

        self._validate_topology()
        self._build_geometry()
        self.vertices.setflags(write=False)
        self.faces.setflags(write=False)
        self.face_corners.setflags(write=False)

    # -- construction internals ------------------------------------------

    def _validate_topology(self):
        f = self.faces
        if len(f) == 0:
            raise TopologyError("empty mesh")
        if (f[:, 0] == f[:, 1]).any() or (f[:, 1] == f[:, 2]).any() or \
           (f[:, 0] == f[:, 2]).any():
            raise TopologyError("face with repeated vertex")

        directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        order = np.lexsort((directed[:, 1], directed[:, 0]))
        ds = directed[order]
        if (np.diff(ds, axis=0) == 0).all(axis=1).any():
            raise TopologyError("directed edge used twice: "
                                "non-manifold or inconsistently oriented")

        lo = np.minimum(directed[:, 0], directed[:, 1])
        hi = np.maximum(directed[:, 0], directed[:, 1])
        und = lo.astype(np.int64) * len(self.vertices) + hi
        uniq, counts = np.unique(und, return_counts=True)
        if (counts == 1).any():
            raise TopologyError("boundary edge found: surface is not closed")
        if (counts > 2).any():
            raise TopologyError("edge shared by more than two faces")
        # counts are all exactly 2; with unique directed edges this means one
        # traversal per direction, i.e. a consistent global orientation.
        self.edges = np.column_stack([uniq // len(self.vertices),
                                      uniq % len(self.vertices)])

        v_used = np.zeros(len(self.vertices), dtype=bool)
        v_used[f.ravel()] = True
        if not v_used.all():
            raise TopologyError("unreferenced vertex")
        adj = sparse.coo_matrix(
            (np.ones(len(self.edges)), (self.edges[:, 0], self.edges[:, 1])),
            shape=(len(self.vertices),) * 2)
        n_comp, _ = csgraph.connected_components(adj, directed=False)
        if n_comp != 1:
            raise TopologyError("mesh is disconnected")

        chi = len(self.vertices) - len(self.edges) + len(self.faces)
        if chi % 2 != 0 or chi > 2:
            raise TopologyError(f"Euler characteristic {chi} is not 2 - 2*genus")
        self.euler_characteristic = chi
        self.genus = (2 - chi) // 2

    def _build_geometry(self):
        c = self.face_corners
        e1 = c[:, 1] - c[:, 0]
        e2 = c[:, 2] - c[:, 0]
        cross = np.cross(e1, e2)
        self.face_areas = 0.5 * np.linalg.norm(cross, axis=1)
        if (self.face_areas <= 0.0).any():
            bad = int(np.argmin(self.face_areas))
            raise DegenerateFace(f"face {bad} has zero area")

        v_areas = np.zeros(len(self.vertices))
        np.add.at(v_areas, self.faces.ravel(),
                  np.repeat(self.face_areas / 3.0, 3))
        self.vertex_areas = v_areas
        self.area = float(self.face_areas.sum())

        # Edge lengths from face geometry (both incident faces agree for the
        # shipped generators; keep the first seen).
        i = np.concatenate([self.faces[:, 0], self.faces[:, 1],
                            self.faces[:, 2]])
        j = np.concatenate([self.faces[:, 1], self.faces[:, 2],
                            self.faces[:, 0]])
        ell = np.concatenate([
            np.linalg.norm(c[:, 1] - c[:, 0], axis=1),
            np.linalg.norm(c[:, 2] - c[:, 1], axis=1),
            np.linalg.norm(c[:, 0] - c[:, 2], axis=1),
        ])
        key = (np.minimum(i, j).astype(np.int64) * self.n_vertices
               + np.maximum(i, j))
        order = np.argsort(key, kind="stable")
        edge_key = (self.edges[:, 0] * self.n_vertices + self.edges[:, 1])
        first = np.searchsorted(key[order], edge_key)
        self.edge_lengths = ell[order][first]
        self.mean_edge_length = float(self.edge_lengths.mean())

    # -- queries ----------------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def n_faces(self):
        return len(self.faces)

    def adjacency(self, weighted=True):
        """Symmetric vertex adjacency as CSR, optionally edge-length weighted."""
        w = self.edge_lengths if weighted else np.ones(len(self.edges))
        i, j = self.edges[:, 0], self.edges[:, 1]
        m = sparse.coo_matrix(
            (np.concatenate([w, w]),
             (np.concatenate([i, j]), np.concatenate([j, i]))),
            shape=(self.n_vertices,) * 2)
        return m.tocsr()

    def geodesic_distances(self, sources):
        """Graph-Dijkstra distances from each source vertex.

        An approximation to geodesic distance good enough for monotone ball
        families; exact geodesics are out of scope.
        """
        return csgraph.dijkstra(self.adjacency(), directed=False,
                                indices=np.atleast_1d(sources))

    def farthest_point_sample(self, count, start=0):
        """Deterministic greedy farthest-point vertex sample."""
        count = min(count, self.n_vertices)
        chosen = [int(start)]
        dist = self.geodesic_distances([start])[0]
        for _ in range(count - 1):
            nxt = int(np.argmax(dist))
            chosen.append(nxt)
            dist = np.minimum(dist, self.geodesic_distances([nxt])[0])
        return np.array(chosen)

    def content_hash(self):
        """Stable hex digest of the mesh connectivity and geometry."""
        h = hashlib.sha256()
        h.update(np.round(self.vertices, 12).tobytes())
        h.update(self.faces.tobytes())
        h.update(np.round(self.face_corners, 12).tobytes())
        return h.hexdigest()


def genus(mesh):
    """Genus from the Euler characteristic, gamma = (2 - V + E - F) / 2."""
    return mesh.genus


# -- file IO ---------------------------------------------------------------


def _data_lines(stream):
    for raw in stream:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def _load_off(stream):
    lines = _data_lines(stream)
    try:
        header = next(lines)
    except StopIteration:
        raise ParseError("empty OFF stream") from None
    counts = None
    if header.strip() == "OFF":
        pass
    elif header.startswith("OFF"):
        counts = header[3:].split()
    else:
        raise ParseError("missing OFF header")
    try:
        if counts is None or len(counts) < 3:
            counts = next(lines).split()
        nv, nf = int(counts[0]), int(counts[1])
        verts = [[float(x) for x in next(lines).split()[:3]]
                 for _ in range(nv)]
        faces = []
        for _ in range(nf):
            row = next(lines).split()
            if int(row[0]) != 3:
                raise ParseError("only triangular faces are supported")
            faces.append([int(x) for x in row[1:4]])
    except StopIteration:
        raise ParseError("truncated OFF stream") from None
    except ValueError as exc:
        raise ParseError(f"malformed OFF entry: {exc}") from None
    return np.array(verts, dtype=float), np.array(faces, dtype=np.int64)


def _load_obj(stream):
    verts, faces = [], []
    for line in _data_lines(stream):
        parts = line.split()
        if parts[0] == "v":
            try:
                verts.append([float(x) for x in parts[1:4]])
            except ValueError as exc:
                raise ParseError(f"malformed vertex: {exc}") from None
        elif parts[0] == "f":
            idx = []
            for token in parts[1:]:
                name = token.split("/", 1)[0]  # texture/normal refs ignored
                try:
                    k = int(name)
                except ValueError as exc:
                    raise ParseError(f"malformed face: {exc}") from None
                if k <= 0:
                    raise ParseError("OBJ indices must be positive")
                idx.append(k - 1)
            if len(idx) != 3:
                raise ParseError("only triangular faces are supported")
            faces.append(idx)
        # all other OBJ records (vn, vt, usemtl, ...) are ignored
    if not verts or not faces:
        raise ParseError("OBJ stream without vertices or faces")
    return np.array(verts, dtype=float), np.array(faces, dtype=np.int64)


def load_mesh(source, format=None):
    """Load a closed triangle mesh from a path, stream, or bytes.

    Parameters
    ----------
    source : str | os.PathLike | bytes | file-like
        Mesh data.  For paths the format is inferred from the extension
        unless given explicitly.
    format : {"off", "obj"}, optional

    Returns
    -------
    TriMesh
    """
    close = False
    if isinstance(source, (str, os.PathLike)):
        if format is None:
            format = os.path.splitext(str(source))[1].lstrip(".").lower()
        stream = open(source, "r", encoding="utf-8")
        close = True
    elif isinstance(source, bytes):
        stream = io.StringIO(source.decode("utf-8"))
    else:
        stream = source
    if format is None:
        raise ParseError("mesh format not specified")
    format = format.lower()
    try:
        if format == "off":
            verts, faces = _load_off(stream)
        elif format == "obj":
            verts, faces = _load_obj(stream)
        else:
            raise ParseError(f"unsupported mesh format {format!r}")
    finally:
        if close:
            stream.close()
    return TriMesh(verts, faces)


def write_off(mesh, path):
    """Write a mesh as ASCII OFF (positions only; identifications survive
    combinatorially but wrapped faces lose their unwrapped corners)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")


def fixtures_dir():
    """Directory holding the shipped mesh fixtures.

    Overridden by the ``SPECTRAMAX_FIXTURES`` environment variable.
    """
    env = os.environ.get("SPECTRAMAX_FIXTURES")
    if env:
        return env
    return os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name):
    return os.path.join(fixtures_dir(), name)


# -- generators ------------------------------------------------------------


def make_icosphere(subdivisions):
    """Icosahedron subdivided ``subdivisions`` times, vertices on the unit
    sphere.  Face count is 20 * 4**subdivisions."""
    if subdivisions < 0 or subdivisions > MAX_ICOSPHERE_SUBDIVISIONS:
        raise LimitExceeded(
            f"subdivisions must be in [0, {MAX_ICOSPHERE_SUBDIVISIONS}]")
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)

    verts = [v for v in verts]
    for _ in range(subdivisions):
        midpoint = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc],
                          [ab, bc, ca]]
        faces = np.array(new_faces, dtype=np.int64)
    return TriMesh(np.array(verts), faces)


def make_flat_torus(lattice, n):
    """Genus-1 flat torus over the given lattice.

    The n-by-n grid lives in the plane spanned by the two lattice vectors
    (third coordinate zero) with periodic identification realized
    combinatorially; per-face corners keep the unwrapped coordinates so the
    total area equals ``|det(lattice)|`` exactly.

    Parameters
    ----------
    lattice : (2, 2) array_like
        Rows are the two lattice vectors.
    n : int
        Grid resolution per direction, at least 4.
    """
    lat = np.asarray(lattice, dtype=float)
    if lat.shape != (2, 2):
        raise DegenerateLattice("lattice must be two 2D vectors")
    det = lat[0, 0] * lat[1, 1] - lat[0, 1] * lat[1, 0]
    scale = np.linalg.norm(lat[0]) * np.linalg.norm(lat[1])
    if scale == 0 or abs(det) < 1e-12 * scale:
        raise DegenerateLattice("lattice vectors are linearly dependent")
    if n < 4:
        raise DegenerateLattice("grid resolution must be at least 4")

    u, w = lat[0] / n, lat[1] / n

    def pos(i, j):
        p = np.outer(i, u) + np.outer(j, w)
        return np.column_stack([p, np.zeros(len(p))])

    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    verts = pos(ii.ravel(), jj.ravel())

    def vid(i, j):
        return (i % n) * n + (j % n)

    faces, corners = [], []
    for i in range(n):
        for j in range(n):
            # anti-diagonal split of cell (i, j)
            faces.append([vid(i, j), vid(i + 1, j), vid(i, j + 1)])
            corners.append(pos(np.array([i, i + 1, i]),
                               np.array([j, j, j + 1])))
            faces.append([vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
            corners.append(pos(np.array([i + 1, i + 1, i]),
                               np.array([j, j + 1, j + 1])))
    faces = np.array(faces, dtype=np.int64)
    corners = np.array(corners)
    if det < 0:  # keep a consistent counterclockwise convention
        faces = faces[:, ::-1]
        corners = corners[:, ::-1]
    return TriMesh(verts, faces, face_corners=corners)


def _torus_of_revolution(R, r, n, center):
    us = 2 * np.pi * np.arange(n) / n
    vs = 2 * np.pi * np.arange(n) / n
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    verts = np.column_stack([
        (R + r * np.cos(vv.ravel())) * np.cos(uu.ravel()) + center[0],
        (R + r * np.cos(vv.ravel())) * np.sin(uu.ravel()) + center[1],
        r * np.sin(vv.ravel()) + center[2],
    ])

    def vid(i, j):
        return (i % n) * n + (j % n)

    faces = []
    for i in range(n):
        for j in range(n):
            faces.append([vid(i, j), vid(i + 1, j), vid(i, j + 1)])
            faces.append([vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
    return verts, np.array(faces, dtype=np.int64)


def make_genus2(n=12, R=1.0, r=0.45):
    """Genus-2 fixture: two tori of revolution glued along a removed face.

    One triangle is removed from each torus where they meet; the boundary
    vertices are identified pairwise with reversed orientation, which keeps
    the merged surface closed and consistently oriented
    (chi = -2, genus 2).  The result is rescaled to unit area so standard
    epsilon schedules sit above its resolution floor.
    """
    if n < 8 or n % 2:
        raise LimitExceeded("genus-2 generator needs even n >= 8")
    joint = np.array([R + r, 0.0, 0.0])
    va, fa = _torus_of_revolution(R, r, n, center=(0.0, 0.0, 0.0))
    vb, fb = _torus_of_revolution(R, r, n, center=(2 * (R + r), 0.0, 0.0))

    def nearest_face(verts, faces, point):
        cent = verts[faces].mean(axis=1)
        return int(np.argmin(np.linalg.norm(cent - point, axis=1)))

    ka = nearest_face(va, fa, joint)
    kb = nearest_face(vb, fb, joint)
    tri_a, tri_b = fa[ka], fb[kb]

    # Orientation-reversing identifications pair a0<->b0, a1<->b2, a2<->b1 up
    # to a cyclic shift of tri_b; pick the shift with nearest positions.
    best, best_cost = None, np.inf
    for shift in range(3):
        rb = np.roll(tri_b, shift)
        pairing = [(tri_a[0], rb[0]), (tri_a[1], rb[2]), (tri_a[2], rb[1])]
        cost = sum(np.linalg.norm(va[i] - vb[j]) for i, j in pairing)
        if cost < best_cost:
            best, best_cost = pairing, cost

    nv_a = len(va)
    merged = {j: i for i, j in best}
    remap_b = np.empty(len(vb), dtype=np.int64)
    verts = list(va)
    for j in range(len(vb)):
        if j in merged:
            remap_b[j] = merged[j]
            verts[merged[j]] = 0.5 * (va[merged[j]] + vb[j])
        else:
            remap_b[j] = len(verts)
            verts.append(vb[j])

    fa_kept = np.delete(fa, ka, axis=0)
    fb_kept = remap_b[np.delete(fb, kb, axis=0)]
    faces = np.vstack([fa_kept, fb_kept])
    raw = TriMesh(np.array(verts), faces)
    return TriMesh(raw.vertices / math.sqrt(raw.area), faces)
