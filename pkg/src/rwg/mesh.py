"""Graded constrained Delaunay triangulation and the native mesh format."""
from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import triangle

from .geometry import GeometryError, PolygonalBoundary, Tag

MIN_ANGLE_DEG = 28.0
_MAX_PASSES = 40


class MeshError(RuntimeError):
    pass


@dataclass
class Mesh:
    nodes: np.ndarray          # (N, 2)
    triangles: np.ndarray      # (T, 3), counter-clockwise
    boundary_edges: np.ndarray  # (K, 2)
    edge_tags: np.ndarray      # (K,)
    h_max: float = float("nan")
    gamma_mesh: float = float("nan")
    corner_points: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def angles(self) -> np.ndarray:
        """Interior angles in degrees, shape (T, 3)."""
        p = self.nodes[self.triangles]
        out = np.empty((len(p), 3))
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            v = p[:, (k + 2) % 3] - p[:, k]
            cosang = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            out[:, k] = np.degrees(np.arccos(np.clip(cosang, -1, 1)))
        return out

    def edge_lengths(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)

    def edges_with(self, tag: Tag) -> np.ndarray:
        return self.boundary_edges[self.edge_tags == int(tag)]

    def check(self):
        areas = self.areas()
        if np.any(areas <= 0):
            raise MeshError(f"{int(np.sum(areas <= 0))} triangles with non-positive area")
        # conformity: every interior edge shared by exactly two triangles
        t = self.triangles
        e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        if np.any(counts > 2):
            raise MeshError("non-conforming mesh: edge shared by more than two triangles")
        boundary = {tuple(x) for x in uniq[counts == 1]}
        tagged = {tuple(sorted(x)) for x in self.boundary_edges}
        if boundary != tagged:
            raise MeshError(f"{len(boundary ^ tagged)} boundary edges without a tag")


def size_function(points: np.ndarray, corners: np.ndarray, h_max: float, gamma_mesh: float,
                  r_ref: float, h_min: float) -> np.ndarray:
    """Target edge length ``h_max * min(1, (r / r_ref)**gamma)`` with a floor."""
    h = np.full(len(points), h_max)
    if gamma_mesh > 0:
        for c in corners:
            r = np.hypot(points[:, 0] - c[0], points[:, 1] - c[1])
            h = np.minimum(h, h_max * np.minimum(1.0, (r / r_ref) ** gamma_mesh))
    return np.maximum(h, h_min)


def triangulate(b: PolygonalBoundary, h_max: float, gamma_mesh: float = 0.5, r_ref: float = 1.0,
                extra_corners=None, h_min: float | None = None) -> Mesh:
    """Quality triangulation of ``b`` graded towards its corners.

    The local size near every corner marker and every singular polygon
    corner is ``h_max * min(1, (r / r_ref)**gamma_mesh)``, floored at
    ``h_min`` (default ``h_max / 40``).
    """
    if not h_max > 0:
        raise MeshError(f"h_max must be positive, got {h_max}")
    if h_min is None:
        h_min = h_max / 40.0
    corner_idx = sorted(set(b.corner_markers) | set(b.singular_corners()))
    corners = [b.vertices[i] for i in corner_idx]
    if extra_corners is not None:
        corners.extend(np.atleast_2d(np.asarray(extra_corners, dtype=float)))
    corners = np.array(corners, dtype=float).reshape(-1, 2)

    pslg = {
        "vertices": np.asarray(b.vertices, dtype=float),
        "segments": np.asarray(b.segments, dtype=np.int32),
        "segment_markers": np.asarray(b.tags, dtype=np.int32).reshape(-1, 1),
    }
    area0 = np.sqrt(3) / 4 * h_max ** 2
    tri = triangle.triangulate(pslg, f"pq{MIN_ANGLE_DEG}a{area0:.17g}Q")
    for _ in range(_MAX_PASSES):
        pts, t = tri["vertices"], tri["triangles"]
        cent = pts[t].mean(axis=1)
        h = size_function(cent, corners, h_max, gamma_mesh, r_ref, h_min)
        target = np.sqrt(3) / 4 * h ** 2
        p = pts[t]
        area = 0.5 * np.abs((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                            - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
        bad = area > 1.5 * target
        if not bad.any():
            break
        tri["triangle_max_area"] = np.where(bad, target, -1.0).reshape(-1, 1)
        tri = triangle.triangulate(tri, f"rpq{MIN_ANGLE_DEG}aQ")
    else:
        raise MeshError(f"size constraints not met after {_MAX_PASSES} passes near "
                        f"{cent[bad][:3].tolist()}")

    nodes = np.asarray(tri["vertices"], dtype=float)
    tris = np.asarray(tri["triangles"], dtype=np.int64)
    p = nodes[tris]
    signed = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    tris[signed < 0] = tris[signed < 0][:, [0, 2, 1]]
    seg = np.asarray(tri["segments"], dtype=np.int64)
    tags = np.asarray(tri["segment_markers"], dtype=np.int64).ravel()
    if np.any(~np.isin(tags, [int(x) for x in Tag])):
        raise MeshError("boundary segment lost its tag during triangulation")
    mesh = Mesh(nodes, tris, seg, tags, h_max=h_max, gamma_mesh=gamma_mesh,
                corner_points=np.array([b.vertices[i] for i in b.corner_markers]).reshape(-1, 2))
    mesh.check()
    return mesh


def write_mesh(mesh: Mesh, path) -> None:
    Path(path).write_text(mesh_to_string(mesh))


def mesh_to_string(mesh: Mesh) -> str:
    buf = io.StringIO()
    buf.write("mesh2d v1\n")
    buf.write(f"nodes {mesh.n_nodes}\n")
    for i, (x, y) in enumerate(mesh.nodes):
        buf.write(f"{i} {x:.17g} {y:.17g}\n")
    buf.write(f"tris {len(mesh.triangles)}\n")
    for i, j, k in mesh.triangles:
        buf.write(f"{i} {j} {k}\n")
    buf.write(f"bedges {len(mesh.boundary_edges)}\n")
    for (i, j), tag in zip(mesh.boundary_edges, mesh.edge_tags):
        buf.write(f"{i} {j} {Tag(int(tag)).name}\n")
    return buf.getvalue()


def read_mesh(path) -> Mesh:
    lines = Path(path).read_text().split("\n")
    if lines[0].strip() != "mesh2d v1":
        raise MeshError(f"{path}: not a mesh2d v1 file")
    pos = 1

    def block(name):
        nonlocal pos
        head = lines[pos].split()
        if head[0] != name:
            raise MeshError(f"{path}: expected '{name}' block at line {pos + 1}")
        n = int(head[1])
        rows = [lines[pos + 1 + k].split() for k in range(n)]
        pos += n + 1
        return rows

    nodes = np.array([[float(r[1]), float(r[2])] for r in block("nodes")]).reshape(-1, 2)
    tris = np.array([[int(c) for c in r] for r in block("tris")], dtype=np.int64).reshape(-1, 3)
    be = block("bedges")
    edges = np.array([[int(r[0]), int(r[1])] for r in be], dtype=np.int64).reshape(-1, 2)
    tags = np.array([int(Tag[r[2]]) for r in be], dtype=np.int64)
    return Mesh(nodes, tris, edges, tags)


__all__ = ["Mesh", "MeshError", "triangulate", "write_mesh", "read_mesh", "mesh_to_string",
           "size_function", "GeometryError"]
