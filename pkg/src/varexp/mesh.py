"""Structured P1 triangulations of a rectangle."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Rect:
    xmin: float = -1.0
    xmax: float = 1.0
    ymin: float = -1.0
    ymax: float = 1.0

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise MeshError(f"degenerate rectangle {self}")

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulated rectangle.

    ``vertices`` is (N, 2), ``triangles`` is (T, 3) with counter-clockwise
    orientation, ``boundary_mask`` flags vertices on the rectangle edges.
    Element geometry (areas and basis gradients) is precomputed.
    """

    rect: Rect
    nx: int
    ny: int
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_mask: np.ndarray
    areas: np.ndarray = field(repr=False)
    grads: np.ndarray = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)

    @property
    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    def interpolate(self, func) -> np.ndarray:
        """Nodal values of ``func(x, y)`` (vectorized)."""
        vals = np.asarray(func(self.vertices[:, 0], self.vertices[:, 1]), dtype=float)
        return np.broadcast_to(vals, (self.n_vertices,)).copy()

    def dump(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(f"vertices {self.n_vertices} triangles {self.n_triangles}\n")
            for (x, y), b in zip(self.vertices, self.boundary_mask):
                fh.write(f"{x!r} {y!r} {int(b)}\n")
            for i, j, k in self.triangles:
                fh.write(f"{i} {j} {k}\n")


def _element_geometry(vertices: np.ndarray, triangles: np.ndarray):
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    if np.any(det <= 0.0):
        bad = np.flatnonzero(det <= 0.0)[:5]
        raise MeshError(f"degenerate or clockwise triangles: {bad.tolist()}")
    grads = np.empty((triangles.shape[0], 3, 2))
    grads[:, 1, 0] = d2[:, 1] / det
    grads[:, 1, 1] = -d2[:, 0] / det
    grads[:, 2, 0] = -d1[:, 1] / det
    grads[:, 2, 1] = d1[:, 0] / det
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    return 0.5 * det, grads


def build_mesh(rect: Rect, nx: int, ny: int) -> Mesh:
    """Split each of the nx*ny cells along its lower-left/upper-right diagonal.

    Vertex ``j*(nx+1)+i`` sits at column i, row j.
    """
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise MeshError(f"need nx, ny >= 1, got {nx}, {ny}")
    nx, ny = int(nx), int(ny)
    # xmin + L*i/n keeps grid lines such as x=0 exact
    xs = rect.xmin + (rect.xmax - rect.xmin) * np.arange(nx + 1) / nx
    ys = rect.ymin + (rect.ymax - rect.ymin) * np.arange(ny + 1) / ny
    xs[-1], ys[-1] = rect.xmax, rect.ymax
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    ll = (j * (nx + 1) + i).ravel()
    lr, ul = ll + 1, ll + nx + 1
    ur = ul + 1
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([ll, lr, ur])
    triangles[1::2] = np.column_stack([ll, ur, ul])

    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    boundary = ((ii == 0) | (ii == nx) | (jj == 0) | (jj == ny)).ravel()

    areas, grads = _element_geometry(vertices, triangles)
    for arr in (vertices, triangles, boundary, areas, grads):
        arr.setflags(write=False)
    return Mesh(rect, nx, ny, vertices, triangles, boundary, areas, grads)


def mesh_from_arrays(vertices, triangles, boundary_mask=None) -> Mesh:
    """Wrap arbitrary P1 connectivity (used for single-element checks).

    Without a mask every vertex is treated as interior.
    """
    vertices = np.asarray(vertices, dtype=float).reshape(-1, 2).copy()
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3).copy()
    if triangles.min() < 0 or triangles.max() >= len(vertices):
        raise MeshError("triangle index out of range")
    if boundary_mask is None:
        boundary_mask = np.zeros(len(vertices), dtype=bool)
    boundary_mask = np.asarray(boundary_mask, dtype=bool).copy()
    lo, hi = vertices.min(axis=0), vertices.max(axis=0)
    areas, grads = _element_geometry(vertices, triangles)
    return Mesh(Rect(lo[0], hi[0], lo[1], hi[1]), 0, 0, vertices, triangles,
                boundary_mask, areas, grads)


def triangle_geometry(mesh: Mesh, t: int):
    """Area and the three constant basis gradients of triangle ``t``."""
    if not 0 <= t < mesh.n_triangles:
        raise IndexError(t)
    return float(mesh.areas[t]), mesh.grads[t].copy()


def geometry_of(points) -> tuple[float, np.ndarray]:
    """Area and basis gradients for a standalone triangle given by 3 points."""
    pts = np.asarray(points, dtype=float).reshape(1, 3, 2)
    areas, grads = _element_geometry(pts.reshape(3, 2), np.array([[0, 1, 2]]))
    return float(areas[0]), grads[0]
