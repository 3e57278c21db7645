"""Uniform triangulations of the unit square with face connectivity.

Each n x n grid cell is split into two triangles by the diagonal running
from its lower-left to its upper-right corner.  Faces are stored once,
globally oriented from the smaller to the larger vertex index, so the two
elements sharing an interior face see the same parametrization.
"""

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

FACE_INTERIOR = 0
FACE_BOUNDARY = 1


@dataclass(frozen=True)
class Mesh:
    """Triangulation of [0,1]^2 with element-face incidence.

    Attributes
    ----------
    vertices : (nv, 2) float array
    elements : (ne, 3) int array
        Vertex triples, counter-clockwise.
    faces : (nf, 2) int array
        Vertex pairs, smaller index first (global orientation).
    face_class : (nf,) int array
        FACE_INTERIOR or FACE_BOUNDARY.
    elem_faces : (ne, 3) int array
        Global face index of each local face; local face ``l`` joins local
        vertices ``l+1`` and ``l+2`` (mod 3).
    elem_face_signs : (ne, 3) int array
        +1 when the element's counter-clockwise traversal of the face
        matches the global orientation, -1 otherwise.
    face_elems : (nf, 2) int array
        Incident elements; second entry is -1 for boundary faces.
    h : float
        Maximum element diameter.
    """

    vertices: np.ndarray
    elements: np.ndarray
    faces: np.ndarray
    face_class: np.ndarray
    elem_faces: np.ndarray
    elem_face_signs: np.ndarray
    face_elems: np.ndarray
    h: float
    interior_faces: np.ndarray = field(init=False)
    boundary_faces: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "interior_faces", np.flatnonzero(self.face_class == FACE_INTERIOR)
        )
        object.__setattr__(
            self, "boundary_faces", np.flatnonzero(self.face_class == FACE_BOUNDARY)
        )
        for arr in (self.vertices, self.elements, self.faces, self.face_class,
                    self.elem_faces, self.elem_face_signs, self.face_elems,
                    self.interior_faces, self.boundary_faces):
            arr.setflags(write=False)

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    @property
    def n_interior_faces(self) -> int:
        return self.interior_faces.size

    def element_vertices(self, elem: int) -> np.ndarray:
        return self.vertices[self.elements[elem]]

    def signed_area(self, elem: int) -> float:
        v = self.element_vertices(elem)
        return 0.5 * float(np.cross(v[1] - v[0], v[2] - v[0]))


class FaceGeometry(NamedTuple):
    normal: np.ndarray
    length: float
    param: Callable[[np.ndarray], np.ndarray]


def build_uniform(n: int) -> Mesh:
    """Build the n x n uniform criss-cross-free triangulation of [0,1]^2.

    Every square cell is split along its lower-left to upper-right
    diagonal, so all elements have diameter sqrt(2)/n.

    Parameters
    ----------
    n : int
        Number of cells per side, n >= 1.
    """
    if n < 1:
        raise ValueError(f"grid size must be >= 1, got {n}")

    idx = lambda i, j: j * (n + 1) + i
    xs = np.linspace(0.0, 1.0, n + 1)
    xv, yv = np.meshgrid(xs, xs, indexing="xy")
    vertices = np.column_stack([xv.ravel(), yv.ravel()])

    elements = np.empty((2 * n * n, 3), dtype=np.int64)
    for j in range(n):
        for i in range(n):
            c = 2 * (j * n + i)
            ll, lr = idx(i, j), idx(i + 1, j)
            ur, ul = idx(i + 1, j + 1), idx(i, j + 1)
            elements[c] = (ll, lr, ur)      # below the diagonal
            elements[c + 1] = (ll, ur, ul)  # above the diagonal

    face_index: dict[tuple[int, int], int] = {}
    faces: list[tuple[int, int]] = []
    elem_faces = np.empty((elements.shape[0], 3), dtype=np.int64)
    elem_face_signs = np.empty_like(elem_faces)
    face_elems: list[list[int]] = []

    for e, tri in enumerate(elements):
        for l in range(3):
            a, b = int(tri[(l + 1) % 3]), int(tri[(l + 2) % 3])
            key = (min(a, b), max(a, b))
            f = face_index.get(key)
            if f is None:
                f = len(faces)
                face_index[key] = f
                faces.append(key)
                face_elems.append([e, -1])
            else:
                face_elems[f][1] = e
            elem_faces[e, l] = f
            elem_face_signs[e, l] = 1 if (a, b) == key else -1

    faces_arr = np.asarray(faces, dtype=np.int64)
    face_elems_arr = np.asarray(face_elems, dtype=np.int64)
    face_class = np.where(face_elems_arr[:, 1] < 0, FACE_BOUNDARY, FACE_INTERIOR)

    edges = vertices[elements[:, [1, 2, 0]]] - vertices[elements[:, [0, 1, 2]]]
    h = float(np.linalg.norm(edges, axis=2).max())

    return Mesh(vertices, elements, faces_arr, face_class.astype(np.int64),
                elem_faces, elem_face_signs, face_elems_arr, h)


def face_geometry(mesh: Mesh, elem: int, local_face: int) -> FaceGeometry:
    """Outward normal, length, and global [0,1] parametrization of a face.

    The parametrization follows the global vertex order of the face, not
    the element's traversal, so both elements sharing a face get the same
    map.
    """
    if not 0 <= elem < mesh.n_elements:
        raise ValueError(f"element index {elem} out of range")
    if not 0 <= local_face < 3:
        raise ValueError(f"local face index {local_face} out of range")

    tri = mesh.elements[elem]
    p = mesh.vertices[tri[(local_face + 1) % 3]]
    q = mesh.vertices[tri[(local_face + 2) % 3]]
    d = q - p
    length = float(np.linalg.norm(d))
    # CCW element: rotating the traversal direction by -90 deg points outward
    normal = np.array([d[1], -d[0]]) / length

    a, b = mesh.faces[mesh.elem_faces[elem, local_face]]
    va, vb = mesh.vertices[a], mesh.vertices[b]

    def param(t):
        t = np.asarray(t, dtype=float)
        return va + np.multiply.outer(t, vb - va)

    return FaceGeometry(normal, length, param)
