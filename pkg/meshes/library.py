# meshes/library.py
import itertools

from core.complex import Complex


def boundary_simplex() -> Complex:
    """Boundary of the 4-simplex: 5 vertices, 5 tetrahedra, a triangulated S^3."""
    return Complex(5, [list(t) for t in itertools.combinations(range(5), 4)])


def boundary_cross_polytope() -> Complex:
    """
    Boundary of the 4-dimensional cross-polytope: 8 vertices, 16 tetrahedra.

    Vertex 2i is +e_i and 2i+1 is -e_i; each facet picks one sign per axis.
    """
    tets = [[2 * axis + sign for axis, sign in enumerate(signs)] for signs in itertools.product((0, 1), repeat=4)]
    return Complex(8, tets)


def single_tetrahedron() -> Complex:
    return Complex(4, [[0, 1, 2, 3]])


def disjoint_union(a: Complex, b: Complex) -> Complex:
    shifted = (b.tetrahedra + a.vertex_count).tolist()
    return Complex(a.vertex_count + b.vertex_count, a.tetrahedra.tolist() + shifted)


LIBRARY = {
    "boundary_simplex": boundary_simplex,
    "boundary_cross_polytope": boundary_cross_polytope,
    "single_tetrahedron": single_tetrahedron,
}
