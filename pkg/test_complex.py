import hashlib
import json

import numpy as np
import pytest

from conftest import DATA_DIR
from core.complex import Complex, parse_mesh, parse_radii, parse_target, serialize_mesh, validate_closed, vertex_star
from core.exceptions import InvalidRadiiError, MeshFormatError, VertexIndexError
from meshes.library import LIBRARY, boundary_simplex, disjoint_union, single_tetrahedron
from meshes.loader import load_mesh, load_radii, load_target


def _mesh_text(vertices, tetrahedra):
    return json.dumps({"vertices": vertices, "tetrahedra": tetrahedra})


class TestParseMesh:
    def test_boundary_simplex_counts(self):
        tets = [[0, 1, 2, 3], [0, 1, 2, 4], [0, 1, 3, 4], [0, 2, 3, 4], [1, 2, 3, 4]]
        c = parse_mesh(_mesh_text(5, tets))
        assert (len(c.edges), len(c.faces), c.tetrahedron_count) == (10, 10, 5)

    def test_single_tetrahedron_counts(self):
        c = parse_mesh(_mesh_text(4, [[0, 1, 2, 3]]))
        assert (len(c.edges), len(c.faces), c.tetrahedron_count) == (6, 4, 1)

    def test_tetrahedron_order_is_preserved(self):
        tets = [[4, 3, 2, 1], [0, 1, 2, 3], [0, 4, 1, 2], [3, 0, 4, 1], [2, 3, 4, 0]]
        c = parse_mesh(_mesh_text(5, tets))
        assert c.tetrahedra.tolist() == tets

    def test_duplicate_vertex_names_location(self):
        with pytest.raises(MeshFormatError, match=r"tetrahedra\.0: duplicate vertex 1"):
            parse_mesh(_mesh_text(3, [[0, 1, 1, 2]]))

    def test_index_out_of_range(self):
        with pytest.raises(MeshFormatError, match=r"tetrahedra\.1: index 5 out of range"):
            parse_mesh(_mesh_text(5, [[0, 1, 2, 3], [1, 2, 3, 5]]))

    def test_negative_index(self):
        with pytest.raises(MeshFormatError, match="out of range"):
            parse_mesh(_mesh_text(4, [[0, 1, 2, -1]]))

    def test_unused_vertex(self):
        with pytest.raises(MeshFormatError, match="vertex 4 appears in no tetrahedron"):
            parse_mesh(_mesh_text(5, [[0, 1, 2, 3]]))

    def test_wrong_arity(self):
        with pytest.raises(MeshFormatError, match=r"tetrahedra\.0"):
            parse_mesh(_mesh_text(3, [[0, 1, 2]]))

    @pytest.mark.parametrize("text", ["", "{", "[1, 2]", '{"vertices": 4}', '{"vertices": "four", "tetrahedra": []}'])
    def test_malformed_documents(self, text):
        with pytest.raises(MeshFormatError):
            parse_mesh(text)

    def test_constructor_runs_the_same_checks(self):
        with pytest.raises(MeshFormatError, match="duplicate vertex"):
            Complex(4, [[0, 1, 2, 2]])

    def test_tetrahedra_are_read_only(self, simplex):
        with pytest.raises(ValueError):
            simplex.tetrahedra[0, 0] = 3

    @pytest.mark.parametrize("name", sorted(LIBRARY))
    def test_serialize_round_trip(self, name):
        c = LIBRARY[name]()
        assert parse_mesh(serialize_mesh(c)) == c


class TestValidateClosed:
    def test_boundary_simplex(self, simplex):
        report = validate_closed(simplex)
        assert report.is_closed and report.is_connected
        assert report.offending_faces == []
        assert report.euler_characteristic == 0

    def test_single_tetrahedron(self, tetrahedron):
        report = validate_closed(tetrahedron)
        assert not report.is_closed
        assert len(report.offending_faces) == 4
        assert all(f.count == 1 for f in report.offending_faces)

    def test_disjoint_union_is_closed_but_not_connected(self):
        report = validate_closed(disjoint_union(boundary_simplex(), boundary_simplex()))
        assert report.is_closed
        assert not report.is_connected
        assert report.counts.vertices == 10 and report.counts.tetrahedra == 10

    def test_cross_polytope(self, cross_polytope):
        report = validate_closed(cross_polytope)
        assert report.is_closed and report.is_connected
        counts = report.counts
        assert (counts.vertices, counts.edges, counts.faces, counts.tetrahedra) == (8, 24, 32, 16)
        assert report.euler_characteristic == 0

    def test_face_shared_by_three_tetrahedra(self):
        # Three tetrahedra on the face (0, 1, 2) plus boundary faces.
        c = Complex(6, [[0, 1, 2, 3], [0, 1, 2, 4], [0, 1, 2, 5]])
        report = validate_closed(c)
        assert not report.is_closed
        assert (0, 1, 2) in {f.face for f in report.offending_faces if f.count == 3}

    @pytest.mark.parametrize("name", sorted(LIBRARY))
    def test_incidence_identities(self, name):
        c = LIBRARY[name]()
        assert sum(len(vertex_star(c, v)) for v in range(c.vertex_count)) == 4 * c.tetrahedron_count
        if c.is_closed:
            assert 2 * len(c.faces) == 4 * c.tetrahedron_count


class TestVertexStar:
    def test_boundary_simplex(self, simplex):
        for v in range(5):
            star = vertex_star(simplex, v)
            assert len(star) == 4
            assert all(v in simplex.tetrahedra[n] for n in star)

    def test_stored_order(self, simplex):
        assert vertex_star(simplex, 4) == [1, 2, 3, 4]

    def test_single_tetrahedron(self, tetrahedron):
        assert vertex_star(tetrahedron, 0) == [0]

    def test_out_of_range(self, simplex):
        with pytest.raises(VertexIndexError):
            vertex_star(simplex, 7)
        with pytest.raises(IndexError):
            vertex_star(simplex, -1)


class TestDocuments:
    def test_parse_radii(self):
        np.testing.assert_array_equal(parse_radii('{"radii": [1, 2.5]}', 2), [1.0, 2.5])

    def test_non_positive_radius_is_located(self):
        with pytest.raises(InvalidRadiiError, match=r"radii\.1"):
            parse_radii('{"radii": [1, 0]}')

    def test_radii_length_mismatch(self):
        with pytest.raises(InvalidRadiiError, match="expected 5 entries"):
            parse_radii('{"radii": [1, 1, 1]}', 5)

    def test_parse_target(self):
        document = parse_target('{"target": [1, -2, 0], "alpha": -2}', 3)
        assert document.target == [1.0, -2.0, 0.0]
        assert document.alpha == -2.0
        assert parse_target('{"target": [0]}').alpha is None

    def test_target_length_mismatch(self):
        with pytest.raises(MeshFormatError, match="target"):
            parse_target('{"target": [1, 2]}', 3)


class TestLoader:
    def test_load_mesh_digest(self):
        path = DATA_DIR / "boundary_simplex.json"
        c, digest = load_mesh(path)
        assert c == boundary_simplex()
        assert digest == hashlib.sha256(path.read_bytes()).hexdigest()

    def test_load_radii_and_target(self, tmp_path):
        radii, _ = load_radii(DATA_DIR / "perturbed_radii_5.json", 5)
        np.testing.assert_array_equal(radii, [1.0, 1.1, 0.9, 1.05, 0.95])

        target_path = tmp_path / "target.json"
        target_path.write_text('{"target": [0, 0, 0, 0], "alpha": 1}', encoding="utf-8")
        document, digest = load_target(target_path, 4)
        assert document.alpha == 1.0
        assert len(digest) == 64

    def test_single_tetrahedron_library_entry(self):
        assert single_tetrahedron().tetrahedra.tolist() == [[0, 1, 2, 3]]
