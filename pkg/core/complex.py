"""
Combinatorial closed triangulated 3-manifolds.

Only face incidence and connectivity are checked; vertex links are not
verified, so pseudo-manifolds with singular links pass validation.
"""
import itertools
import logging
from functools import cached_property
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import ValidationError
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from core.exceptions import InvalidRadiiError, InvariantViolation, MeshFormatError, VertexIndexError
from core.schemas import (
    MeshCounts,
    MeshDocument,
    OffendingFace,
    RadiiDocument,
    TargetDocument,
    ValidationReport,
)

logger = logging.getLogger(__name__)

_TET_FACES = list(itertools.combinations(range(4), 3))


class Complex:
    """Immutable vertex count plus an ordered list of tetrahedra."""

    def __init__(self, vertex_count: int, tetrahedra: Sequence[Sequence[int]]):
        # The document model carries the index checks, so both entry points agree.
        document = _validated(
            MeshFormatError,
            lambda: MeshDocument(vertices=vertex_count, tetrahedra=[list(map(int, t)) for t in tetrahedra]),
        )
        self.vertex_count = document.vertices
        tets = np.array(document.tetrahedra, dtype=int).reshape(-1, 4)
        tets.setflags(write=False)
        self.tetrahedra = tets

    def __repr__(self) -> str:
        return f"Complex(vertices={self.vertex_count}, tetrahedra={len(self.tetrahedra)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Complex):
            return NotImplemented
        return self.vertex_count == other.vertex_count and np.array_equal(self.tetrahedra, other.tetrahedra)

    __hash__ = None

    @property
    def tetrahedron_count(self) -> int:
        return len(self.tetrahedra)

    @cached_property
    def edges(self) -> np.ndarray:
        pairs = np.sort(self.tetrahedra[:, list(itertools.combinations(range(4), 2))], axis=-1)
        return np.unique(pairs.reshape(-1, 2), axis=0)

    @cached_property
    def _face_table(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        triples = np.sort(self.tetrahedra[:, _TET_FACES], axis=-1).reshape(-1, 3)
        faces, inverse, counts = np.unique(triples, axis=0, return_inverse=True, return_counts=True)
        return faces, inverse.reshape(-1), counts

    @property
    def faces(self) -> np.ndarray:
        return self._face_table[0]

    @property
    def face_incidence(self) -> Dict[Tuple[int, int, int], int]:
        faces, _, counts = self._face_table
        return {tuple(int(v) for v in face): int(n) for face, n in zip(faces, counts)}

    @cached_property
    def is_closed(self) -> bool:
        return bool(np.all(self._face_table[2] == 2))

    @cached_property
    def stars(self) -> List[np.ndarray]:
        return [np.flatnonzero((self.tetrahedra == v).any(axis=1)) for v in range(self.vertex_count)]

    @property
    def euler_characteristic(self) -> int:
        return self.vertex_count - len(self.edges) + len(self.faces) - self.tetrahedron_count

    def vertex_star(self, v: int) -> List[int]:
        if not 0 <= v < self.vertex_count:
            raise VertexIndexError(f"vertex {v} out of range for {self.vertex_count} vertices")
        return self.stars[v].tolist()

    def component_count(self) -> int:
        _, inverse, _ = self._face_table
        tet_of_slot = np.repeat(np.arange(self.tetrahedron_count), 4)
        incidence = coo_matrix(
            (np.ones(len(inverse)), (tet_of_slot, inverse)),
            shape=(self.tetrahedron_count, len(self.faces)),
        ).tocsr()
        count, _ = connected_components(incidence @ incidence.T, directed=False)
        return int(count)


# --- Documents ---

def _validation_message(error: ValidationError) -> str:
    first = error.errors()[0]
    message = first["msg"].removeprefix("Value error, ")
    location = ".".join(str(part) for part in first["loc"])
    return f"{location}: {message}" if location else message


def _validated(error_class, build):
    try:
        return build()
    except ValidationError as e:
        raise error_class(_validation_message(e)) from e


def parse_mesh(text: str) -> Complex:
    document = _validated(MeshFormatError, lambda: MeshDocument.model_validate_json(text))
    return Complex(document.vertices, document.tetrahedra)


def serialize_mesh(c: Complex) -> str:
    return MeshDocument(vertices=c.vertex_count, tetrahedra=c.tetrahedra.tolist()).model_dump_json()


def parse_radii(text: str, expected_length: int | None = None) -> np.ndarray:
    document = _validated(InvalidRadiiError, lambda: RadiiDocument.model_validate_json(text))
    if expected_length is not None and len(document.radii) != expected_length:
        raise InvalidRadiiError(f"radii: expected {expected_length} entries, got {len(document.radii)}")
    return np.array(document.radii, dtype=float)


def parse_target(text: str, expected_length: int | None = None) -> TargetDocument:
    document = _validated(MeshFormatError, lambda: TargetDocument.model_validate_json(text))
    if expected_length is not None and len(document.target) != expected_length:
        raise MeshFormatError(f"target: expected {expected_length} entries, got {len(document.target)}")
    return document


# --- Validation ---

def vertex_star(c: Complex, v: int) -> List[int]:
    return c.vertex_star(v)


def validate_closed(c: Complex) -> ValidationReport:
    offending = [
        OffendingFace(face=face, count=count)
        for face, count in c.face_incidence.items()
        if count != 2
    ]
    is_closed = not offending
    if is_closed and 2 * len(c.faces) != 4 * c.tetrahedron_count:
        raise InvariantViolation("closed complex with 2|F| != 4|T|")
    if sum(len(s) for s in c.stars) != 4 * c.tetrahedron_count:
        raise InvariantViolation("vertex stars do not cover every tetrahedron four times")

    components = c.component_count()
    logger.debug("validated %r: %d offending faces, %d components", c, len(offending), components)
    return ValidationReport(
        is_closed=is_closed,
        is_connected=components == 1,
        offending_faces=offending,
        counts=MeshCounts(
            vertices=c.vertex_count,
            edges=len(c.edges),
            faces=len(c.faces),
            tetrahedra=c.tetrahedron_count,
        ),
        euler_characteristic=c.euler_characteristic,
    )
