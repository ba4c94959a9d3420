import hashlib
import logging
from pathlib import Path
from typing import Tuple

import numpy as np

from core.complex import Complex, parse_mesh, parse_radii, parse_target
from core.exceptions import MeshFormatError
from core.schemas import TargetDocument

logger = logging.getLogger(__name__)


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _read(path) -> Tuple[str, str]:
    """File text plus the SHA-256 digest of its bytes."""
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise MeshFormatError(f"{path}: not UTF-8 text") from e
    digest = hashlib.sha256(raw).hexdigest()
    logger.debug("read %s (sha256 %s)", path, digest)
    return text, digest


def load_mesh(path) -> Tuple[Complex, str]:
    text, digest = _read(path)
    return parse_mesh(text), digest


def load_radii(path, expected_length: int | None = None) -> Tuple[np.ndarray, str]:
    text, digest = _read(path)
    return parse_radii(text, expected_length), digest


def load_target(path, expected_length: int | None = None) -> Tuple[TargetDocument, str]:
    text, digest = _read(path)
    return parse_target(text, expected_length), digest
