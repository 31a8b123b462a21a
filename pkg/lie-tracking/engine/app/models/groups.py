from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

from ..config import get_settings
from ..lie.membership import algebra_residual, check_membership
from .errors import (
    FrameCompositionError,
    InvalidInputError,
    MembershipError,
    NotARigidTransformError,
    NotARotationError,
    NotInAlgebraError,
)
from .tags import GroupFamily, GroupTag

Frames = Tuple[str, str]


class LogBranchPolicy(str, Enum):
    """How the SO(3)/SE(3) log resolves the two axes available at a rotation of exactly pi"""
    PRINCIPAL = "principal"
    LIMIT_AT_PI = "limit_at_pi"


def _coerce_matrix(matrix, tag: GroupTag, tau: float) -> np.ndarray:
    m = np.array(matrix, copy=True)
    if m.ndim != 2 or m.shape != (tag.dim, tag.dim):
        raise InvalidInputError(f"{tag} needs a {tag.dim}x{tag.dim} matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("Matrix has non-finite entries")
    if tag.is_complex:
        m = m.astype(np.complex128)
    else:
        # Real groups never carry complex storage
        if np.iscomplexobj(m):
            if np.max(np.abs(m.imag)) > tau:
                raise InvalidInputError(f"{tag} is a real group but the matrix has imaginary entries")
            m = m.real
        m = m.astype(np.float64)
    m.setflags(write=False)
    return m


def _check_frames(frames) -> Frames:
    frames = tuple(frames)
    if len(frames) != 2 or not all(isinstance(f, str) and f for f in frames):
        raise InvalidInputError(f"Frames must be a pair of non-empty labels, got {frames!r}")
    return frames


@dataclass(frozen=True, eq=False)
class GroupElement:
    """A group member relating two frames, e.g. g_ST maps T coordinates into S"""
    matrix: np.ndarray
    tag: GroupTag
    frames: Frames = ("S", "S")
    validate: Optional[bool] = field(default=None, repr=False)

    def __post_init__(self):
        settings = get_settings()
        object.__setattr__(self, "matrix", _coerce_matrix(self.matrix, self.tag, settings.tau_mem))
        object.__setattr__(self, "frames", _check_frames(self.frames))
        validate = settings.validate_membership if self.validate is None else self.validate
        if validate and not check_membership(self.matrix, self.tag, settings.tau_mem):
            if self.tag.family == GroupFamily.SO:
                raise NotARotationError(f"Matrix is not a member of {self.tag}")
            if self.tag.family == GroupFamily.SE:
                raise NotARigidTransformError(f"Matrix is not a member of {self.tag}")
            raise MembershipError(f"Matrix is not a member of {self.tag}")

    @classmethod
    def identity(cls, tag: GroupTag, frames: Frames = ("S", "S")) -> "GroupElement":
        return cls(np.eye(tag.dim, dtype=tag.dtype), tag, frames)

    def relabel(self, frames: Frames) -> "GroupElement":
        return GroupElement(self.matrix, self.tag, frames, validate=False)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        from ..lie.core import compose

        return compose(self, other)

    def __repr__(self) -> str:
        return f"GroupElement({self.tag}, {self.frames[0]}->{self.frames[1]})"


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """A Lie algebra member expressed in a single frame (velocity or exponential coordinate)"""
    matrix: np.ndarray
    tag: GroupTag
    frame: str = "S"
    validate: Optional[bool] = field(default=None, repr=False)

    def __post_init__(self):
        settings = get_settings()
        m = _coerce_matrix(self.matrix, self.tag, settings.tau_mem)
        object.__setattr__(self, "matrix", m)
        if not isinstance(self.frame, str) or not self.frame:
            raise InvalidInputError(f"Frame label must be a non-empty string, got {self.frame!r}")
        validate = settings.validate_membership if self.validate is None else self.validate
        if validate:
            scale = max(1.0, float(np.linalg.norm(m)))
            if algebra_residual(m, self.tag) > settings.tau_mem * scale:
                raise NotInAlgebraError(f"Matrix is not in the algebra of {self.tag}")

    @classmethod
    def zero(cls, tag: GroupTag, frame: str = "S") -> "AlgebraElement":
        return cls(np.zeros((tag.dim, tag.dim), dtype=tag.dtype), tag, frame)

    def norm(self) -> float:
        """Frobenius norm"""
        return float(np.linalg.norm(self.matrix))

    def _check_compatible(self, other: "AlgebraElement"):
        if not isinstance(other, AlgebraElement):
            raise InvalidInputError(f"Cannot combine an algebra element with {type(other).__name__}")
        if other.tag != self.tag:
            raise FrameCompositionError(f"Tag mismatch: {self.tag} vs {other.tag}")
        if get_settings().check_frames and other.frame != self.frame:
            raise FrameCompositionError(f"Frame mismatch: {self.frame} vs {other.frame}")

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check_compatible(other)
        return AlgebraElement(self.matrix + other.matrix, self.tag, self.frame, validate=False)

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._check_compatible(other)
        return AlgebraElement(self.matrix - other.matrix, self.tag, self.frame, validate=False)

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement(-self.matrix, self.tag, self.frame, validate=False)

    def __mul__(self, scalar: Union[int, float, complex]) -> "AlgebraElement":
        if not np.isscalar(scalar):
            return NotImplemented
        if not self.tag.is_complex and np.iscomplexobj(scalar):
            raise InvalidInputError(f"{self.tag} algebra is real; complex scaling is not allowed")
        return AlgebraElement(self.matrix * scalar, self.tag, self.frame, validate=False)

    __rmul__ = __mul__

    def __truediv__(self, scalar: Union[int, float]) -> "AlgebraElement":
        return self * (1.0 / scalar)

    def with_frame(self, frame: str) -> "AlgebraElement":
        return AlgebraElement(self.matrix, self.tag, frame, validate=False)

    def __repr__(self) -> str:
        return f"AlgebraElement({self.tag}, frame={self.frame}, norm={self.norm():.3g})"


@dataclass(frozen=True, eq=False)
class Twist:
    """Coordinates of an so(3) element (omega) or an se(3) element stacked as (v, omega)"""
    vector: np.ndarray

    def __post_init__(self):
        vec = np.array(self.vector, dtype=float, copy=True).reshape(-1)
        if vec.shape not in ((3,), (6,)):
            raise InvalidInputError(f"Twist needs 3 (so(3)) or 6 (se(3)) coordinates, got {vec.shape[0]}")
        if not np.all(np.isfinite(vec)):
            raise InvalidInputError("Twist has non-finite coordinates")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)

    @classmethod
    def so3(cls, omega) -> "Twist":
        return cls(np.asarray(omega, dtype=float))

    @classmethod
    def se3(cls, v, omega) -> "Twist":
        return cls(np.concatenate([np.asarray(v, dtype=float), np.asarray(omega, dtype=float)]))

    @property
    def is_se3(self) -> bool:
        return self.vector.shape[0] == 6

    @property
    def omega(self) -> np.ndarray:
        return self.vector[-3:]

    @property
    def v(self) -> Optional[np.ndarray]:
        return self.vector[:3] if self.is_se3 else None

    def __len__(self) -> int:
        return self.vector.shape[0]
