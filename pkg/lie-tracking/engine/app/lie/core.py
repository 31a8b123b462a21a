import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import polar

from ..config import get_settings
from ..models.errors import (
    ConditioningError,
    FrameCompositionError,
    InvalidInputError,
    NoCanonicalCoordinatesError,
    NotInAlgebraError,
    NumericalDriftError,
)
from ..models.groups import AlgebraElement, GroupElement, Twist
from ..models.tags import GroupFamily, GroupTag
from .membership import algebra_residual, check_membership, membership_residual, project_to_algebra  # noqa: F401

logger = logging.getLogger(__name__)

GL_CONDITION_LIMIT = 1e12


def _frames_enabled(check_frames: Optional[bool]) -> bool:
    return get_settings().check_frames if check_frames is None else check_frames


def _require_same_tag(a: GroupTag, b: GroupTag):
    if a != b:
        raise FrameCompositionError(f"Group tags differ: {a} vs {b}")


def compose(a: GroupElement, b: GroupElement, check_frames: Optional[bool] = None) -> GroupElement:
    """g_AB . g_BC -> g_AC"""
    _require_same_tag(a.tag, b.tag)
    if _frames_enabled(check_frames) and a.frames[1] != b.frames[0]:
        raise FrameCompositionError(
            f"Cannot compose {a.frames[0]}->{a.frames[1]} with {b.frames[0]}->{b.frames[1]}"
        )
    return GroupElement(a.matrix @ b.matrix, a.tag, (a.frames[0], b.frames[1]), validate=False)


def inverse(g: GroupElement) -> GroupElement:
    m = g.matrix
    family = g.tag.family
    frames = (g.frames[1], g.frames[0])

    if family == GroupFamily.SO:
        inv = m.T.copy()
    elif family == GroupFamily.SU:
        inv = m.conj().T.copy()
    elif family == GroupFamily.SE:
        n = g.tag.n
        rot_t = m[:n, :n].T
        inv = np.eye(n + 1)
        inv[:n, :n] = rot_t
        inv[:n, n] = -rot_t @ m[:n, n]
    else:
        cond = np.linalg.cond(m)
        if not np.isfinite(cond) or cond > GL_CONDITION_LIMIT:
            raise ConditioningError(f"{g.tag} element is ill-conditioned (cond={cond:.3g})")
        inv = np.linalg.inv(m)

    return GroupElement(inv, g.tag, frames, validate=False)


def adjoint_conjugate(g: GroupElement, X: AlgebraElement, check_frames: Optional[bool] = None) -> AlgebraElement:
    """g X g^-1; an X expressed in frame B comes out in frame A for g = g_AB"""
    _require_same_tag(g.tag, X.tag)
    if _frames_enabled(check_frames) and X.frame != g.frames[1]:
        raise FrameCompositionError(
            f"Velocity in frame {X.frame} cannot be moved by {g.frames[0]}->{g.frames[1]}"
        )
    result = g.matrix @ X.matrix @ inverse(g).matrix

    tau = get_settings().tau_mem
    residual = algebra_residual(result, g.tag)
    if residual > tau * max(1.0, float(np.linalg.norm(result))):
        raise NumericalDriftError(f"Conjugation left the algebra of {g.tag} (residual {residual:.3g})")
    return AlgebraElement(project_to_algebra(result, g.tag), g.tag, g.frames[0], validate=False)


def _require_canonical(tag: GroupTag):
    if not tag.has_canonical_coordinates:
        raise NoCanonicalCoordinatesError(f"{tag} has no hat/vee coordinates; only SO(3) and SE(3) do")


def skew3(w) -> np.ndarray:
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


def hat(tag: GroupTag, x: Twist, frame: str = "S") -> AlgebraElement:
    _require_canonical(tag)
    if tag.family == GroupFamily.SO:
        if x.is_se3:
            raise InvalidInputError("so(3) hat takes a 3-vector")
        return AlgebraElement(skew3(x.vector), tag, frame, validate=False)

    if not x.is_se3:
        raise InvalidInputError("se(3) hat takes a 6-vector (v, omega)")
    m = np.zeros((4, 4))
    m[:3, :3] = skew3(x.omega)
    m[:3, 3] = x.v
    return AlgebraElement(m, tag, frame, validate=False)


def vee(tag: GroupTag, X: AlgebraElement) -> Twist:
    _require_canonical(tag)
    _require_same_tag(tag, X.tag)
    m = X.matrix
    if algebra_residual(m, tag) > get_settings().tau_mem:
        raise NotInAlgebraError(f"Matrix is not in the algebra of {tag}")
    omega = [m[2, 1], m[0, 2], m[1, 0]]
    if tag.family == GroupFamily.SO:
        return Twist(omega)
    return Twist([m[0, 3], m[1, 3], m[2, 3]] + omega)


def identity_deviation(g: GroupElement) -> Tuple[float, float]:
    """Frobenius norm and spectral radius of g - I"""
    diff = g.matrix - np.eye(g.tag.dim)
    frobenius = float(np.linalg.norm(diff))
    spectral = float(np.max(np.abs(np.linalg.eigvals(diff))))
    return frobenius, spectral


# ---- algebra coordinates -------------------------------------------------

def algebra_dimension(tag: GroupTag) -> int:
    n = tag.n
    if tag.family == GroupFamily.SO:
        return n * (n - 1) // 2
    if tag.family == GroupFamily.SE:
        return n * (n - 1) // 2 + n
    if tag.family == GroupFamily.SU:
        return n * n - 1
    if tag.family == GroupFamily.GL0:
        return n * n
    return 2 * n * n


def _unit(n: int, i: int, j: int, dtype=float) -> np.ndarray:
    e = np.zeros((n, n), dtype=dtype)
    e[i, j] = 1
    return e


def algebra_basis(tag: GroupTag) -> List[np.ndarray]:
    """Real basis of the algebra; SO(3)/SE(3) follow the hat ordering"""
    n = tag.n
    family = tag.family

    if tag.has_canonical_coordinates:
        d = algebra_dimension(tag)
        return [hat(tag, Twist(np.eye(d)[i])).matrix.copy() for i in range(d)]

    if family == GroupFamily.SO:
        return [_unit(n, i, j) - _unit(n, j, i) for i in range(n) for j in range(i + 1, n)]

    if family == GroupFamily.SE:
        basis = []
        for i in range(n):
            b = np.zeros((n + 1, n + 1))
            b[i, n] = 1.0
            basis.append(b)
        for i in range(n):
            for j in range(i + 1, n):
                b = np.zeros((n + 1, n + 1))
                b[:n, :n] = _unit(n, i, j) - _unit(n, j, i)
                basis.append(b)
        return basis

    if family == GroupFamily.SU:
        c = complex
        basis = []
        for j in range(n):
            for k in range(j + 1, n):
                basis.append(1j * (_unit(n, j, k, c) + _unit(n, k, j, c)))
                basis.append(_unit(n, j, k, c) - _unit(n, k, j, c))
        for j in range(n - 1):
            basis.append(1j * (_unit(n, j, j, c) - _unit(n, j + 1, j + 1, c)))
        return basis

    if family == GroupFamily.GL0:
        return [_unit(n, i, j) for i in range(n) for j in range(n)]

    real_part = [_unit(n, i, j, complex) for i in range(n) for j in range(n)]
    return real_part + [1j * b for b in real_part]


def algebra_from_coordinates(tag: GroupTag, coords, frame: str = "S") -> AlgebraElement:
    coords = np.asarray(coords, dtype=float).reshape(-1)
    if coords.shape[0] != algebra_dimension(tag):
        raise InvalidInputError(
            f"{tag} algebra has {algebra_dimension(tag)} coordinates, got {coords.shape[0]}"
        )
    if tag.has_canonical_coordinates:
        return hat(tag, Twist(coords), frame)
    basis = np.stack(algebra_basis(tag))
    return AlgebraElement(np.tensordot(coords, basis, axes=1), tag, frame, validate=False)


def algebra_to_coordinates(tag: GroupTag, X: AlgebraElement) -> np.ndarray:
    if tag.has_canonical_coordinates:
        return vee(tag, X).vector.copy()
    basis = np.stack(algebra_basis(tag)).reshape(algebra_dimension(tag), -1).T
    target = X.matrix.reshape(-1)
    if tag.is_complex:
        basis = np.vstack([basis.real, basis.imag])
        target = np.concatenate([target.real, target.imag])
    coords, *_ = np.linalg.lstsq(basis, target, rcond=None)
    return coords


# ---- projections ---------------------------------------------------------

def project_to_group(g: GroupElement) -> GroupElement:
    """Nearest orthogonal/unitary factor for SO/SU, rotation block for SE; GL is returned as is"""
    family = g.tag.family
    m = np.array(g.matrix, copy=True)

    if family in (GroupFamily.SO, GroupFamily.SU):
        u, _ = polar(m)
        det = np.linalg.det(u)
        if family == GroupFamily.SU:
            u = u * det ** (-1.0 / g.tag.n)
        elif det < 0:
            raise NumericalDriftError("Rotation drifted to a reflection")
        projected = u
    elif family == GroupFamily.SE:
        n = g.tag.n
        rot, _ = polar(m[:n, :n])
        if np.linalg.det(rot) < 0:
            raise NumericalDriftError("Rotation block drifted to a reflection")
        projected = m
        projected[:n, :n] = rot
        projected[n, :] = 0.0
        projected[n, n] = 1.0
    else:
        return g

    logger.debug("Re-projected %s element (residual before: %.3g)", g.tag, membership_residual(g.matrix, g.tag))
    return GroupElement(projected, g.tag, g.frames)


def adjoint_matrix(g: GroupElement) -> np.ndarray:
    """6x6 adjoint of an SE(3) element acting on (v, omega) twists"""
    if g.tag.family != GroupFamily.SE or g.tag.n != 3:
        raise NoCanonicalCoordinatesError(f"adjoint matrix is defined for SE(3), got {g.tag}")
    rot = g.matrix[:3, :3]
    p = g.matrix[:3, 3]
    ad = np.zeros((6, 6))
    ad[:3, :3] = rot
    ad[:3, 3:] = skew3(p) @ rot
    ad[3:, 3:] = rot
    return ad


__all__ = [
    "adjoint_conjugate",
    "adjoint_matrix",
    "algebra_basis",
    "algebra_dimension",
    "algebra_from_coordinates",
    "algebra_to_coordinates",
    "check_membership",
    "compose",
    "hat",
    "identity_deviation",
    "inverse",
    "project_to_algebra",
    "project_to_group",
    "vee",
]
