import logging
from typing import Tuple, Union

import numpy as np
from scipy.linalg import expm

from ..config import get_settings
from ..models.errors import (
    BranchDomainError,
    ConditioningError,
    InvalidInputError,
    LogEscapesAlgebraError,
    NotARigidTransformError,
    NotARotationError,
    NumericalDriftError,
    OutOfRegionError,
)
from ..models.groups import AlgebraElement, GroupElement, LogBranchPolicy, Twist
from ..models.tags import SE3, SO3
from .core import hat, skew3, vee
from .membership import algebra_residual, check_membership, project_to_algebra

logger = logging.getLogger(__name__)

EPS_SMALL = 1e-8
EPS_JACOBIAN = 1e-4
PI_WINDOW = 1e-6
TIE_TOL = 1e-12

SQRT_TOL = 1e-14
SQRT_MAX_ITER = 50
SQRT_TARGET = 0.5
MAX_SQUARE_ROOTS = 64
BRANCH_TOL = 1e-10


def _as_twist(x) -> Twist:
    return x if isinstance(x, Twist) else Twist(x)


def _rotation_coefficients(theta: float) -> Tuple[float, float]:
    """a = sin(t)/t and b = (1 - cos t)/t^2, with Taylor forms near zero"""
    if theta < EPS_SMALL:
        return 1.0 - theta ** 2 / 6.0, 0.5 - theta ** 2 / 24.0
    half = 0.5 * theta
    return np.sin(theta) / theta, 0.5 * (np.sin(half) / half) ** 2


def _translation_coefficient(theta: float) -> float:
    """c = (t - sin t)/t^3"""
    if theta < EPS_JACOBIAN:
        return 1.0 / 6.0 - theta ** 2 / 120.0
    return (theta - np.sin(theta)) / theta ** 3


def _inverse_jacobian_coefficient(theta: float) -> float:
    """d = (1 - (t/2) cot(t/2)) / t^2"""
    if theta < EPS_JACOBIAN:
        return 1.0 / 12.0 + theta ** 2 / 720.0
    half = 0.5 * theta
    return (1.0 - half * np.cos(half) / np.sin(half)) / theta ** 2


# ---- exponential ---------------------------------------------------------

def exp_generic(X: AlgebraElement) -> GroupElement:
    m = X.matrix
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("Cannot exponentiate a matrix with non-finite entries")
    frames = (X.frame, X.frame)
    if not np.any(m):
        return GroupElement.identity(X.tag, frames)

    result = expm(m)
    if not X.tag.is_complex:
        result = np.real(result)
    if not check_membership(result, X.tag, get_settings().tau_mem):
        raise NumericalDriftError(f"expm result left {X.tag}")
    return GroupElement(result, X.tag, frames, validate=False)


def exp_closed_so3(omega: Union[Twist, np.ndarray], frame: str = "S") -> GroupElement:
    """Rodrigues formula"""
    w = _as_twist(omega)
    if w.is_se3:
        raise InvalidInputError("exp_closed_so3 takes a 3-vector")
    return GroupElement(_rodrigues(w.vector), SO3, (frame, frame))


def _rodrigues(w: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(w))
    a, b = _rotation_coefficients(theta)
    W = skew3(w)
    return np.eye(3) + a * W + b * (W @ W)


def exp_closed_se3(xi: Union[Twist, np.ndarray], frame: str = "S") -> GroupElement:
    xi = _as_twist(xi)
    if not xi.is_se3:
        raise InvalidInputError("exp_closed_se3 takes a 6-vector (v, omega)")
    w = xi.omega
    theta = float(np.linalg.norm(w))
    W = skew3(w)
    W2 = W @ W
    _, b = _rotation_coefficients(theta)
    c = _translation_coefficient(theta)

    g = np.eye(4)
    g[:3, :3] = _rodrigues(w)
    g[:3, 3] = (np.eye(3) + b * W + c * W2) @ xi.v
    return GroupElement(g, SE3, (frame, frame))


def exp(X: AlgebraElement) -> GroupElement:
    """Closed forms on SO(3)/SE(3), scaling-and-squaring elsewhere"""
    if X.tag == SO3:
        return exp_closed_so3(vee(SO3, X), X.frame)
    if X.tag == SE3:
        return exp_closed_se3(vee(SE3, X), X.frame)
    return exp_generic(X)


# ---- closed-form logarithms ---------------------------------------------

def _so3_log_vector(R: np.ndarray, policy: LogBranchPolicy) -> Tuple[np.ndarray, bool]:
    """Rotation vector with norm <= pi plus a flag for an exact pi-rotation tie"""
    s = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s_norm = float(np.linalg.norm(s))
    cos_theta = float(np.clip(0.5 * (np.trace(R) - 1.0), -1.0, 1.0))
    theta = float(np.arctan2(s_norm, cos_theta))

    if theta < EPS_SMALL:
        return s * (1.0 + theta ** 2 / 6.0), False
    if np.pi - theta > PI_WINDOW:
        return s * (theta / s_norm), False

    # Near pi the antisymmetric part vanishes; read the axis from the symmetric part
    B = (0.5 * (R + R.T) - cos_theta * np.eye(3)) / (1.0 - cos_theta)
    j = int(np.argmax(np.diag(B)))
    axis = B[:, j] / np.sqrt(max(B[j, j], np.finfo(float).tiny))
    axis = axis / np.linalg.norm(axis)

    tie = s_norm <= TIE_TOL
    if not tie:
        if axis @ s < 0:
            axis = -axis
    elif policy == LogBranchPolicy.LIMIT_AT_PI and s_norm > 0.0:
        if axis @ s < 0:
            axis = -axis
    else:
        first = next(x for x in axis if abs(x) > TIE_TOL)
        if first < 0:
            axis = -axis
    return theta * axis, tie


def _check_tag(g: GroupElement, tag, error_cls):
    if g.tag != tag:
        raise InvalidInputError(f"Expected a {tag} element, got {g.tag}")
    if not check_membership(g.matrix, tag, get_settings().tau_mem):
        raise error_cls(f"Matrix is not a member of {tag}")


def log_closed_so3_with_tie(R: GroupElement, policy: LogBranchPolicy = LogBranchPolicy.PRINCIPAL) -> Tuple[AlgebraElement, bool]:
    _check_tag(R, SO3, NotARotationError)
    omega, tie = _so3_log_vector(R.matrix, LogBranchPolicy(policy))
    if tie:
        logger.debug("pi-rotation tie resolved with %s policy", LogBranchPolicy(policy).value)
    return hat(SO3, Twist(omega), R.frames[0]), tie


def log_closed_so3(R: GroupElement, policy: LogBranchPolicy = LogBranchPolicy.PRINCIPAL) -> AlgebraElement:
    return log_closed_so3_with_tie(R, policy)[0]


def log_closed_se3_with_tie(g: GroupElement, policy: LogBranchPolicy = LogBranchPolicy.PRINCIPAL) -> Tuple[AlgebraElement, bool]:
    _check_tag(g, SE3, NotARigidTransformError)
    omega, tie = _so3_log_vector(g.matrix[:3, :3], LogBranchPolicy(policy))
    theta = float(np.linalg.norm(omega))
    W = skew3(omega)
    d = _inverse_jacobian_coefficient(theta)
    v = (np.eye(3) - 0.5 * W + d * (W @ W)) @ g.matrix[:3, 3]
    if tie:
        logger.debug("pi-rotation tie resolved with %s policy", LogBranchPolicy(policy).value)
    return hat(SE3, Twist.se3(v, omega), g.frames[0]), tie


def log_closed_se3(g: GroupElement, policy: LogBranchPolicy = LogBranchPolicy.PRINCIPAL) -> AlgebraElement:
    return log_closed_se3_with_tie(g, policy)[0]


# ---- generic logarithm ---------------------------------------------------

def _check_principal_domain(m: np.ndarray):
    for lam in np.linalg.eigvals(m):
        if abs(lam.imag) <= BRANCH_TOL * max(1.0, abs(lam)) and lam.real <= 0.0:
            raise BranchDomainError(
                f"Eigenvalue {lam:.6g} lies on the closed non-positive real axis; no principal logarithm"
            )


def _denman_beavers_sqrt(A: np.ndarray) -> np.ndarray:
    Y = A
    Z = np.eye(A.shape[0], dtype=A.dtype)
    previous = np.inf
    for _ in range(SQRT_MAX_ITER):
        try:
            Y_inv = np.linalg.inv(Y)
            Z_inv = np.linalg.inv(Z)
        except np.linalg.LinAlgError as exc:
            raise ConditioningError(f"Square-root iteration hit a singular iterate: {exc}")
        Y_next = 0.5 * (Y + Z_inv)
        Z = 0.5 * (Z + Y_inv)
        change = float(np.linalg.norm(Y_next - Y)) / max(1.0, float(np.linalg.norm(Y_next)))
        Y = Y_next
        if change <= SQRT_TOL:
            return Y
        # stagnated at the rounding floor
        if change < 1e-10 and change >= previous:
            return Y
        previous = change
    raise ConditioningError(f"Square-root iteration did not converge in {SQRT_MAX_ITER} steps")


def _log_series(X: np.ndarray, terms: int) -> np.ndarray:
    total = np.zeros_like(X)
    power = np.eye(X.shape[0], dtype=X.dtype)
    for j in range(1, terms + 1):
        power = power @ X
        total = total + ((-1) ** (j + 1) / j) * power
    return total


def _log_series_converged(X: np.ndarray) -> np.ndarray:
    total = np.zeros_like(X)
    power = np.eye(X.shape[0], dtype=X.dtype)
    eps = np.finfo(float).eps
    for j in range(1, 400):
        power = power @ X
        term = ((-1) ** (j + 1) / j) * power
        total = total + term
        if np.linalg.norm(term) <= eps * max(1e-300, np.linalg.norm(total)):
            break
    return total


def log_generic(g: GroupElement) -> AlgebraElement:
    """Principal logarithm by inverse scaling and squaring"""
    m = g.matrix
    tag = g.tag
    eye = np.eye(tag.dim, dtype=m.dtype)
    if np.array_equal(m, eye):
        return AlgebraElement.zero(tag, g.frames[0])

    _check_principal_domain(m)

    A = m
    k = 0
    while np.linalg.norm(A - eye) >= SQRT_TARGET:
        if k >= MAX_SQUARE_ROOTS:
            raise ConditioningError(f"No convergence after {MAX_SQUARE_ROOTS} square roots")
        A = _denman_beavers_sqrt(A)
        k += 1

    L = (2.0 ** k) * _log_series_converged(A - eye)
    if not tag.is_complex:
        L = np.real(L)

    residual = algebra_residual(L, tag)
    if residual > get_settings().tau_mem * max(1.0, float(np.linalg.norm(L))):
        raise LogEscapesAlgebraError(f"Principal log left the algebra of {tag} (residual {residual:.3g})")
    return AlgebraElement(project_to_algebra(L, tag), tag, g.frames[0], validate=False)


def log_series_truncated(g: GroupElement, terms: int) -> AlgebraElement:
    """Partial sum of the Mercator series; only valid for ||g - I||_F < 1"""
    if isinstance(terms, bool) or int(terms) != terms or terms < 1:
        raise InvalidInputError(f"terms must be a positive integer, got {terms!r}")
    X = g.matrix - np.eye(g.tag.dim, dtype=g.matrix.dtype)
    distance = float(np.linalg.norm(X))
    if distance >= 1.0:
        raise OutOfRegionError(f"||g - I||_F = {distance:.4g} is outside the series' convergence region")
    return AlgebraElement(_log_series(X, int(terms)), g.tag, g.frames[0], validate=False)


def log_with_tie(g: GroupElement, policy: LogBranchPolicy = LogBranchPolicy.PRINCIPAL) -> Tuple[AlgebraElement, bool]:
    if g.tag == SO3:
        return log_closed_so3_with_tie(g, policy)
    if g.tag == SE3:
        return log_closed_se3_with_tie(g, policy)
    return log_generic(g), False


def log(g: GroupElement, policy: LogBranchPolicy = LogBranchPolicy.PRINCIPAL) -> AlgebraElement:
    return log_with_tie(g, policy)[0]
