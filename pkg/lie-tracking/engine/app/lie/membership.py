import numpy as np

from ..models.tags import GroupFamily, GroupTag


def _imag_norm(m: np.ndarray) -> float:
    if np.iscomplexobj(m):
        return float(np.linalg.norm(m.imag))
    return 0.0


def membership_residual(m: np.ndarray, tag: GroupTag) -> float:
    """Largest violation of the defining relations of `tag`; inf when the shape or determinant rules it out"""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape != (tag.dim, tag.dim) or not np.all(np.isfinite(m)):
        return np.inf

    family = tag.family
    eye = np.eye(tag.n)

    if family == GroupFamily.SO:
        orth = np.linalg.norm(m.conj().T @ m - eye)
        det = abs(np.linalg.det(m) - 1.0)
        return max(orth, det, _imag_norm(m))

    if family == GroupFamily.SU:
        unitary = np.linalg.norm(m.conj().T @ m - eye)
        det = abs(np.linalg.det(m) - 1.0)
        return max(unitary, det)

    if family == GroupFamily.SE:
        rot = m[: tag.n, : tag.n]
        orth = np.linalg.norm(rot.conj().T @ rot - eye)
        det = abs(np.linalg.det(rot) - 1.0)
        bottom = np.zeros(tag.dim)
        bottom[-1] = 1.0
        row = np.linalg.norm(m[tag.n, :] - bottom)
        return max(orth, det, row, _imag_norm(m))

    # GL families: invertibility is the only relation
    return 0.0


def check_membership(m: np.ndarray, tag: GroupTag, tau: float) -> bool:
    residual = membership_residual(m, tag)
    if not residual <= tau:
        return False
    m = np.asarray(m)
    if tag.family == GroupFamily.GL0:
        return _imag_norm(m) <= tau and float(np.linalg.det(m.real)) > tau
    if tag.family == GroupFamily.GLC:
        return abs(np.linalg.det(m)) > tau
    return True


def algebra_residual(m: np.ndarray, tag: GroupTag) -> float:
    """Distance (Frobenius) from the algebra constraint of `tag`"""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape != (tag.dim, tag.dim) or not np.all(np.isfinite(m)):
        return np.inf

    family = tag.family
    if family == GroupFamily.SO:
        return max(float(np.linalg.norm(m + m.T)), _imag_norm(m))
    if family == GroupFamily.SU:
        return max(float(np.linalg.norm(m + m.conj().T)), abs(np.trace(m)))
    if family == GroupFamily.SE:
        block = m[: tag.n, : tag.n]
        return max(
            float(np.linalg.norm(block + block.T)),
            float(np.linalg.norm(m[tag.n, :])),
            _imag_norm(m),
        )
    if family == GroupFamily.GL0:
        return _imag_norm(m)
    return 0.0


def in_algebra(m: np.ndarray, tag: GroupTag, tau: float) -> bool:
    return algebra_residual(m, tag) <= tau


def project_to_algebra(m: np.ndarray, tag: GroupTag) -> np.ndarray:
    """Nearest algebra element in Frobenius norm"""
    m = np.asarray(m)
    family = tag.family
    if not tag.is_complex:
        m = np.real(m)
    if family == GroupFamily.SO:
        return 0.5 * (m - m.T)
    if family == GroupFamily.SU:
        skew = 0.5 * (m - m.conj().T)
        return skew - (np.trace(skew) / tag.n) * np.eye(tag.n)
    if family == GroupFamily.SE:
        out = np.array(m, dtype=float, copy=True)
        block = out[: tag.n, : tag.n]
        out[: tag.n, : tag.n] = 0.5 * (block - block.T)
        out[tag.n, :] = 0.0
        return out
    return np.array(m, dtype=tag.dtype, copy=True)
