from typing import Dict, List

import numpy as np

from ..models.errors import InvalidInputError
from ..models.groups import AlgebraElement, GroupElement
from ..models.tags import GroupTag


def matrix_to_json(m: np.ndarray) -> List[List]:
    """Row-major nested lists; complex entries become [re, im] pairs"""
    m = np.asarray(m)
    if np.iscomplexobj(m):
        return [[[float(z.real), float(z.imag)] for z in row] for row in m]
    return [[float(x) for x in row] for row in m]


def matrix_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim != 2:
        raise InvalidInputError(f"Expected a nested 2-D matrix, got array of shape {arr.shape}")
    return arr


def group_element_to_json(g: GroupElement) -> Dict:
    return {"tag": g.tag.to_json(), "frames": list(g.frames), "matrix": matrix_to_json(g.matrix)}


def group_element_from_json(data: Dict) -> GroupElement:
    return GroupElement(matrix_from_json(data["matrix"]), GroupTag.from_json(data["tag"]), tuple(data["frames"]))


def algebra_element_to_json(X: AlgebraElement) -> Dict:
    return {"tag": X.tag.to_json(), "frame": X.frame, "matrix": matrix_to_json(X.matrix)}


def algebra_element_from_json(data: Dict) -> AlgebraElement:
    return AlgebraElement(matrix_from_json(data["matrix"]), GroupTag.from_json(data["tag"]), data["frame"])
