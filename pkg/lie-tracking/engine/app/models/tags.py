from dataclasses import dataclass
from enum import Enum
from typing import Dict, Union

import numpy as np

from .errors import InvalidInputError


class GroupFamily(str, Enum):
    SO = "SO"
    SE = "SE"
    SU = "SU"
    GL0 = "GL0"  # real, positive determinant
    GLC = "GLC"  # complex general linear


_REAL_FAMILIES = (GroupFamily.SO, GroupFamily.SE, GroupFamily.GL0)


@dataclass(frozen=True)
class GroupTag:
    family: GroupFamily
    n: int

    def __post_init__(self):
        try:
            family = GroupFamily(self.family)
        except ValueError:
            raise InvalidInputError(f"Unknown group family: {self.family!r}")
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise InvalidInputError(f"Group dimension must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "n", int(self.n))

    @property
    def dim(self) -> int:
        """Ambient matrix size (homogeneous form for SE(n))"""
        return self.n + 1 if self.family == GroupFamily.SE else self.n

    @property
    def is_complex(self) -> bool:
        return self.family not in _REAL_FAMILIES

    @property
    def dtype(self):
        return np.complex128 if self.is_complex else np.float64

    @property
    def has_canonical_coordinates(self) -> bool:
        return self.n == 3 and self.family in (GroupFamily.SO, GroupFamily.SE)

    def to_json(self) -> Dict:
        return {"family": self.family.value, "n": self.n}

    @classmethod
    def from_json(cls, data: Union[Dict, "GroupTag"]) -> "GroupTag":
        if isinstance(data, GroupTag):
            return data
        return cls(GroupFamily(data["family"]), int(data["n"]))

    def __str__(self) -> str:
        return f"{self.family.value}({self.n})"


SO3 = GroupTag(GroupFamily.SO, 3)
SE3 = GroupTag(GroupFamily.SE, 3)
