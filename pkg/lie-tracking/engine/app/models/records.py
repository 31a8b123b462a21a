import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..utils.serialization import matrix_to_json
from .errors import InvalidInputError
from .groups import AlgebraElement, GroupElement, LogBranchPolicy
from .tags import SE3, GroupTag

METRIC_COLUMNS = ["err_frobenius", "err_log_norm", "err_spectral"]


class ControllerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: float = Field(default=1.0, gt=0)
    dt: float = Field(default=0.01, gt=0)
    branch: LogBranchPolicy = LogBranchPolicy.PRINCIPAL

    @model_validator(mode="after")
    def check_discrete_stability(self):
        # |1 - k dt| < 1
        if self.k * self.dt >= 2.0:
            raise ValueError(f"k*dt must be < 2 for the discrete law, got {self.k * self.dt:g}")
        return self


@dataclass(frozen=True, eq=False)
class TrackingError:
    g_TD: GroupElement
    xi_TD: AlgebraElement
    in_local_region: bool
    spectral_radius: float
    frobenius: float
    branch_tie: bool = False

    @property
    def log_norm(self) -> float:
        return self.xi_TD.norm()


class ReferenceKind(str, Enum):
    CONSTANT_TWIST = "constant_twist"
    RANDOM_WALK = "random_walk"
    SAMPLED = "sampled"


@dataclass(frozen=True, eq=False)
class ReferenceTrajectory:
    """Desired pose g_SD over time; velocities are body velocities in frame D"""
    kind: ReferenceKind
    g0: GroupElement
    v_max: float
    velocity: Optional[AlgebraElement] = None
    samples: Optional[Tuple[GroupElement, ...]] = None
    seed: Optional[int] = None

    def __post_init__(self):
        kind = ReferenceKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind == ReferenceKind.CONSTANT_TWIST and self.velocity is None:
            raise InvalidInputError("constant_twist reference needs a body velocity")
        if kind == ReferenceKind.RANDOM_WALK and self.seed is None:
            raise InvalidInputError("random_walk reference needs a seed")
        if kind == ReferenceKind.SAMPLED:
            if not self.samples:
                raise InvalidInputError("sampled reference needs at least one pose")
            object.__setattr__(self, "samples", tuple(self.samples))
        if not self.v_max > 0:
            raise InvalidInputError(f"v_max must be positive, got {self.v_max}")

    @property
    def tag(self) -> GroupTag:
        return self.g0.tag


@dataclass(frozen=True, eq=False)
class Scenario:
    tag: GroupTag
    reference: ReferenceTrajectory
    initial_state: GroupElement
    cfg: ControllerConfig
    duration: float
    dt: float
    seed: int = 0

    def __post_init__(self):
        if not self.duration > 0:
            raise InvalidInputError(f"duration must be positive, got {self.duration}")
        if not self.dt > 0:
            raise InvalidInputError(f"dt must be positive, got {self.dt}")
        if self.reference.tag != self.tag or self.initial_state.tag != self.tag:
            raise InvalidInputError(f"Scenario mixes groups: expected {self.tag} throughout")
        if self.cfg.dt != self.dt:
            object.__setattr__(self, "cfg", ControllerConfig(k=self.cfg.k, dt=self.dt, branch=self.cfg.branch))

    @property
    def n_steps(self) -> int:
        return int(np.floor(self.duration / self.dt + 1e-9))


@dataclass(eq=False)
class SimRecord:
    """Per-step history of one tracking run"""
    tag: GroupTag
    k: float
    dt: float
    times: np.ndarray
    states: List[GroupElement]
    controls: List[AlgebraElement]
    xi: List[np.ndarray]
    err_frobenius: np.ndarray
    err_log_norm: np.ndarray
    err_spectral: np.ndarray
    extra: Dict[str, np.ndarray] = field(default_factory=dict)
    diagnostics: Dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def metric(self, name: str) -> np.ndarray:
        if name in METRIC_COLUMNS:
            return getattr(self, name)
        if name in self.extra:
            return self.extra[name]
        raise InvalidInputError(f"Unknown metric column: {name}")

    def to_frame(self, include_state: bool = False) -> pd.DataFrame:
        df = pd.DataFrame({
            "t": self.times,
            "err_frobenius": self.err_frobenius,
            "err_log_norm": self.err_log_norm,
            "err_spectral": self.err_spectral,
        })
        for name, values in self.extra.items():
            df[name] = values

        if include_state:
            stacked = np.stack([g.matrix for g in self.states])
            dim = self.tag.dim
            for i in range(dim):
                for j in range(dim):
                    if self.tag.is_complex:
                        df[f"g_{i}{j}_re"] = stacked[:, i, j].real
                        df[f"g_{i}{j}_im"] = stacked[:, i, j].imag
                    else:
                        df[f"g_{i}{j}"] = stacked[:, i, j]
        return df

    def to_csv(self, path: Union[str, Path], include_state: bool = False) -> Path:
        path = Path(path)
        # 17 significant digits so the file reads back bit-exactly
        self.to_frame(include_state).to_csv(path, index=False, float_format="%.17g")
        return path

    def to_dict(self) -> Dict:
        return {
            "tag": self.tag.to_json(),
            "k": self.k,
            "dt": self.dt,
            "times": self.times.tolist(),
            "metrics": {name: getattr(self, name).tolist() for name in METRIC_COLUMNS},
            "extra": {name: np.asarray(values).tolist() for name, values in self.extra.items()},
            "states": [matrix_to_json(g.matrix) for g in self.states],
            "controls": [matrix_to_json(u.matrix) for u in self.controls],
            "xi": [matrix_to_json(x) for x in self.xi],
            "diagnostics": self.diagnostics,
        }

    def to_json(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)
        return path


@dataclass(frozen=True, eq=False)
class KinematicChain:
    """Joint twists (v, omega) at zero configuration plus the zero-configuration tool pose"""
    joint_twists: np.ndarray
    g_st0: GroupElement
    joint_limits: Optional[np.ndarray] = None

    def __post_init__(self):
        twists = np.array(self.joint_twists, dtype=float, copy=True)
        if twists.ndim != 2 or twists.shape[1] != 6 or twists.shape[0] < 1:
            raise InvalidInputError(f"Chain needs an (n, 6) array of joint twists with n >= 1, got {twists.shape}")
        for i, xi in enumerate(twists):
            w_norm = np.linalg.norm(xi[3:])
            v_norm = np.linalg.norm(xi[:3])
            revolute = abs(w_norm - 1.0) <= 1e-9
            prismatic = w_norm <= 1e-12 and abs(v_norm - 1.0) <= 1e-9
            if not (revolute or prismatic):
                raise InvalidInputError(f"Joint {i}: twist must have unit omega or unit v with zero omega")
        twists.setflags(write=False)
        object.__setattr__(self, "joint_twists", twists)

        if self.g_st0.tag != SE3:
            raise InvalidInputError(f"Tool zero pose must be an SE(3) element, got {self.g_st0.tag}")
        if self.joint_limits is not None:
            limits = np.array(self.joint_limits, dtype=float)
            if limits.shape != (twists.shape[0], 2):
                raise InvalidInputError(f"joint_limits must have shape ({twists.shape[0]}, 2)")
            object.__setattr__(self, "joint_limits", limits)

    @property
    def n_joints(self) -> int:
        return self.joint_twists.shape[0]


@dataclass(eq=False)
class JointState:
    theta: np.ndarray
    theta_dot: Optional[np.ndarray] = None

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if self.theta_dot is None:
            self.theta_dot = np.zeros_like(self.theta)
        self.theta_dot = np.asarray(self.theta_dot, dtype=float).reshape(-1)
        if self.theta_dot.shape != self.theta.shape:
            raise InvalidInputError("theta and theta_dot must have the same length")

    def check_chain(self, chain: KinematicChain):
        if self.theta.shape[0] != chain.n_joints:
            raise InvalidInputError(f"Chain has {chain.n_joints} joints, state has {self.theta.shape[0]}")
