from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .tags import GroupFamily, GroupTag

ExperimentName = Literal["se3_helix", "su4_constant", "gl4_random_walk", "arm_helix", "custom"]
MetricName = Literal["err_frobenius", "err_log_norm", "err_spectral"]


class GroupSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: GroupFamily
    n: int = Field(ge=1)

    def to_tag(self) -> GroupTag:
        return GroupTag(self.family, self.n)


class ReferenceSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["constant_twist", "random_walk"] = "constant_twist"
    coordinates: Optional[List[float]] = None  # algebra coordinates of the body velocity
    v_max: Optional[float] = Field(default=None, gt=0)


class Tolerances(BaseModel):
    model_config = ConfigDict(extra="forbid")

    decay_rate_rel: float = Field(default=0.05, gt=0)
    r_squared_min: float = Field(default=0.999, ge=0, le=1)
    steady_state_max: Optional[float] = Field(default=None, gt=0)


class HelixSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    radius: float = Field(default=0.1, gt=0)
    angular_rate: float = 0.5
    climb_rate: float = 0.02


class SweepEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    label: str = Field(pattern=r"^[A-Za-z0-9_.-]+$")
    k: Optional[float] = Field(default=None, gt=0)
    dt: Optional[float] = Field(default=None, gt=0)
    duration: Optional[float] = Field(default=None, gt=0)
    seed: Optional[int] = None
    min_spectral_radius: Optional[float] = Field(default=None, ge=0)


class RunConfig(BaseModel):
    """One experiment run; unset fields take the experiment's built-in defaults"""
    model_config = ConfigDict(extra="forbid")

    experiment: ExperimentName
    group: Optional[GroupSpec] = None
    k: Optional[float] = Field(default=None, gt=0)
    dt: Optional[float] = Field(default=None, gt=0)
    duration: Optional[float] = Field(default=None, gt=0)
    seed: int = 0
    min_spectral_radius: Optional[float] = Field(default=None, ge=0)
    reference: Optional[ReferenceSpec] = None
    fit_window: Optional[Tuple[float, float]] = None
    fit_metric: Optional[MetricName] = None
    tolerances: Optional[Tolerances] = None
    include_state: bool = False
    out: Optional[str] = None

    # arm experiment
    chain: Optional[str] = None
    damping: float = Field(default=0.0, ge=0)
    sigma_min: Optional[float] = Field(default=None, gt=0)
    helix: Optional[HelixSpec] = None
    theta_offset: Optional[List[float]] = None

    sweep: Optional[List[SweepEntry]] = None

    @model_validator(mode="after")
    def check_consistency(self):
        if self.experiment == "custom" and self.group is None:
            raise ValueError("custom experiments need a group")
        if self.fit_window is not None and not self.fit_window[0] < self.fit_window[1]:
            raise ValueError(f"fit_window must be increasing, got {self.fit_window}")
        if self.k is not None and self.dt is not None and self.k * self.dt >= 2.0:
            raise ValueError(f"k*dt must be < 2, got {self.k * self.dt:g}")
        if self.sweep:
            labels = [entry.label for entry in self.sweep]
            if len(set(labels)) != len(labels):
                raise ValueError("sweep labels must be unique")
        return self
