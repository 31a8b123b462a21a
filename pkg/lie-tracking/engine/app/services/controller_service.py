import logging
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..config import get_settings
from ..lie.core import adjoint_conjugate, compose, identity_deviation, inverse
from ..lie.exp_log import exp, log_with_tie
from ..models.errors import BranchDomainError, FrameCompositionError, InvalidInputError
from ..models.groups import AlgebraElement, GroupElement, LogBranchPolicy
from ..models.records import ControllerConfig, TrackingError
from ..models.tags import SE3, SO3

logger = logging.getLogger(__name__)

# One-step reference motion must stay strictly inside the injectivity radius
PI_STEP_MARGIN = 1e-9


class DecayMode(str, Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


def tracking_error(
    g_ST: GroupElement,
    g_SD: GroupElement,
    branch: LogBranchPolicy = LogBranchPolicy.PRINCIPAL,
) -> TrackingError:
    """Configuration error g_TD = g_ST^-1 g_SD and its exponential coordinates"""
    if get_settings().check_frames and g_ST.frames[0] != g_SD.frames[0]:
        raise FrameCompositionError(
            f"Tool and reference poses must share a base frame, got {g_ST.frames[0]} and {g_SD.frames[0]}"
        )
    g_TD = compose(inverse(g_ST), g_SD)
    xi_TD, tie = log_with_tie(g_TD, branch)
    frobenius, spectral = identity_deviation(g_TD)
    return TrackingError(
        g_TD=g_TD,
        xi_TD=xi_TD,
        in_local_region=spectral < 1.0,
        spectral_radius=spectral,
        frobenius=frobenius,
        branch_tie=tie,
    )


def control_terms(err: TrackingError, Vb_SD: AlgebraElement, cfg: ControllerConfig) -> Tuple[AlgebraElement, AlgebraElement]:
    """Feedback k*xi_TD and feedforward g_TD Vb_SD g_TD^-1, both in frame T"""
    feedback = cfg.k * err.xi_TD
    feedforward = adjoint_conjugate(err.g_TD, Vb_SD)
    return feedback, feedforward


def control_law(err: TrackingError, Vb_SD: AlgebraElement, cfg: ControllerConfig) -> AlgebraElement:
    feedback, feedforward = control_terms(err, Vb_SD, cfg)
    return feedback + feedforward


def reference_body_velocity_discrete(g_SD_now: GroupElement, g_SD_next: GroupElement, dt: float) -> AlgebraElement:
    """(1/dt) log(g_SD(n)^-1 g_SD(n+1)), the constant body velocity joining two samples"""
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    delta = compose(inverse(g_SD_now), g_SD_next)
    step, _ = log_with_tie(delta)

    if delta.tag in (SO3, SE3):
        angle = float(np.linalg.norm(step.matrix[:3, :3])) / np.sqrt(2.0)
        if angle >= np.pi - PI_STEP_MARGIN:
            raise BranchDomainError(f"Reference rotates {angle:.6g} rad in one step; reduce dt")
    return step / dt


def predicted_error_decay(
    xi0: AlgebraElement,
    cfg: ControllerConfig,
    t_or_n: Union[float, int],
    mode: DecayMode = DecayMode.CONTINUOUS,
) -> AlgebraElement:
    mode = DecayMode(mode)
    if mode == DecayMode.CONTINUOUS:
        if t_or_n < 0:
            raise InvalidInputError(f"time must be non-negative, got {t_or_n}")
        return float(np.exp(-cfg.k * t_or_n)) * xi0

    if isinstance(t_or_n, bool) or int(t_or_n) != t_or_n or t_or_n < 0:
        raise InvalidInputError(f"discrete decay needs a non-negative step count, got {t_or_n!r}")
    return (1.0 - cfg.k * cfg.dt) ** int(t_or_n) * xi0


def closed_loop_error_velocity(
    g_TD: GroupElement,
    u: AlgebraElement,
    Vb_SD: AlgebraElement,
    h: float = 1e-6,
) -> AlgebraElement:
    """Central-difference estimate of the spatial error velocity dg_TD/dt g_TD^-1.

    Under constant u and Vb_SD the error evolves as g_TD(t) = exp(-u t) g_TD exp(Vb_SD t).
    """
    def advance(t: float) -> np.ndarray:
        return exp(u * (-t)).matrix @ g_TD.matrix @ exp(Vb_SD * t).matrix

    derivative = (advance(h) - advance(-h)) / (2.0 * h)
    return AlgebraElement(derivative @ inverse(g_TD).matrix, g_TD.tag, g_TD.frames[0], validate=False)


class TrackingController:
    """Stateful wrapper around control_law that remembers branch events across a run"""

    def __init__(self, cfg: ControllerConfig):
        self.cfg = cfg
        self.branch_tie_steps: List[int] = []
        self.outside_local_region = 0
        self.steps = 0

    def command(
        self,
        g_ST: GroupElement,
        g_SD: GroupElement,
        Vb_SD: AlgebraElement,
        step: Optional[int] = None,
    ) -> Tuple[AlgebraElement, TrackingError]:
        err = tracking_error(g_ST, g_SD, self.cfg.branch)
        if err.branch_tie:
            self.branch_tie_steps.append(self.steps if step is None else step)
            logger.debug("Error sits on the pi-rotation locus at step %s", step)
        if not err.in_local_region:
            self.outside_local_region += 1
        self.steps += 1
        return control_law(err, Vb_SD, self.cfg), err

    def diagnostics(self) -> Dict:
        return {
            "branch_tie_steps": list(self.branch_tie_steps),
            "steps_outside_local_region": self.outside_local_region,
            "steps": self.steps,
        }
