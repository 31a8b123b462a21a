import logging
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..config import get_settings
from ..lie.core import (
    algebra_dimension,
    algebra_from_coordinates,
    algebra_to_coordinates,
    compose,
    identity_deviation,
)
from ..lie.exp_log import exp, log
from ..models.errors import InfeasibleOffsetError, InvalidInputError, LieTrackError
from ..models.groups import AlgebraElement, GroupElement
from ..models.records import ReferenceKind, ReferenceTrajectory
from ..models.tags import SE3, GroupTag

logger = logging.getLogger(__name__)

OFFSET_MARGIN = 0.1
OFFSET_ATTEMPTS = 1000
# Geometric ladder from 1/16 up to 4
OFFSET_SCALES = tuple(float(s) for s in 0.0625 * 1.25 ** np.arange(20) if s <= 4.0)


def random_algebra_element(tag: GroupTag, rng: np.random.Generator, bound: float, frame: str = "S") -> AlgebraElement:
    """Coordinates drawn i.i.d. uniform on [-bound, bound]"""
    coords = rng.uniform(-bound, bound, size=algebra_dimension(tag))
    return algebra_from_coordinates(tag, coords, frame)


def make_reference(kind: Union[ReferenceKind, str], params: Dict, seed: int = 0) -> ReferenceTrajectory:
    """Build a reference from its kind and parameters.

    params: tag, g0 (defaults to the identity), velocity or coordinates (constant_twist),
    v_max (random_walk bound; the declared bound otherwise) and samples (sampled).
    """
    kind = ReferenceKind(kind)
    settings = get_settings()

    if kind == ReferenceKind.SAMPLED:
        samples = params.get("samples")
        if not samples:
            raise InvalidInputError("sampled reference needs a list of poses")
        samples = tuple(s.relabel(("S", "D")) for s in samples)
        return ReferenceTrajectory(
            kind=kind,
            g0=samples[0],
            v_max=float(params.get("v_max", settings.v_max)),
            samples=samples,
        )

    tag = GroupTag.from_json(params["tag"])
    g0 = params.get("g0")
    g0 = GroupElement.identity(tag, ("S", "D")) if g0 is None else g0.relabel(("S", "D"))

    if kind == ReferenceKind.RANDOM_WALK:
        return ReferenceTrajectory(
            kind=kind,
            g0=g0,
            v_max=float(params.get("v_max", settings.v_max)),
            seed=int(seed),
        )

    velocity = params.get("velocity")
    if velocity is None:
        if "coordinates" not in params:
            raise InvalidInputError("constant_twist reference needs a velocity or its coordinates")
        velocity = algebra_from_coordinates(tag, params["coordinates"], "D")
    velocity = velocity.with_frame("D")

    peak = float(np.max(np.abs(algebra_to_coordinates(tag, velocity))))
    v_max = params.get("v_max")
    if v_max is None:
        v_max = peak if peak > 0 else settings.v_max
    elif peak > v_max:
        raise InvalidInputError(f"Body velocity coordinates reach {peak:.4g}, above the declared bound {v_max}")
    return ReferenceTrajectory(kind=kind, g0=g0, v_max=float(v_max), velocity=velocity, seed=int(seed))


def random_walk_coordinates(reference: ReferenceTrajectory, n_steps: int) -> np.ndarray:
    """Per-step body-velocity coordinates; the same reference always yields the same draws"""
    rng = np.random.default_rng(reference.seed)
    return rng.uniform(-reference.v_max, reference.v_max, size=(n_steps, algebra_dimension(reference.tag)))


def rollout(reference: ReferenceTrajectory, n_poses: int, dt: float) -> List[GroupElement]:
    """Reference poses g_SD(0), ..., g_SD(n_poses - 1) on the grid t = n dt"""
    if reference.kind == ReferenceKind.SAMPLED:
        if len(reference.samples) < n_poses:
            raise InvalidInputError(f"Reference has {len(reference.samples)} samples, run needs {n_poses}")
        return list(reference.samples[:n_poses])

    poses = [reference.g0]
    if reference.kind == ReferenceKind.CONSTANT_TWIST:
        step = exp(reference.velocity * dt)
        for _ in range(n_poses - 1):
            poses.append(compose(poses[-1], step))
        return poses

    coords = random_walk_coordinates(reference, max(n_poses - 1, 0))
    for c in coords:
        velocity = algebra_from_coordinates(reference.tag, c, "D")
        poses.append(compose(poses[-1], exp(velocity * dt)))
    return poses


def _principal_margin(X: AlgebraElement) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(X.matrix).imag)))


def make_offset_initial_state(tag: GroupTag, seed: int, min_spectral_radius: float = 1.0) -> GroupElement:
    """Random exp(X) whose deviation from the identity has spectral radius above `min_spectral_radius`.

    X is kept inside the principal-log domain so the offset can be tracked from its coordinates.
    """
    if min_spectral_radius < 0:
        raise InvalidInputError(f"min_spectral_radius must be non-negative, got {min_spectral_radius}")
    rng = np.random.default_rng(seed)
    bound = np.pi - OFFSET_MARGIN

    for attempt in range(OFFSET_ATTEMPTS):
        direction = random_algebra_element(tag, rng, bound)
        for scale in OFFSET_SCALES:
            X = direction * scale
            if _principal_margin(X) >= bound:
                break
            try:
                g = exp(X)
                _, spectral = identity_deviation(g)
                if min_spectral_radius > 0 and spectral <= min_spectral_radius:
                    continue
                log(g)
            except LieTrackError:
                continue
            logger.debug("Offset for %s found after %d attempts (spectral radius %.3f)", tag, attempt + 1, spectral)
            return g.relabel(("S", "T"))

    raise InfeasibleOffsetError(
        f"No {tag} offset with spectral radius > {min_spectral_radius} after {OFFSET_ATTEMPTS} attempts"
    )


def make_helix_samples(
    center: Sequence[float],
    radius: float,
    angular_rate: float,
    climb_rate: float,
    rotation: np.ndarray,
    n_samples: int,
    dt: float,
) -> List[GroupElement]:
    """Poses along a vertical circular helix with the orientation held fixed"""
    center = np.asarray(center, dtype=float)
    t = np.arange(n_samples) * dt
    samples = []
    for ti in t:
        g = np.eye(4)
        g[:3, :3] = rotation
        g[:3, 3] = center + np.array([
            radius * np.cos(angular_rate * ti),
            radius * np.sin(angular_rate * ti),
            climb_rate * ti,
        ])
        samples.append(GroupElement(g, SE3, ("S", "D")))
    return samples


class TrajectoryGenerator:
    """Splits one experiment seed into independent streams for the reference and the initial offset"""

    def __init__(self, seed: int):
        self.seed = int(seed)
        reference_seq, offset_seq, velocity_seq = np.random.SeedSequence(self.seed).spawn(3)
        self.reference_seed = int(reference_seq.generate_state(1)[0])
        self.offset_seed = int(offset_seq.generate_state(1)[0])
        self._velocity_rng = np.random.default_rng(velocity_seq)

    def reference(self, kind: Union[ReferenceKind, str], params: Dict) -> ReferenceTrajectory:
        return make_reference(kind, params, self.reference_seed)

    def random_velocity(self, tag: GroupTag, v_max: Optional[float] = None) -> AlgebraElement:
        bound = get_settings().v_max if v_max is None else v_max
        return random_algebra_element(tag, self._velocity_rng, bound, "D")

    def offset(self, tag: GroupTag, min_spectral_radius: float) -> GroupElement:
        return make_offset_initial_state(tag, self.offset_seed, min_spectral_radius)
