import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from scipy.linalg import solve

from ..config import get_settings
from ..lie.core import adjoint_conjugate, adjoint_matrix, vee
from ..lie.exp_log import exp_closed_se3
from ..models.errors import InvalidInputError, LieTrackError, NearSingularityError
from ..models.groups import AlgebraElement, GroupElement, Twist
from ..models.records import ControllerConfig, JointState, KinematicChain, ReferenceTrajectory, SimRecord
from ..models.tags import SE3
from ..utils.serialization import matrix_from_json, matrix_to_json
from .controller_service import TrackingController
from .simulation_service import TrackingRun, reference_poses, reference_velocity

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).resolve().parents[2] / "fixtures"
SYNTHETIC_CHAIN_PATH = FIXTURE_DIR / "synthetic_7dof.json"


def revolute_twist(axis, point) -> np.ndarray:
    """(v, omega) = (-omega x q, omega) for a unit axis through q"""
    omega = np.asarray(axis, dtype=float)
    omega = omega / np.linalg.norm(omega)
    q = np.asarray(point, dtype=float)
    return np.concatenate([-np.cross(omega, q), omega])


def prismatic_twist(axis) -> np.ndarray:
    v = np.asarray(axis, dtype=float)
    return np.concatenate([v / np.linalg.norm(v), np.zeros(3)])


def _joint_exponentials(chain: KinematicChain, theta: np.ndarray) -> List[np.ndarray]:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.shape[0] != chain.n_joints:
        raise InvalidInputError(f"Chain has {chain.n_joints} joints, got {theta.shape[0]} angles")
    return [exp_closed_se3(Twist(xi * th)).matrix for xi, th in zip(chain.joint_twists, theta)]


def forward_kinematics(chain: KinematicChain, theta) -> GroupElement:
    """Product of exponentials exp(xi_1 th_1) ... exp(xi_n th_n) g_st0"""
    g = np.eye(4)
    for e in _joint_exponentials(chain, theta):
        g = g @ e
    return GroupElement(g @ chain.g_st0.matrix, SE3, ("S", "T"))


def spatial_jacobian(chain: KinematicChain, theta) -> np.ndarray:
    """6 x n matrix whose i-th column is the i-th twist carried through the preceding joints"""
    exps = _joint_exponentials(chain, theta)
    J = np.zeros((6, chain.n_joints))
    prefix = np.eye(4)
    for i, xi in enumerate(chain.joint_twists):
        J[:, i] = adjoint_matrix(GroupElement(prefix, SE3, validate=False)) @ xi
        prefix = prefix @ exps[i]
    return J


def body_to_spatial(g_ST: GroupElement, Vb: AlgebraElement) -> Twist:
    return vee(SE3, adjoint_conjugate(g_ST, Vb))


def joint_velocity_command(
    J: np.ndarray,
    Vs: Union[Twist, np.ndarray],
    damping: float = 0.0,
    sigma_min: Optional[float] = None,
) -> np.ndarray:
    """Joint rates realizing the spatial twist Vs: minimum-norm pseudoinverse, or damped least squares"""
    J = np.asarray(J, dtype=float)
    Vs = Vs.vector if isinstance(Vs, Twist) else np.asarray(Vs, dtype=float)
    if J.ndim != 2 or J.shape[0] != 6 or Vs.shape != (6,):
        raise InvalidInputError(f"Expected a 6 x n Jacobian and a 6-vector, got {J.shape} and {Vs.shape}")
    if damping < 0:
        raise InvalidInputError(f"damping must be non-negative, got {damping}")
    sigma_min = get_settings().sigma_min if sigma_min is None else sigma_min

    U, s, Vt = np.linalg.svd(J, full_matrices=False)
    if damping == 0.0:
        if s.min() < sigma_min:
            raise NearSingularityError(f"Smallest singular value {s.min():.3g} is below {sigma_min:g}")
        return Vt.T @ ((U.T @ Vs) / s)

    if s.min() < sigma_min:
        logger.warning("Jacobian near singular (sigma_min=%.3g); damped solve with lambda=%g", s.min(), damping)
    gram = J @ J.T + damping ** 2 * np.eye(6)
    return J.T @ solve(gram, Vs, assume_a="pos")


def run_arm_tracking(
    chain: KinematicChain,
    reference: ReferenceTrajectory,
    cfg: ControllerConfig,
    theta0,
    duration: float,
    dt: float,
    damping: float = 0.0,
    sigma_min: Optional[float] = None,
) -> SimRecord:
    """Cartesian tracking through joint-rate commands, Euler-integrated on the joint angles"""
    if not duration > 0 or not dt > 0:
        raise InvalidInputError(f"duration and dt must be positive, got {duration} and {dt}")
    if reference.tag != SE3:
        raise InvalidInputError(f"Arm reference must live in SE(3), got {reference.tag}")
    if cfg.dt != dt:
        cfg = ControllerConfig(k=cfg.k, dt=dt, branch=cfg.branch)

    state = JointState(theta0)
    state.check_chain(chain)
    n_steps = int(np.floor(duration / dt + 1e-9))
    n_rows = n_steps + 1

    poses = reference_poses(reference, n_rows, dt)

    logger.info("Arm tracking: %d joints, k=%g dt=%g steps=%d", chain.n_joints, cfg.k, dt, n_steps)
    controller = TrackingController(cfg)
    run = TrackingRun(SE3, cfg.k, dt)
    extra: Dict[str, List[float]] = {f"theta_{i}": [] for i in range(chain.n_joints)}
    for name in ("x", "y", "z", "ref_x", "ref_y", "ref_z"):
        extra[name] = []
    min_singular = np.inf
    velocity = None

    for n in range(n_rows):
        try:
            velocity = reference_velocity(reference, poses, n, dt, velocity)
            g = forward_kinematics(chain, state.theta)
            u, err = controller.command(g, poses[n], velocity, step=n)
            run.add(n, g, u, err)
            for i, th in enumerate(state.theta):
                extra[f"theta_{i}"].append(th)
            for axis, value in zip("xyz", g.matrix[:3, 3]):
                extra[axis].append(value)
            for axis, value in zip("xyz", poses[n].matrix[:3, 3]):
                extra[f"ref_{axis}"].append(value)
            if n == n_steps:
                break

            J = spatial_jacobian(chain, state.theta)
            min_singular = min(min_singular, float(np.linalg.svd(J, compute_uv=False).min()))
            state.theta_dot = joint_velocity_command(J, body_to_spatial(g, u), damping, sigma_min)
            state.theta = state.theta + state.theta_dot * dt
        except LieTrackError as exc:
            exc.step = n
            logger.error("Arm tracking aborted at step %d: %s", n, exc)
            raise

    diagnostics = controller.diagnostics()
    diagnostics["min_singular_value"] = min_singular
    return run.record(extra=extra, diagnostics=diagnostics)


# ---- chain fixtures ------------------------------------------------------

def read_chain_document(source: Union[str, Path, Dict]) -> Dict:
    if isinstance(source, dict):
        return source
    with open(source) as f:
        return json.load(f)


def chain_from_document(doc: Dict) -> KinematicChain:
    try:
        twists = []
        for joint in doc["joints"]:
            kind = joint.get("type", "revolute")
            if kind == "revolute":
                twists.append(revolute_twist(joint["axis"], joint["point"]))
            elif kind == "prismatic":
                twists.append(prismatic_twist(joint["axis"]))
            else:
                raise InvalidInputError(f"Unknown joint type: {kind}")
        tool = GroupElement(matrix_from_json(doc["tool_zero_pose"]), SE3, ("S", "T"))
    except KeyError as exc:
        raise InvalidInputError(f"Chain document is missing {exc}")
    return KinematicChain(np.array(twists), tool, doc.get("joint_limits"))


def load_chain(source: Union[str, Path, Dict] = SYNTHETIC_CHAIN_PATH) -> KinematicChain:
    return chain_from_document(read_chain_document(source))


def chain_to_json(chain: KinematicChain) -> Dict:
    joints = []
    for xi in chain.joint_twists:
        v, omega = xi[:3], xi[3:]
        if np.linalg.norm(omega) > 0:
            joints.append({"type": "revolute", "axis": omega.tolist(), "point": np.cross(omega, v).tolist()})
        else:
            joints.append({"type": "prismatic", "axis": v.tolist()})
    doc = {"joints": joints, "tool_zero_pose": matrix_to_json(chain.g_st0.matrix)}
    if chain.joint_limits is not None:
        doc["joint_limits"] = np.asarray(chain.joint_limits).tolist()
    return doc
