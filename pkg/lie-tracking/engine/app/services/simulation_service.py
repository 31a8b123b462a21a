import logging
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.stats import linregress

from ..config import get_settings
from ..lie.core import compose, identity_deviation, project_to_group
from ..lie.exp_log import exp
from ..models.errors import InsufficientSignalError, InvalidInputError, LieTrackError
from ..models.groups import AlgebraElement, GroupElement
from ..models.tags import GroupTag
from ..models.records import METRIC_COLUMNS, ReferenceKind, ReferenceTrajectory, Scenario, SimRecord
from ..utils.trajectory_generator import rollout
from .controller_service import TrackingController, reference_body_velocity_discrete

logger = logging.getLogger(__name__)

SIGNAL_FLOOR = 10 * np.finfo(float).eps


def step_left_invariant(g: GroupElement, u: AlgebraElement, dt: float) -> GroupElement:
    """Exact one-step flow of dg/dt = g u under constant u"""
    return compose(g, exp(u * dt))


def reference_poses(reference: ReferenceTrajectory, n_rows: int, dt: float) -> List[GroupElement]:
    """Poses for every row plus one look-ahead sample when the reference provides it"""
    if reference.kind == ReferenceKind.SAMPLED:
        if len(reference.samples) < n_rows:
            raise InvalidInputError(f"Reference has {len(reference.samples)} samples, run needs {n_rows}")
        return rollout(reference, min(n_rows + 1, len(reference.samples)), dt)
    return rollout(reference, n_rows + 1, dt)


def reference_velocity(
    reference: ReferenceTrajectory,
    poses: List[GroupElement],
    n: int,
    dt: float,
    previous: Optional[AlgebraElement] = None,
) -> AlgebraElement:
    """Body velocity fed forward at row n: analytic for constant twists, log-based otherwise"""
    if reference.kind == ReferenceKind.CONSTANT_TWIST:
        return reference.velocity
    if n + 1 < len(poses):
        return reference_body_velocity_discrete(poses[n], poses[n + 1], dt)
    # Past the last sample the reference keeps its final velocity
    return previous if previous is not None else AlgebraElement.zero(reference.tag, "D")


class TrackingRun:
    """Accumulates per-step rows and turns them into a SimRecord"""

    def __init__(self, tag: GroupTag, k: float, dt: float):
        self.tag = tag
        self.k = k
        self.dt = dt
        self.times: List[float] = []
        self.states: List[GroupElement] = []
        self.controls: List[AlgebraElement] = []
        self.xi: List[np.ndarray] = []
        self.metrics = {name: [] for name in METRIC_COLUMNS}

    def add(self, n: int, g_ST: GroupElement, u: AlgebraElement, err):
        self.times.append(n * self.dt)
        self.states.append(g_ST)
        self.controls.append(u)
        self.xi.append(err.xi_TD.matrix)
        self.metrics["err_frobenius"].append(err.frobenius)
        self.metrics["err_log_norm"].append(err.log_norm)
        self.metrics["err_spectral"].append(err.spectral_radius)

    def record(self, extra=None, diagnostics=None) -> SimRecord:
        return SimRecord(
            tag=self.tag,
            k=self.k,
            dt=self.dt,
            times=np.asarray(self.times),
            states=self.states,
            controls=self.controls,
            xi=self.xi,
            err_frobenius=np.asarray(self.metrics["err_frobenius"]),
            err_log_norm=np.asarray(self.metrics["err_log_norm"]),
            err_spectral=np.asarray(self.metrics["err_spectral"]),
            extra={name: np.asarray(values) for name, values in (extra or {}).items()},
            diagnostics=diagnostics or {},
        )


def run_tracking(s: Scenario) -> SimRecord:
    """Closed-loop run of the left-invariant plant; one row per step, N = floor(duration/dt)"""
    settings = get_settings()
    n_steps = s.n_steps
    n_rows = n_steps + 1
    dt = s.dt

    logger.info("Tracking run on %s: k=%g dt=%g steps=%d", s.tag, s.cfg.k, dt, n_steps)

    poses = reference_poses(s.reference, n_rows, dt)

    controller = TrackingController(s.cfg)
    run = TrackingRun(s.tag, s.cfg.k, dt)
    g = s.initial_state
    velocity = None
    reprojections = 0

    for n in range(n_rows):
        try:
            velocity = reference_velocity(s.reference, poses, n, dt, velocity)
            u, err = controller.command(g, poses[n], velocity, step=n)
            run.add(n, g, u, err)
            if n == n_steps:
                break
            g = step_left_invariant(g, u, dt)
            if settings.reproject_every and (n + 1) % settings.reproject_every == 0:
                g = project_to_group(g)
                reprojections += 1
        except LieTrackError as exc:
            exc.step = n
            logger.error("Tracking run aborted at step %d: %s", n, exc)
            raise

    diagnostics = controller.diagnostics()
    diagnostics["reprojections"] = reprojections
    record = run.record(diagnostics=diagnostics)
    logger.info(
        "Tracking run finished: log-error %.3e -> %.3e",
        record.err_log_norm[0], record.err_log_norm[-1],
    )
    return record


def _series(record: Union[SimRecord, pd.DataFrame], metric: str) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(record, pd.DataFrame):
        if metric not in record.columns:
            raise InvalidInputError(f"Metrics table has no column {metric}")
        return record["t"].to_numpy(dtype=float), record[metric].to_numpy(dtype=float)
    return np.asarray(record.times, dtype=float), np.asarray(record.metric(metric), dtype=float)


def fit_decay_rate(
    record: Union[SimRecord, pd.DataFrame],
    window: Tuple[float, float],
    metric: str = "err_log_norm",
) -> Tuple[float, float]:
    """Least-squares slope of ln(metric) against time over `window`, with its r^2"""
    t, values = _series(record, metric)
    t0, t1 = window
    mask = (t >= t0 - 1e-9) & (t <= t1 + 1e-9)
    t, values = t[mask], values[mask]

    if t.size < 3:
        raise InsufficientSignalError(f"Only {t.size} samples in window [{t0}, {t1}]")
    if np.any(values <= SIGNAL_FLOOR):
        raise InsufficientSignalError(f"{metric} reaches the numerical floor inside [{t0}, {t1}]")

    fit = linregress(t, np.log(values))
    return float(fit.slope), float(fit.rvalue ** 2)


def decay_ratio_deviation(record: SimRecord, metric: str = "err_log_norm") -> np.ndarray:
    """|x(n+1)/x(n) - (1 - k dt)| for every consecutive pair of rows"""
    values = np.asarray(record.metric(metric), dtype=float)
    if values.size < 2 or np.any(values[:-1] <= SIGNAL_FLOOR):
        raise InsufficientSignalError("Decay ratios need a non-vanishing error on every row but the last")
    return np.abs(values[1:] / values[:-1] - (1.0 - record.k * record.dt))


def direction_deviation(record: SimRecord) -> np.ndarray:
    """Frobenius distance of the normalized state error from its initial direction"""
    xi0 = record.xi[0]
    norm0 = np.linalg.norm(xi0)
    if norm0 <= SIGNAL_FLOOR:
        raise InsufficientSignalError("Initial state error is zero; direction is undefined")
    unit0 = xi0 / norm0
    return np.array([np.linalg.norm(x / np.linalg.norm(x) - unit0) for x in record.xi])


def settling_time(record: SimRecord, level: float = float(np.exp(-1.0)), metric: str = "err_log_norm") -> Optional[float]:
    """First time the metric falls to `level` times its initial value; None if it never does"""
    values = np.asarray(record.metric(metric), dtype=float)
    below = np.nonzero(values <= level * values[0])[0]
    if below.size == 0:
        return None
    return float(record.times[below[0]])
