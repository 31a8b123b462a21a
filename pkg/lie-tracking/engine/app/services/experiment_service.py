import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..config import get_settings
from ..lie.core import algebra_dimension, compose, inverse
from ..models.errors import ConfigError, InvalidInputError, LieTrackError
from ..models.records import ControllerConfig, Scenario, SimRecord
from ..models.schemas import HelixSpec, ReferenceSpec, RunConfig, Tolerances
from ..models.tags import SE3, GroupFamily, GroupTag
from ..utils.trajectory_generator import TrajectoryGenerator, make_helix_samples, make_reference
from .manipulator_service import (
    SYNTHETIC_CHAIN_PATH,
    chain_from_document,
    forward_kinematics,
    read_chain_document,
    run_arm_tracking,
)
from .simulation_service import fit_decay_rate, run_tracking

logger = logging.getLogger(__name__)

HELIX_BODY_VELOCITY = [0.5, 0.5, 0.3, 0.5, 0.3, 0.7]
STEADY_STATE_WINDOW = 2.0


@dataclass(frozen=True)
class ExperimentDefinition:
    name: str
    section: str
    description: str
    defaults: Dict = field(default_factory=dict)


EXPERIMENTS: Dict[str, ExperimentDefinition] = {
    "se3_helix": ExperimentDefinition(
        name="se3_helix",
        section="§V.A",
        description="SE(3) helical reference with constant body velocity, started far from it",
        defaults={
            "group": GroupTag(GroupFamily.SE, 3),
            "reference": ReferenceSpec(kind="constant_twist", coordinates=HELIX_BODY_VELOCITY),
            "k": 1.0, "dt": 0.01, "duration": 10.0, "min_spectral_radius": 1.0,
            "fit_window": (0.0, 5.0), "fit_metric": "err_log_norm",
            "tolerances": Tolerances(decay_rate_rel=0.05, r_squared_min=0.999),
        },
    ),
    "su4_constant": ExperimentDefinition(
        name="su4_constant",
        section="§V.B",
        description="SU(4) reference with a random constant body velocity",
        defaults={
            "group": GroupTag(GroupFamily.SU, 4),
            "reference": ReferenceSpec(kind="constant_twist"),
            "k": 1.0, "dt": 0.01, "duration": 10.0, "min_spectral_radius": 1.0,
            "fit_window": (0.0, 5.0), "fit_metric": "err_log_norm",
            "tolerances": Tolerances(decay_rate_rel=0.05, r_squared_min=0.999),
        },
    ),
    "gl4_random_walk": ExperimentDefinition(
        name="gl4_random_walk",
        section="§V.C",
        description="GL0(4,R) reference driven by a fresh random body velocity every step",
        defaults={
            "group": GroupTag(GroupFamily.GL0, 4),
            "reference": ReferenceSpec(kind="random_walk", v_max=1.0),
            "k": 1.0, "dt": 0.01, "duration": 10.0, "min_spectral_radius": 1.0,
            "fit_window": (0.0, 5.0), "fit_metric": "err_log_norm",
            "tolerances": Tolerances(decay_rate_rel=0.05, r_squared_min=0.99),
        },
    ),
    "arm_helix": ExperimentDefinition(
        name="arm_helix",
        section="§V.D",
        description="Synthetic 7-DOF arm following a fixed-orientation helix through joint-rate commands",
        defaults={
            "group": SE3,
            "k": 1.0, "dt": 0.01, "duration": 10.0,
            "fit_window": (1.0, 5.0), "fit_metric": "err_frobenius",
            "tolerances": Tolerances(decay_rate_rel=0.10, r_squared_min=0.99, steady_state_max=1e-3),
            "helix": HelixSpec(),
        },
    ),
}


def list_experiments() -> str:
    lines = []
    for definition in EXPERIMENTS.values():
        d = definition.defaults
        lines.append(f"{definition.name} ({definition.section}): {definition.description}")
        lines.append(
            f"    group={d['group']} k={d['k']:g} dt={d['dt']:g} duration={d['duration']:g} "
            f"fit_window={list(d['fit_window'])} metric={d['fit_metric']} "
            f"rate_tol={d['tolerances'].decay_rate_rel:.0%}"
        )
    return "\n".join(lines)


@dataclass
class ResolvedRun:
    experiment: str
    tag: GroupTag
    k: float
    dt: float
    duration: float
    seed: int
    min_spectral_radius: float
    reference: Optional[ReferenceSpec]
    fit_window: Tuple[float, float]
    fit_metric: str
    tolerances: Tolerances
    include_state: bool
    chain: Optional[Dict] = None
    damping: float = 0.0
    sigma_min: Optional[float] = None
    helix: Optional[HelixSpec] = None
    theta_offset: Optional[List[float]] = None

    @property
    def cfg(self) -> ControllerConfig:
        return ControllerConfig(k=self.k, dt=self.dt)


def resolve_config(config: RunConfig) -> ResolvedRun:
    """Fill unset fields from the experiment defaults and check cross-field constraints"""
    settings = get_settings()
    defaults = EXPERIMENTS[config.experiment].defaults if config.experiment in EXPERIMENTS else {}

    tag = config.group.to_tag() if config.group is not None else defaults["group"]
    k = config.k if config.k is not None else defaults.get("k", 1.0)
    dt = config.dt if config.dt is not None else defaults.get("dt", settings.default_dt)
    duration = config.duration if config.duration is not None else defaults.get("duration", 10.0 / k)
    fit_window = config.fit_window or defaults.get("fit_window") or (0.0, min(5.0 / k, duration / 2))

    # Raises a pydantic ValidationError when k*dt >= 2
    ControllerConfig(k=k, dt=dt)
    if fit_window[0] >= duration:
        raise ConfigError(f"fit_window starts at {fit_window[0]} but the run lasts {duration}")

    resolved = ResolvedRun(
        experiment=config.experiment,
        tag=tag,
        k=k,
        dt=dt,
        duration=duration,
        seed=config.seed,
        min_spectral_radius=(
            config.min_spectral_radius if config.min_spectral_radius is not None
            else defaults.get("min_spectral_radius", 1.0)
        ),
        reference=config.reference or defaults.get("reference") or ReferenceSpec(),
        fit_window=tuple(fit_window),
        fit_metric=config.fit_metric or defaults.get("fit_metric", "err_log_norm"),
        tolerances=config.tolerances or defaults.get("tolerances") or Tolerances(),
        include_state=config.include_state,
        damping=config.damping,
        sigma_min=config.sigma_min,
        helix=config.helix or defaults.get("helix"),
        theta_offset=config.theta_offset,
    )

    if resolved.experiment == "arm_helix":
        if tag != SE3:
            raise ConfigError(f"arm_helix runs in SE(3), got {tag}")
        try:
            resolved.chain = read_chain_document(config.chain or SYNTHETIC_CHAIN_PATH)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"Cannot read chain fixture: {exc}")
        n_joints = len(resolved.chain.get("joints", []))
        offset = resolved.theta_offset or resolved.chain.get("start_offset") or [0.0] * n_joints
        if len(offset) != n_joints:
            raise ConfigError(f"theta_offset has {len(offset)} entries, chain has {n_joints} joints")
        resolved.theta_offset = list(offset)
    else:
        coords = resolved.reference.coordinates
        if coords is not None and len(coords) != algebra_dimension(tag):
            raise ConfigError(f"{tag} velocities have {algebra_dimension(tag)} coordinates, got {len(coords)}")
    return resolved


class ExperimentService:
    """Runs one resolved experiment and writes its artifacts"""

    def __init__(self, config: RunConfig, out_dir: Optional[Path] = None):
        self.config = config
        self.run_spec = resolve_config(config)
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.generator = TrajectoryGenerator(self.run_spec.seed)

    def build_scenario(self) -> Scenario:
        plan = self.run_spec
        ref = plan.reference
        params: Dict = {"tag": plan.tag}
        if ref.v_max is not None:
            params["v_max"] = ref.v_max
        if ref.kind == "constant_twist":
            if ref.coordinates is not None:
                params["coordinates"] = ref.coordinates
            else:
                params["velocity"] = self.generator.random_velocity(plan.tag, ref.v_max)
        reference = self.generator.reference(ref.kind, params)

        offset = self.generator.offset(plan.tag, plan.min_spectral_radius)
        # g_TD(0) equals the sampled offset
        initial = compose(reference.g0, inverse(offset.relabel(("T", "D"))))
        return Scenario(
            tag=plan.tag,
            reference=reference,
            initial_state=initial,
            cfg=plan.cfg,
            duration=plan.duration,
            dt=plan.dt,
            seed=plan.seed,
        )

    def simulate_arm(self) -> SimRecord:
        plan = self.run_spec
        chain = chain_from_document(plan.chain)
        ready = np.asarray(plan.chain.get("ready") or [0.0] * chain.n_joints, dtype=float)
        g_ready = forward_kinematics(chain, ready)

        helix = plan.helix
        n_rows = int(np.floor(plan.duration / plan.dt + 1e-9)) + 1
        center = g_ready.matrix[:3, 3] - np.array([helix.radius, 0.0, 0.0])
        samples = make_helix_samples(
            center, helix.radius, helix.angular_rate, helix.climb_rate,
            g_ready.matrix[:3, :3], n_rows + 1, plan.dt,
        )
        reference = make_reference("sampled", {"samples": samples})
        theta0 = ready + np.asarray(plan.theta_offset, dtype=float)
        return run_arm_tracking(
            chain, reference, plan.cfg, theta0, plan.duration, plan.dt,
            damping=plan.damping, sigma_min=plan.sigma_min,
        )

    def simulate(self) -> SimRecord:
        if self.run_spec.experiment == "arm_helix":
            return self.simulate_arm()
        return run_tracking(self.build_scenario())

    def evaluate(self, record: SimRecord) -> Dict:
        plan = self.run_spec
        tol = plan.tolerances
        rate, r_squared = fit_decay_rate(record.to_frame(), plan.fit_window, plan.fit_metric)

        checks = {
            "decay_rate": {
                "value": rate,
                "expected": -plan.k,
                "tolerance": tol.decay_rate_rel,
                "passed": abs(rate + plan.k) <= tol.decay_rate_rel * plan.k,
            },
            "r_squared": {"value": r_squared, "min": tol.r_squared_min, "passed": r_squared >= tol.r_squared_min},
        }
        if plan.experiment != "arm_helix" and plan.min_spectral_radius > 0:
            initial = float(record.err_spectral[0])
            checks["initial_spectral_radius"] = {
                "value": initial,
                "min": plan.min_spectral_radius,
                "passed": initial > plan.min_spectral_radius,
            }
        if tol.steady_state_max is not None:
            tail = record.times >= record.times[-1] - STEADY_STATE_WINDOW - 1e-9
            worst = float(np.max(record.metric(plan.fit_metric)[tail]))
            checks["steady_state"] = {
                "value": worst,
                "max": tol.steady_state_max,
                "passed": worst < tol.steady_state_max,
            }
        return {"decay_rate": rate, "r_squared": r_squared, "checks": checks}

    def _base_summary(self) -> Dict:
        plan = self.run_spec
        return {
            "experiment": plan.experiment,
            "group": str(plan.tag),
            "k": plan.k,
            "dt": plan.dt,
            "duration": plan.duration,
            "seed": plan.seed,
            "fit_window": list(plan.fit_window),
            "fit_metric": plan.fit_metric,
        }

    def run(self) -> Dict:
        handler = self._attach_log_file()
        summary = self._base_summary()
        try:
            logger.info("Running %s (%s, k=%g, dt=%g)", summary["experiment"], summary["group"], summary["k"], summary["dt"])
            try:
                record = self.simulate()
                evaluation = self.evaluate(record)
            except LieTrackError as exc:
                logger.error("%s aborted: %s", summary["experiment"], exc)
                summary.update({
                    "status": "aborted",
                    "passed": False,
                    "error": {"type": type(exc).__name__, "message": str(exc), "step": exc.step},
                })
                self._write(summary)
                return summary

            passed = all(check["passed"] for check in evaluation["checks"].values())
            summary.update(evaluation)
            summary.update({
                "status": "passed" if passed else "failed",
                "passed": passed,
                "final_err_frobenius": float(record.err_frobenius[-1]),
                "final_err_log_norm": float(record.err_log_norm[-1]),
                "final_err_spectral": float(record.err_spectral[-1]),
                "diagnostics": record.diagnostics,
            })
            for name, check in evaluation["checks"].items():
                if not check["passed"]:
                    logger.warning("Check %s failed: %s", name, check)
            logger.info("Fitted decay rate %.4f (r^2 = %.5f), status %s", summary["decay_rate"], summary["r_squared"], summary["status"])
            self._write(summary, record)
            return summary
        finally:
            if handler is not None:
                logging.getLogger().removeHandler(handler)
                handler.close()

    def _attach_log_file(self) -> Optional[logging.Handler]:
        if self.out_dir is None:
            return None
        self.out_dir.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(self.out_dir / "run.log", mode="w")
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        logging.getLogger().addHandler(handler)
        return handler

    def _write(self, summary: Dict, record: Optional[SimRecord] = None):
        if self.out_dir is None:
            return
        if record is not None:
            record.to_csv(self.out_dir / "metrics.csv", include_state=self.run_spec.include_state)
            record.to_json(self.out_dir / "record.json")
            summary["artifacts"] = ["metrics.csv", "record.json", "summary.json", "run.log"]
        with open(self.out_dir / "summary.json", "w") as f:
            json.dump(summary, f, indent=2)
        logger.info("Artifacts written to %s", self.out_dir)


# ---- sweeps --------------------------------------------------------------

def sweep_configs(config: RunConfig) -> List[Tuple[str, RunConfig]]:
    """One validated RunConfig per sweep entry, each with the entry's overrides applied"""
    base = config.model_dump(exclude={"sweep"})
    entries = []
    for entry in config.sweep or []:
        overrides = entry.model_dump(exclude={"label"}, exclude_none=True)
        sub = RunConfig.model_validate({**base, **overrides})
        resolve_config(sub)
        entries.append((entry.label, sub))
    return entries


def _run_entry(payload: Tuple[Dict, str]) -> Dict:
    data, out_dir = payload
    return ExperimentService(RunConfig.model_validate(data), Path(out_dir)).run()


def run_sweep(config: RunConfig, out_dir: Path, jobs: int = 1) -> Dict:
    if not config.sweep:
        raise InvalidInputError("Config has no sweep entries")
    out_dir = Path(out_dir)
    entries = sweep_configs(config)
    payloads = [(sub.model_dump(mode="json"), str(out_dir / label)) for label, sub in entries]

    logger.info("Sweep of %d runs with %d worker(s)", len(payloads), jobs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_run_entry, payloads))
    else:
        summaries = [_run_entry(p) for p in payloads]

    runs = []
    for (label, _), summary in zip(entries, summaries):
        runs.append({
            "label": label,
            "status": summary["status"],
            "passed": summary["passed"],
            "k": summary["k"],
            "dt": summary["dt"],
            "seed": summary["seed"],
            "decay_rate": summary.get("decay_rate"),
            "r_squared": summary.get("r_squared"),
        })
    result = {"experiment": config.experiment, "runs": runs, "passed": all(r["passed"] for r in runs)}
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sweep_summary.json", "w") as f:
        json.dump(result, f, indent=2)
    return result
