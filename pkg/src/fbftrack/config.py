"""Experiment configuration: flat key-value files and validation.

The file format is line based: ``section.key = value`` with ``#`` comments,
bracketed comma lists for arrays, and bare strings for enums. Example::

    sim.ts = 0.001
    plant.den = [1.0, 242.6, 1.36e5]
    trajectory.kind = sine-scan
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .basis import BasisConfig
from .controller import ControllerSettings
from .hybrid import HybridConfig
from .lifted import ContinuousTransferFunction
from .plant import PlantConfig


class ConfigError(ValueError):
    """Raised with every problem found, one per line."""


def _parse_scalar(text: str):
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        if not inner:
            return []
        return [float(tok) for tok in inner.split(",")]
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    return text


def parse_config_text(text: str) -> dict:
    """Parse the flat file into a {dotted.key: value} dict."""
    values: dict = {}
    errors: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected key = value")
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        if not key or "." not in key:
            errors.append(f"line {lineno}: key must be section.name")
            continue
        if key in values:
            errors.append(f"line {lineno}: duplicate key {key}")
            continue
        values[key] = _parse_scalar(val)
    if errors:
        raise ConfigError("\n".join(errors))
    return values


@dataclass
class ExperimentConfig:
    """Everything one experiment needs, assembled from a flat key dict."""

    ts: float
    duration: float
    seed: int
    plant: PlantConfig
    basis: BasisConfig
    hybrid: HybridConfig
    controller: ControllerSettings
    trajectory_kind: str
    trajectory_params: dict
    output_prefix: str | None = None

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.ts))


_DEFAULTS = {
    "sim.seed": 0,
    "plant.cubic_stiffness_gain": 0.0,
    "plant.friction_coefficient": 0.0,
    "plant.resonance_detune": 1.0,
    "plant.amplitude_scale": 1.0,
    "plant.noise_sigma": 0.0,
    "plant.delay_batches": 1,
    "basis.window_len": None,
    "hybrid.q": 4,
    "hybrid.p": 50,
    "hybrid.regularization": 0.01,
    "controller.mode": "standard",
    "controller.warmup_batches": 78,
    "controller.mitigation": "freeze-learning",
    "controller.stability_threshold": 0.97,
    "controller.weight_scale": 1.0,
    "controller.weight_scale_ramp": 0.0,
    "output.prefix": None,
}

_REQUIRED = ("sim.ts", "sim.duration", "plant.num", "plant.den",
             "basis.degree", "basis.knot_spacing", "basis.batch_len",
             "trajectory.kind")


def build_experiment_config(values: dict) -> ExperimentConfig:
    """Assemble and validate; raises ConfigError listing every problem."""
    errors: list[str] = []
    merged = dict(_DEFAULTS)
    merged.update(values)
    for key in _REQUIRED:
        if key not in merged:
            errors.append(f"missing required key {key}")
    known_prefixes = ("sim.", "plant.", "basis.", "hybrid.", "controller.",
                      "trajectory.", "output.")
    for key in values:
        if not key.startswith(known_prefixes):
            errors.append(f"unknown section in key {key}")
    if errors:
        raise ConfigError("\n".join(errors))

    def grab(key, cast=None):
        val = merged.get(key)
        if cast is not None and val is not None:
            try:
                return cast(val)
            except (TypeError, ValueError) as exc:
                errors.append(f"{key}: {exc}")
                return None
        return val

    ts = grab("sim.ts", float)
    duration = grab("sim.duration", float)
    seed = grab("sim.seed", int)

    nominal = None
    try:
        nominal = ContinuousTransferFunction(merged["plant.num"],
                                             merged["plant.den"])
    except (ValueError, TypeError) as exc:
        errors.append(f"plant transfer function: {exc}")
    plant_cfg = None
    if nominal is not None and ts is not None:
        try:
            plant_cfg = PlantConfig(
                nominal=nominal, ts=ts,
                cubic_stiffness_gain=float(merged["plant.cubic_stiffness_gain"]),
                friction_coefficient=float(merged["plant.friction_coefficient"]),
                resonance_detune=float(merged["plant.resonance_detune"]),
                amplitude_scale=float(merged["plant.amplitude_scale"]),
                noise_sigma=float(merged["plant.noise_sigma"]),
                delay_batches=int(merged["plant.delay_batches"]))
        except (ValueError, TypeError) as exc:
            errors.append(f"plant: {exc}")

    basis_cfg = None
    try:
        batch_len = int(merged["basis.batch_len"])
        window_len = merged["basis.window_len"]
        window_len = 2 * batch_len if window_len is None else int(window_len)
        basis_cfg = BasisConfig(degree=int(merged["basis.degree"]),
                                knot_spacing=int(merged["basis.knot_spacing"]),
                                batch_len=batch_len, window_len=window_len)
    except (ValueError, TypeError, KeyError) as exc:
        errors.append(f"basis: {exc}")

    hybrid_cfg = None
    if basis_cfg is not None:
        try:
            hybrid_cfg = HybridConfig(
                q=int(merged["hybrid.q"]), p=int(merged["hybrid.p"]),
                regularization=float(merged["hybrid.regularization"]),
                batch_len=basis_cfg.batch_len)
        except (ValueError, TypeError) as exc:
            errors.append(f"hybrid: {exc}")

    settings = None
    try:
        settings = ControllerSettings(
            mode=str(merged["controller.mode"]),
            warmup_batches=int(merged["controller.warmup_batches"]),
            mitigation=str(merged["controller.mitigation"]),
            stability_threshold=float(merged["controller.stability_threshold"]),
            weight_scale=float(merged["controller.weight_scale"]),
            weight_scale_ramp=float(merged["controller.weight_scale_ramp"]))
    except (ValueError, TypeError) as exc:
        errors.append(f"controller: {exc}")

    kind = str(merged["trajectory.kind"])
    traj_params = {key.split(".", 1)[1]: val for key, val in merged.items()
                   if key.startswith("trajectory.") and key != "trajectory.kind"}
    if "file" in traj_params:
        traj_params["path"] = str(traj_params.pop("file"))

    # cross-field checks
    if ts is not None and duration is not None and basis_cfg is not None:
        steps = int(round(duration / ts))
        if steps <= 0:
            errors.append("sim.duration must cover at least one batch")
        elif steps % basis_cfg.batch_len != 0:
            errors.append(
                f"sim.duration must cover a whole number of batches "
                f"({steps} steps vs batch length {basis_cfg.batch_len})")
        elif settings is not None and settings.mode != "none":
            need = (settings.warmup_batches + 10) * basis_cfg.batch_len
            if steps < need:
                errors.append(
                    f"sim.duration covers {steps} steps but warm-up plus ten "
                    f"windows needs {need}")
    if settings is not None and plant_cfg is not None and settings.learned:
        if plant_cfg.delay_batches != 1:
            errors.append(
                "learned modes assume a one-batch acquisition delay "
                f"(plant.delay_batches = {plant_cfg.delay_batches})")
    if errors:
        raise ConfigError("\n".join(errors))

    prefix = merged["output.prefix"]
    return ExperimentConfig(
        ts=ts, duration=duration, seed=seed, plant=plant_cfg,
        basis=basis_cfg, hybrid=hybrid_cfg, controller=settings,
        trajectory_kind=kind, trajectory_params=traj_params,
        output_prefix=None if prefix is None else str(prefix))


def load_config(path: str | Path) -> ExperimentConfig:
    text = Path(path).read_text()
    return build_experiment_config(parse_config_text(text))
