"""Experiment configuration: YAML loading, validation, and object building.

A configuration has five sections (domain, coefficient, driver, scheme,
experiment), each a plain mapping merged over package defaults.  Unknown
keys anywhere are configuration errors, as are inconsistent dimensions.
Validation collects every problem before raising, so a bad file reports
all its mistakes at once.

The canonical form of a configuration is its sorted-key compact JSON; its
sha-256 digest is embedded in artifacts so that outputs are traceable to
the exact configuration that produced them.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np
import yaml

from .analysis import StudyPlan
from .driver import Partition, sample_jump_driver
from .errors import ConfigError, ReflectedSDEError
from .flow import FlowConfig, coefficient_from_spec
from .geometry import OUTSIDE, Domain
from .schemes import SCHEME_KINDS, SchemeSpec

_DOMAIN_DEFAULT = {"kind": "half-space", "normal": [1.0], "offset": 0.0}
_COEFFICIENT_DEFAULT = {"kind": "constant-matrix", "matrix": [[1.0]]}
_DRIVER_DEFAULT = {
    "horizon": 1.0,
    "steps": 256,
    "dimension": 1,
    "jump_rate": 0.0,
    "jump_law": {"kind": "uniform-ball", "radius": 1.0},
    "diffusion_scale": 1.0,
}
_SCHEME_DEFAULT = {
    "kind": "wz-hat",
    "mesh": None,
    "cells": 64,
    "substeps": 32,
    "adaptive": True,
    "substeps_bar": 64,
    "observations": 0,
}
_EXPERIMENT_DEFAULT = {
    "x0": [0.0],
    "seed": 12345,
    "n_paths": 64,
    "meshes": [0.25, 0.125, 0.0625, 0.03125],
    "reference_refine": 256,
    "reference_substeps": 256,
    "label": "default",
}

_SECTIONS = ("domain", "coefficient", "driver", "scheme", "experiment")
_JUMP_LAW_KINDS = ("uniform-ball", "fixed-vector")


def _merge_section(defaults: dict, override, section: str, problems: list) -> dict:
    """Merge an override mapping over section defaults, rejecting unknown keys."""
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in defaults.items()}
    if override is None:
        return out
    if not isinstance(override, dict):
        problems.append(f"section {section!r} must be a mapping")
        return out
    for key, value in override.items():
        if key not in defaults:
            problems.append(f"unknown key {key!r} in section {section!r}")
            continue
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            merged = dict(out[key])
            merged.update(value)
            out[key] = merged
        else:
            out[key] = value
    return out


def _replace_section(default: dict, override, section: str, problems: list) -> dict:
    """Domain and coefficient specs replace the default wholesale."""
    if override is None:
        return dict(default)
    if not isinstance(override, dict):
        problems.append(f"section {section!r} must be a mapping")
        return dict(default)
    return dict(override)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated five-section configuration with object builders."""

    domain: dict
    coefficient: dict
    driver: dict
    scheme: dict
    experiment: dict

    def as_dict(self) -> dict:
        return {
            "domain": self.domain,
            "coefficient": self.coefficient,
            "driver": self.driver,
            "scheme": self.scheme,
            "experiment": self.experiment,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True,
                          separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    # ---------------------------------------------------------------- checks

    def validate(self) -> list:
        """Collect every configuration problem; empty list means valid."""
        problems = []
        domain = coefficient = None
        try:
            domain = Domain.from_spec(self.domain)
        except (ReflectedSDEError, ValueError, KeyError, TypeError) as exc:
            problems.append(f"domain: {exc}")
        try:
            coefficient = coefficient_from_spec(self.coefficient)
        except (ReflectedSDEError, ValueError, KeyError, TypeError) as exc:
            problems.append(f"coefficient: {exc}")

        drv = self.driver
        if not float(drv.get("horizon", 0.0)) > 0.0:
            problems.append("driver.horizon must be positive")
        if int(drv.get("steps", 0)) < 1:
            problems.append("driver.steps must be >= 1")
        if int(drv.get("dimension", 0)) < 1:
            problems.append("driver.dimension must be >= 1")
        if float(drv.get("jump_rate", 0.0)) < 0.0:
            problems.append("driver.jump_rate must be >= 0")
        if float(drv.get("diffusion_scale", 1.0)) < 0.0:
            problems.append("driver.diffusion_scale must be >= 0")
        law = drv.get("jump_law") or {}
        if law.get("kind") not in _JUMP_LAW_KINDS:
            problems.append(
                "driver.jump_law.kind must be one of %s" % (_JUMP_LAW_KINDS,)
            )
        elif law["kind"] == "fixed-vector":
            vec = np.atleast_1d(np.asarray(law.get("vector", []), dtype=float))
            if vec.shape != (int(drv.get("dimension", 0)),):
                problems.append(
                    "driver.jump_law.vector must match driver.dimension"
                )
        elif float(law.get("radius", 1.0)) <= 0.0:
            problems.append("driver.jump_law.radius must be positive")

        sch = self.scheme
        if sch.get("kind") not in SCHEME_KINDS:
            problems.append(
                "scheme.kind must be one of %s" % (SCHEME_KINDS,)
            )
        mesh, cells = sch.get("mesh"), sch.get("cells")
        if mesh is not None and float(mesh) <= 0.0:
            problems.append("scheme.mesh must be positive")
        if mesh is None and (cells is None or int(cells) < 1):
            problems.append("scheme needs a positive mesh or cells >= 1")
        if int(sch.get("substeps", 0)) < 1:
            problems.append("scheme.substeps must be >= 1")
        if int(sch.get("substeps_bar", 0)) < 1:
            problems.append("scheme.substeps_bar must be >= 1")
        if int(sch.get("observations", 0)) < 0:
            problems.append("scheme.observations must be >= 0")

        exp = self.experiment
        x0 = np.atleast_1d(np.asarray(exp.get("x0", []), dtype=float))
        if domain is not None and x0.shape != (domain.dimension,):
            problems.append("experiment.x0 must match the domain dimension")
        elif domain is not None and domain.contains(x0) == OUTSIDE:
            problems.append("experiment.x0 lies outside the closed domain")
        if int(exp.get("n_paths", 0)) < 1:
            problems.append("experiment.n_paths must be >= 1")
        if int(exp.get("reference_refine", 0)) < 1:
            problems.append("experiment.reference_refine must be >= 1")
        if int(exp.get("reference_substeps", 0)) < 1:
            problems.append("experiment.reference_substeps must be >= 1")
        meshes = exp.get("meshes")
        if meshes is not None:
            arr = np.atleast_1d(np.asarray(meshes, dtype=float))
            if arr.size == 0 or np.any(arr <= 0.0):
                problems.append("experiment.meshes must be positive numbers")

        if domain is not None and coefficient is not None:
            if domain.dimension != coefficient.dimension:
                problems.append(
                    "domain dimension %d and coefficient dimension %d differ"
                    % (domain.dimension, coefficient.dimension)
                )
            if int(drv.get("dimension", 0)) != coefficient.dimension:
                problems.append(
                    "driver.dimension must equal the coefficient dimension"
                )
        return problems

    def ensure_valid(self) -> "ExperimentConfig":
        problems = self.validate()
        if problems:
            raise ConfigError(problems)
        return self

    # --------------------------------------------------------------- objects

    def build_domain(self) -> Domain:
        return Domain.from_spec(self.domain)

    def build_coefficient(self):
        return coefficient_from_spec(self.coefficient)

    def build_flow(self) -> FlowConfig:
        return FlowConfig(int(self.scheme["substeps"]),
                          bool(self.scheme["adaptive"]))

    def reference_flow(self) -> FlowConfig:
        return FlowConfig(int(self.experiment["reference_substeps"]), True)

    def build_partition(self) -> Partition:
        horizon = float(self.driver["horizon"])
        mesh = self.scheme.get("mesh")
        if mesh is not None:
            cells = max(1, round(horizon / float(mesh)))
        else:
            cells = int(self.scheme["cells"])
        return Partition.uniform(horizon, cells)

    def observation_times(self):
        count = int(self.scheme.get("observations", 0))
        if count <= 0:
            return None
        return np.linspace(0.0, float(self.driver["horizon"]), count + 1)

    def build_scheme_spec(self) -> SchemeSpec:
        return SchemeSpec(
            kind=self.scheme["kind"],
            partition=self.build_partition(),
            flow_cfg=self.build_flow(),
            substeps_bar=int(self.scheme["substeps_bar"]),
            observation_times=self.observation_times(),
        )

    def sample_driver(self, seed: int):
        drv = self.driver
        return sample_jump_driver(
            float(drv["horizon"]), int(drv["steps"]), int(drv["dimension"]),
            int(seed), jump_rate=float(drv["jump_rate"]),
            jump_law=drv.get("jump_law"),
            diffusion_scale=float(drv["diffusion_scale"]),
        )

    def x0(self) -> tuple:
        return tuple(float(v)
                     for v in np.atleast_1d(self.experiment["x0"]))

    def seed(self) -> int:
        return int(self.experiment["seed"])

    def study_plan(self) -> StudyPlan:
        exp = self.experiment
        drv = self.driver
        meshes = exp.get("meshes")
        if meshes is None:
            meshes = [self.build_partition().mesh]
        return StudyPlan(
            domain=dict(self.domain),
            coefficient=dict(self.coefficient),
            x0=self.x0(),
            scheme=self.scheme["kind"],
            meshes=tuple(float(m) for m in np.atleast_1d(meshes)),
            horizon=float(drv["horizon"]),
            driver_steps=int(drv["steps"]),
            driver_dimension=int(drv["dimension"]),
            jump_rate=float(drv["jump_rate"]),
            jump_law=dict(drv["jump_law"]) if drv.get("jump_law") else None,
            diffusion_scale=float(drv["diffusion_scale"]),
            n_paths=int(exp["n_paths"]),
            seed=self.seed(),
            reference_refine=int(exp["reference_refine"]),
            flow_substeps=int(self.scheme["substeps"]),
            flow_adaptive=bool(self.scheme["adaptive"]),
            reference_substeps=int(exp["reference_substeps"]),
            substeps_bar=int(self.scheme["substeps_bar"]),
        )


def config_from_mapping(mapping) -> ExperimentConfig:
    """Merge a parsed mapping over the defaults; raise ConfigError if bad."""
    problems = []
    mapping = mapping or {}
    if not isinstance(mapping, dict):
        raise ConfigError(["configuration root must be a mapping"])
    unknown = set(mapping) - set(_SECTIONS)
    for key in sorted(unknown):
        problems.append(f"unknown section {key!r}")
    cfg = ExperimentConfig(
        domain=_replace_section(_DOMAIN_DEFAULT, mapping.get("domain"),
                                "domain", problems),
        coefficient=_replace_section(_COEFFICIENT_DEFAULT,
                                     mapping.get("coefficient"),
                                     "coefficient", problems),
        driver=_merge_section(_DRIVER_DEFAULT, mapping.get("driver"),
                              "driver", problems),
        scheme=_merge_section(_SCHEME_DEFAULT, mapping.get("scheme"),
                              "scheme", problems),
        experiment=_merge_section(_EXPERIMENT_DEFAULT,
                                  mapping.get("experiment"),
                                  "experiment", problems),
    )
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path) -> ExperimentConfig:
    """Parse a YAML file into an ExperimentConfig (not yet validated)."""
    try:
        with open(path, "r") as fh:
            mapping = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read configuration file: {exc}"])
    except yaml.YAMLError as exc:
        raise ConfigError([f"cannot parse YAML: {exc}"])
    return config_from_mapping(mapping)


def default_config() -> ExperimentConfig:
    """Reflected unit Brownian motion on the half line, cell-flow scheme."""
    return config_from_mapping({})
