"""Run configuration: JSON schema, named presets, and eager validation."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import Curve2D, GeometryError, make_curve, make_scene
from .probes import ProbeError, build_basis
from .reconstruction import SweepConfig


class ConfigError(ValueError):
    """Configuration rejected; the message names the offending key."""


_DEFAULTS = {
    "scene": {
        "outer": {"kind": "circle", "params": {"radius": 1.0}},
        "cavity": {"kind": "circle", "params": {"radius": 0.5}},
        "cavity_nodes": 256,
    },
    "measurement": {
        "f": "cos1",
        "synthesis_nodes": 512,
        "noise": 0.0,
        "seed": 0,
    },
    "basis": {
        "max_poly_degree": 12,
        "n_sources": 16,
        "r_ext_factor": 1.5,
        "dipoles": True,
    },
    "sweep": {
        "grid": [16, 16],
        "radii": [0.3, 0.4, 0.5],
        "truncation": None,  # auto: noise**2 for noisy data, else 1e-12
        "inversion_nodes": 256,
        "clearance": None,
    },
}

# named scene/measurement presets; each is a partial config merged over defaults
PRESETS = {
    "concentric": {
        "scene": {"cavity": {"kind": "circle", "params": {"radius": 0.5}}},
    },
    "concentric-small": {
        "scene": {"cavity": {"kind": "circle", "params": {"radius": 0.25}}},
    },
    "offset-disk": {
        "scene": {
            "cavity": {
                "kind": "circle",
                "params": {"radius": 0.35, "center": [0.25, 0.15]},
            }
        },
    },
    "kite-offset": {
        "scene": {
            "cavity": {
                "kind": "kite",
                "params": {"scale": 0.35, "center": [0.05, 0.03]},
            }
        },
    },
}

# named boundary-data presets: Fourier coefficients in the boundary parameter
F_PRESETS = {
    "cos1": {"cos": [0.0, 1.0]},
    "sin1": {"sin": [0.0, 1.0]},
    "cos2": {"cos": [0.0, 0.0, 1.0]},
    "cos1sin1": {"cos": [0.0, 1.0], "sin": [0.0, 1.0]},
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def fourier_samples(spec, t):
    """Evaluate a Fourier coefficient spec (or named preset) at parameter nodes t."""
    if isinstance(spec, str):
        if spec not in F_PRESETS:
            raise ConfigError(
                f"measurement.f: unknown preset {spec!r}; "
                f"known: {sorted(F_PRESETS)}"
            )
        spec = F_PRESETS[spec]
    if not isinstance(spec, dict) or not ("cos" in spec or "sin" in spec):
        raise ConfigError("measurement.f must be a preset name or {'cos': [...], 'sin': [...]}")
    f = np.zeros_like(t)
    for m, a in enumerate(spec.get("cos", [])):
        f += float(a) * np.cos(m * t)
    for m, a in enumerate(spec.get("sin", [])):
        f += float(a) * np.sin(m * t)
    return f


@dataclass
class RunConfig:
    """Validated pipeline configuration; curves are built eagerly."""

    raw: dict
    scene_synthesis: object = field(repr=False)  # SceneGeometry at synthesis nodes
    outer_inversion: Curve2D = field(repr=False)
    f_synthesis: np.ndarray = field(repr=False)
    noise: float = 0.0
    seed: int = 0
    basis_config: dict = field(default_factory=dict)
    sweep_config: SweepConfig = None
    inversion_nodes: int = 256

    def build_basis(self):
        return build_basis(self.outer_inversion, **self.basis_config)


def _require(block, key, types, where):
    if key not in block:
        raise ConfigError(f"{where}.{key}: missing required key")
    val = block[key]
    if not isinstance(val, types):
        raise ConfigError(f"{where}.{key}: expected {types}, got {type(val).__name__}")
    return val


def load_config(source):
    """Load and validate a run configuration.

    source may be a path to a JSON file or an already-parsed dict.  A top-level
    "preset" key merges the named preset over the defaults before any explicit
    overrides from the same document.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "read"):
        if hasattr(source, "read"):
            doc = json.load(source)
        else:
            with open(source) as fh:
                doc = json.load(fh)
    else:
        doc = copy.deepcopy(source)
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    cfg = copy.deepcopy(_DEFAULTS)
    preset = doc.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"preset: unknown preset {preset!r}; known: {sorted(PRESETS)}")
        cfg = _merge(cfg, PRESETS[preset])
    cfg = _merge(cfg, doc)

    scene_blk = cfg["scene"]
    meas = cfg["measurement"]
    sweep_blk = cfg["sweep"]

    n_syn = int(_require(meas, "synthesis_nodes", (int,), "measurement"))
    n_inv = int(_require(sweep_blk, "inversion_nodes", (int,), "sweep"))
    n_cav = int(scene_blk.get("cavity_nodes", max(n_syn // 2, 128)))
    noise = float(meas.get("noise", 0.0))
    if noise < 0:
        raise ConfigError("measurement.noise: must be nonnegative")
    seed = int(meas.get("seed", 0))

    try:
        outer_syn = make_curve(scene_blk["outer"]["kind"], scene_blk["outer"]["params"], n_syn)
        outer_inv = make_curve(scene_blk["outer"]["kind"], scene_blk["outer"]["params"], n_inv)
    except (KeyError, GeometryError) as exc:
        raise ConfigError(f"scene.outer: {exc}") from exc
    try:
        cavity = make_curve(scene_blk["cavity"]["kind"], scene_blk["cavity"]["params"], n_cav)
    except (KeyError, GeometryError) as exc:
        raise ConfigError(f"scene.cavity: {exc}") from exc
    try:
        scene = make_scene(outer_syn, cavity)
    except GeometryError as exc:
        raise ConfigError(f"scene: {exc}") from exc

    f_syn = fourier_samples(meas.get("f", "cos1"), outer_syn.t)
    if np.std(f_syn) <= 1e-10 * (abs(np.mean(f_syn)) + 1):
        raise ConfigError(
            "measurement.f: boundary data must be a non-constant function"
        )

    basis_cfg = {
        "max_poly_degree": int(cfg["basis"].get("max_poly_degree", 12)),
        "n_sources": int(cfg["basis"].get("n_sources", 16)),
        "r_ext_factor": float(cfg["basis"].get("r_ext_factor", 1.5)),
        "dipoles": bool(cfg["basis"].get("dipoles", True)),
    }
    try:
        build_basis(outer_inv, **basis_cfg)
    except ProbeError as exc:
        raise ConfigError(f"basis: {exc}") from exc

    grid = sweep_blk.get("grid", [16, 16])
    if not (isinstance(grid, (list, tuple)) and len(grid) == 2):
        raise ConfigError("sweep.grid: expected [nx, ny]")
    truncation = sweep_blk.get("truncation")
    if truncation is None:
        truncation = noise**2 if noise > 0 else 1e-12
    try:
        sweep_cfg = SweepConfig(
            nx=int(grid[0]), ny=int(grid[1]),
            radii=tuple(float(r) for r in sweep_blk.get("radii", [0.3, 0.4, 0.5])),
            basis=basis_cfg,
            truncation=float(truncation),
            clearance=sweep_blk.get("clearance"),
        ).validate()
    except ValueError as exc:
        raise ConfigError(f"sweep: {exc}") from exc

    return RunConfig(
        raw=cfg, scene_synthesis=scene, outer_inversion=outer_inv,
        f_synthesis=f_syn, noise=noise, seed=seed, basis_config=basis_cfg,
        sweep_config=sweep_cfg, inversion_nodes=n_inv,
    )
