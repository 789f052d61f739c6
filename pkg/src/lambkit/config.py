"""Toolkit configuration: schema-validated JSON with packaged defaults.

A user config file may specify any subset of sections; missing keys fall
back to the packaged defaults (deep merge, then schema validation).  Unknown
keys are rejected so typos surface as ConfigError rather than silently
ignored settings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import jsonschema

from .dispersion import PlateMaterial, PlateSpec
from .errors import ConfigError

__all__ = [
    "ToolkitConfig",
    "MatchingConfig",
    "LayerMap",
    "ChipConfig",
    "WaferConfig",
    "ReticleConfig",
    "VariationConfig",
    "load_config",
    "default_config_dict",
    "load_catalog",
]

_NONNEG = {"type": "number", "minimum": 0}
_POS = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "material": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "name": {"type": "string"},
                "rho_kg_m3": _POS,
                "v_l_m_s": _POS,
                "v_t_m_s": _POS,
            },
        },
        "plate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"thickness_m": _POS},
        },
        "capacitance": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"eps_r": {"type": "number", "exclusiveMinimum": 1}},
        },
        "matching": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "target_impedance_ohm": _POS,
                "max_fingers": {"type": "integer", "minimum": 2},
                "dummy_count_per_side": {"type": "integer", "minimum": 0},
            },
        },
        "layers": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                k: {"type": "integer", "minimum": 0, "maximum": 255}
                for k in ("small_idt", "large_idt", "pads", "bottom_electrode", "outline")
            },
        },
        "chip": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "width_m": _POS,
                "height_m": _POS,
                "margin_m": _NONNEG,
                "spacing_m": _NONNEG,
            },
        },
        "wafer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "diameter_m": _POS,
                "edge_exclusion_m": _NONNEG,
                "keepout_m": {
                    "type": "array",
                    "items": {"type": "number"},
                    "minItems": 4,
                    "maxItems": 4,
                },
                "grid_anchor_m": {
                    "type": "array",
                    "items": {"type": "number"},
                    "minItems": 2,
                    "maxItems": 2,
                },
            },
        },
        "reticle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "image_field_m": {
                    "type": "array",
                    "items": _POS,
                    "minItems": 2,
                    "maxItems": 2,
                },
                "demag": {"type": "integer", "minimum": 1},
            },
        },
        "variation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "thickness_center_m": _POS,
                "thickness_edge_drop_m": {"type": "number"},
                "thickness_noise_sigma_m": _NONNEG,
                "pitch_sigma_m": _NONNEG,
                "full_resolve": {"type": "boolean"},
                "mode_quality": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        m: {
                            "type": "object",
                            "additionalProperties": False,
                            "properties": {
                                "q_r": _POS,
                                "k_eff_sq": {
                                    "type": "number",
                                    "exclusiveMinimum": 0,
                                    "exclusiveMaximum": 1,
                                },
                            },
                        }
                        for m in ("A0", "S0", "A1", "S1")
                    },
                },
            },
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}


@dataclass(frozen=True)
class MatchingConfig:
    target_impedance_ohm: float
    max_fingers: int
    dummy_count_per_side: int


@dataclass(frozen=True)
class LayerMap:
    small_idt: int
    large_idt: int
    pads: int
    bottom_electrode: int
    outline: int

    def __post_init__(self):
        ids = (
            self.small_idt,
            self.large_idt,
            self.pads,
            self.bottom_electrode,
            self.outline,
        )
        if len(set(ids)) != len(ids):
            raise ConfigError("layer ids must be distinct")


@dataclass(frozen=True)
class ChipConfig:
    width_m: float
    height_m: float
    margin_m: float
    spacing_m: float


@dataclass(frozen=True)
class WaferConfig:
    diameter_m: float
    edge_exclusion_m: float
    keepout_m: tuple  # (x_min, y_min, x_max, y_max), wafer-centered
    grid_anchor_m: tuple  # (x, y) of one chip's lower-left corner

    def __post_init__(self):
        x0, y0, x1, y1 = self.keepout_m
        if not (x0 <= x1 and y0 <= y1):
            raise ConfigError("keepout rectangle has inverted bounds")
        if self.edge_exclusion_m >= self.diameter_m / 2:
            raise ConfigError("edge exclusion consumes the whole wafer")

    @property
    def radius_m(self) -> float:
        return self.diameter_m / 2.0


@dataclass(frozen=True)
class ReticleConfig:
    image_field_m: tuple
    demag: int


@dataclass(frozen=True)
class VariationConfig:
    thickness_center_m: float
    thickness_edge_drop_m: float
    thickness_noise_sigma_m: float
    pitch_sigma_m: float
    full_resolve: bool
    mode_quality: dict  # mode -> {"q_r": float, "k_eff_sq": float}

    def __post_init__(self):
        if self.thickness_center_m - max(self.thickness_edge_drop_m, 0.0) <= 0:
            raise ConfigError("thickness profile goes non-positive at the wafer edge")


@dataclass(frozen=True)
class ToolkitConfig:
    material: PlateMaterial
    plate: PlateSpec
    eps_r: float
    matching: MatchingConfig
    layers: LayerMap
    chip: ChipConfig
    wafer: WaferConfig
    reticle: ReticleConfig
    variation: VariationConfig
    seed: int

    @classmethod
    def default(cls) -> "ToolkitConfig":
        return cls.from_dict(default_config_dict())

    @classmethod
    def from_dict(cls, raw: dict) -> "ToolkitConfig":
        merged = _deep_merge(default_config_dict(), raw)
        try:
            jsonschema.validate(merged, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {path}: {exc.message}") from exc
        mat = merged["material"]
        material = PlateMaterial(
            rho=mat["rho_kg_m3"],
            v_l=mat["v_l_m_s"],
            v_t=mat["v_t_m_s"],
            name=mat["name"],
        )
        var = merged["variation"]
        return cls(
            material=material,
            plate=PlateSpec(material=material, h=merged["plate"]["thickness_m"]),
            eps_r=merged["capacitance"]["eps_r"],
            matching=MatchingConfig(
                target_impedance_ohm=merged["matching"]["target_impedance_ohm"],
                max_fingers=merged["matching"]["max_fingers"],
                dummy_count_per_side=merged["matching"]["dummy_count_per_side"],
            ),
            layers=LayerMap(**merged["layers"]),
            chip=ChipConfig(**merged["chip"]),
            wafer=WaferConfig(
                diameter_m=merged["wafer"]["diameter_m"],
                edge_exclusion_m=merged["wafer"]["edge_exclusion_m"],
                keepout_m=tuple(merged["wafer"]["keepout_m"]),
                grid_anchor_m=tuple(merged["wafer"]["grid_anchor_m"]),
            ),
            reticle=ReticleConfig(
                image_field_m=tuple(merged["reticle"]["image_field_m"]),
                demag=merged["reticle"]["demag"],
            ),
            variation=VariationConfig(
                thickness_center_m=var["thickness_center_m"],
                thickness_edge_drop_m=var["thickness_edge_drop_m"],
                thickness_noise_sigma_m=var["thickness_noise_sigma_m"],
                pitch_sigma_m=var["pitch_sigma_m"],
                full_resolve=var["full_resolve"],
                mode_quality={k: dict(v) for k, v in var["mode_quality"].items()},
            ),
            seed=merged["seed"],
        )


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = val
    return out


def _read_packaged(name: str) -> dict:
    with resources.files("lambkit.data").joinpath(name).open("r") as fh:
        return json.load(fh)


def default_config_dict() -> dict:
    return _read_packaged("default_config.json")


def load_config(path=None) -> ToolkitConfig:
    """Load a config file (or the packaged defaults when path is None)."""
    if path is None:
        return ToolkitConfig.default()
    try:
        with open(path, "r") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return ToolkitConfig.from_dict(raw)


def load_catalog(path=None) -> dict:
    """Design catalog: pitch sweep plus as-fabricated reference counts."""
    if path is None:
        raw = _read_packaged("design_catalog.json")
    else:
        try:
            with open(path, "r") as fh:
                raw = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"catalog file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"catalog file is not valid JSON: {exc}") from exc
    pitches = raw.get("pitches_m")
    if not isinstance(pitches, list) or not pitches or any(p <= 0 for p in pitches):
        raise ConfigError("catalog pitches_m must be a non-empty list of positive numbers")
    if sorted(pitches) != pitches:
        raise ConfigError("catalog pitches_m must be sorted ascending")
    return raw
