"""Wafer-map frequency statistics and a seeded thickness/pitch variation model.

Frequency deviation across the wafer is summarized per (mode, pitch) group as
the population relative standard deviation in percent.  The Monte Carlo model
samples a quadratic radial thickness profile plus Gaussian noise and a
per-design pitch jitter, then propagates both to frequency through the
logarithmic dispersion sensitivities, so a full wafer simulates in
milliseconds once the nominal curves are solved.  Every random draw comes
from a per-site stream spawned from one master seed: results are
bit-reproducible and sites can be evaluated in any order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ChipConfig, ToolkitConfig, WaferConfig
from .dispersion import (
    MODE_NAMES,
    PlateSpec,
    pitch_to_frequency,
    sensitivity,
)
from .errors import (
    DispersionRangeError,
    InputError,
    SolverError,
    StatisticsError,
)
from .layout import gen_wafer_map
from .mbvd import ModeMetrics

__all__ = [
    "VariationModel",
    "WaferSite",
    "DeviationRow",
    "DeviationReport",
    "TrendPoint",
    "TrendSeries",
    "relstd",
    "per_mode_deviation",
    "metrics_vs_frequency",
    "simulate_wafer",
    "deviation_csv_rows",
    "trend_csv_rows",
    "heatmap_csv_rows",
    "sites_to_dict",
    "sites_from_dict",
]

# Flat fallback when a variation model does not override per-mode quality.
_DEFAULT_MODE_QUALITY = {
    "A0": {"q_r": 700.0, "k_eff_sq": 0.008},
    "S0": {"q_r": 300.0, "k_eff_sq": 0.07},
    "A1": {"q_r": 250.0, "k_eff_sq": 0.04},
    "S1": {"q_r": 250.0, "k_eff_sq": 0.05},
}


def relstd(values) -> float:
    """Population standard deviation over mean, in percent.

    Needs at least two positive values; constant data gives exactly 0.
    """
    arr = np.asarray(list(values), dtype=float)
    if arr.size < 2:
        raise StatisticsError(f"relstd needs >= 2 values, got {arr.size}")
    if not np.all(arr > 0.0):
        raise StatisticsError("relstd needs strictly positive values")
    spread = float(np.std(arr))
    mean = float(np.mean(arr))
    # identical values can leave rounding dust when the pairwise-summed mean
    # lands an ulp off; snap that to an honest zero
    if spread <= 16.0 * np.finfo(float).eps * mean:
        return 0.0
    return float(spread / mean * 100.0)


@dataclass(frozen=True)
class VariationModel:
    """Across-wafer variation: quadratic radial thickness profile plus noise.

    Local thickness at radius r is center - edge_drop * (r/R)^2 plus Gaussian
    noise; local pitch is the design pitch plus Gaussian jitter.  mode_quality
    supplies the (q_r, k_eff_sq) pair reported for each simulated mode.
    """

    thickness_center_m: float
    thickness_edge_drop_m: float
    thickness_noise_sigma_m: float
    pitch_sigma_m: float
    seed: int
    full_resolve: bool = False
    mode_quality: dict = field(default_factory=lambda: dict(_DEFAULT_MODE_QUALITY))

    def __post_init__(self):
        if self.thickness_center_m <= 0.0:
            raise InputError("thickness_center_m must be positive")
        if self.thickness_edge_drop_m < 0.0:
            raise InputError("thickness_edge_drop_m must be >= 0")
        if self.thickness_center_m - self.thickness_edge_drop_m <= 0.0:
            raise InputError("thickness profile goes non-positive at the wafer edge")
        if self.thickness_noise_sigma_m < 0.0 or self.pitch_sigma_m < 0.0:
            raise InputError("noise sigmas must be >= 0")
        quality = {}
        for mode, entry in dict(self.mode_quality).items():
            if mode not in MODE_NAMES:
                raise InputError(f"unknown mode {mode!r} in mode_quality")
            q = float(entry["q_r"])
            k2 = float(entry["k_eff_sq"])
            if q <= 0.0:
                raise InputError(f"q_r for {mode} must be positive")
            if not 0.0 < k2 < 1.0:
                raise InputError(f"k_eff_sq for {mode} must be in (0, 1)")
            quality[mode] = {"q_r": q, "k_eff_sq": k2}
        if not quality:
            raise InputError("mode_quality must name at least one mode")
        object.__setattr__(self, "mode_quality", quality)

    @classmethod
    def from_config(cls, cfg: ToolkitConfig) -> "VariationModel":
        v = cfg.variation
        return cls(
            thickness_center_m=v.thickness_center_m,
            thickness_edge_drop_m=v.thickness_edge_drop_m,
            thickness_noise_sigma_m=v.thickness_noise_sigma_m,
            pitch_sigma_m=v.pitch_sigma_m,
            seed=cfg.seed,
            full_resolve=v.full_resolve,
            mode_quality=v.mode_quality,
        )

    def thickness_at(self, r_m: float, radius_m: float) -> float:
        """Deterministic profile value at radius r (noise not included)."""
        frac = (r_m / radius_m) ** 2
        return self.thickness_center_m - self.thickness_edge_drop_m * frac


@dataclass(frozen=True)
class WaferSite:
    """Metrics of one design measured on one die.

    Coordinates are die centers in mm from the wafer center.  Modes whose
    perturbed evaluation failed are listed in failed_modes and carry no
    metrics.  local_thickness_m / local_pitch_m echo the sampled values for
    validation; 0 means unknown (hand-built site).
    """

    site_id: int
    x_mm: float
    y_mm: float
    pitch_m: float
    metrics: dict
    failed_modes: tuple = ()
    local_thickness_m: float = 0.0
    local_pitch_m: float = 0.0

    def __post_init__(self):
        if self.site_id < 0:
            raise InputError("site_id must be >= 0")
        if not self.pitch_m > 0.0:
            raise InputError("site pitch must be positive")
        if not (math.isfinite(self.x_mm) and math.isfinite(self.y_mm)):
            raise InputError("site coordinates must be finite")
        metrics = dict(self.metrics)
        for mode, m in metrics.items():
            if mode not in MODE_NAMES:
                raise InputError(f"unknown mode {mode!r} in site metrics")
            if not isinstance(m, ModeMetrics):
                raise InputError("site metrics values must be ModeMetrics")
        failed = tuple(self.failed_modes)
        if set(failed) & set(metrics):
            raise InputError("a mode cannot both fail and carry metrics")
        object.__setattr__(self, "metrics", metrics)
        object.__setattr__(self, "failed_modes", failed)


@dataclass(frozen=True)
class DeviationRow:
    mode: str
    pitch_m: float
    mean_f_hz: float
    relstd_pct: float
    n: int
    excluded: int = 0

    def __post_init__(self):
        if self.relstd_pct < 0.0:
            raise InputError("relstd must be >= 0")
        if self.n < 2:
            raise InputError("a reported relstd needs >= 2 sites")


@dataclass(frozen=True)
class DeviationReport:
    rows: tuple
    warnings: tuple = ()

    def row(self, mode: str, pitch_m: float) -> DeviationRow:
        for r in self.rows:
            if r.mode == mode and math.isclose(r.pitch_m, pitch_m, rel_tol=1e-9):
                return r
        raise KeyError(f"no group ({mode}, {pitch_m})")

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "mode": r.mode,
                    "pitch_m": r.pitch_m,
                    "mean_f_hz": r.mean_f_hz,
                    "relstd_pct": r.relstd_pct,
                    "n": r.n,
                    "excluded": r.excluded,
                }
                for r in self.rows
            ],
            "warnings": list(self.warnings),
        }


def _grouped(sites):
    """(mode, pitch) -> canonical list of (site_id, ModeMetrics), plus exclusions.

    Values are sorted by (site_id, f_r) so every aggregate is evaluated in the
    same order no matter how the caller ordered the sites.
    """
    groups: dict = {}
    excluded: dict = {}
    for site in sites:
        for mode, m in site.metrics.items():
            key = (mode, site.pitch_m)
            groups.setdefault(key, []).append((site.site_id, m))
        for mode in site.failed_modes:
            key = (mode, site.pitch_m)
            excluded[key] = excluded.get(key, 0) + 1
            groups.setdefault(key, [])
    for values in groups.values():
        values.sort(key=lambda item: (item[0], item[1].f_r))
    return groups, excluded


def per_mode_deviation(sites) -> DeviationReport:
    """Group sites by (mode, pitch) and report the frequency relstd of each.

    Fit-failed sites are excluded and counted; groups left with fewer than two
    sites are omitted with a warning entry instead of a row.
    """
    sites = list(sites)
    if not sites:
        raise StatisticsError("no sites to aggregate")
    groups, excluded = _grouped(sites)
    rows = []
    warnings = []
    for key in sorted(groups, key=lambda k: (k[0], k[1])):
        mode, pitch = key
        values = [m.f_r for _, m in groups[key]]
        n_excl = excluded.get(key, 0)
        if len(values) < 2:
            warnings.append(
                f"group ({mode}, {pitch * 1e9:.6g} nm): "
                f"{len(values)} usable site(s), {n_excl} excluded; omitted"
            )
            continue
        rows.append(
            DeviationRow(
                mode=mode,
                pitch_m=pitch,
                mean_f_hz=float(np.mean(values)),
                relstd_pct=relstd(values),
                n=len(values),
                excluded=n_excl,
            )
        )
    return DeviationReport(tuple(rows), tuple(warnings))


@dataclass(frozen=True)
class TrendPoint:
    mode: str
    pitch_m: float
    mean_f_hz: float
    q_mean: float
    q_std: float
    k_mean: float
    k_std: float
    n: int


@dataclass(frozen=True)
class TrendSeries:
    """Per-mode (mean f_r, q_r band, k_eff_sq band) series, sorted by frequency."""

    points: dict
    warnings: tuple = ()

    # Plateau detection: spread of the q means within this fraction of their mean.
    PLATEAU_REL_SPREAD = 0.05

    def summary_lines(self) -> list:
        lines = []
        for mode in sorted(self.points):
            pts = self.points[mode]
            qs = [p.q_mean for p in pts]
            ks = [p.k_mean for p in pts]
            if len(qs) >= 3 and (max(qs) - min(qs)) <= self.PLATEAU_REL_SPREAD * (
                sum(qs) / len(qs)
            ):
                lines.append(f"{mode}: q_r plateau near {sum(qs) / len(qs):.3g}")
            else:
                lines.append(f"{mode}: q_r spans {min(qs):.3g}..{max(qs):.3g}")
            if len(ks) >= 2 and all(a > b for a, b in zip(ks, ks[1:])):
                lines.append(
                    f"{mode}: k_eff_sq decreasing from {ks[0]:.3g} to {ks[-1]:.3g}"
                )
            elif len(ks) >= 2 and all(a < b for a, b in zip(ks, ks[1:])):
                lines.append(
                    f"{mode}: k_eff_sq increasing from {ks[0]:.3g} to {ks[-1]:.3g}"
                )
            else:
                lines.append(f"{mode}: k_eff_sq spans {min(ks):.3g}..{max(ks):.3g}")
        return lines


def metrics_vs_frequency(sites) -> TrendSeries:
    """Aggregate q_r and k_eff_sq bands per (mode, pitch), ordered by mean f_r."""
    sites = list(sites)
    if not sites:
        raise StatisticsError("no sites to aggregate")
    groups, excluded = _grouped(sites)
    per_mode: dict = {}
    warnings = []
    for key in sorted(groups, key=lambda k: (k[0], k[1])):
        mode, pitch = key
        ms = [m for _, m in groups[key]]
        if len(ms) < 2:
            warnings.append(
                f"group ({mode}, {pitch * 1e9:.6g} nm): "
                f"{len(ms)} usable site(s), {excluded.get(key, 0)} excluded; omitted"
            )
            continue
        fs = [m.f_r for m in ms]
        qs = [m.q_r for m in ms]
        ks = [m.k_eff_sq for m in ms]
        per_mode.setdefault(mode, []).append(
            TrendPoint(
                mode=mode,
                pitch_m=pitch,
                mean_f_hz=float(np.mean(fs)),
                q_mean=float(np.mean(qs)),
                q_std=float(np.std(qs)),
                k_mean=float(np.mean(ks)),
                k_std=float(np.std(ks)),
                n=len(ms),
            )
        )
    for mode, pts in per_mode.items():
        pts.sort(key=lambda p: p.mean_f_hz)
        per_mode[mode] = tuple(pts)
    return TrendSeries(per_mode, tuple(warnings))


def _mode_metrics(model: VariationModel, mode: str, f_r: float) -> ModeMetrics:
    entry = model.mode_quality[mode]
    k2 = entry["k_eff_sq"]
    f_a = f_r * math.sqrt(1.0 + k2 / (1.0 - k2))
    return ModeMetrics(f_r=f_r, f_a=f_a, q_r=entry["q_r"], k_eff_sq=k2)


def simulate_wafer(
    model: VariationModel,
    designs,
    plate: PlateSpec,
    chip_cfg: ChipConfig,
    wafer_cfg: WaferConfig,
) -> list:
    """Monte Carlo wafer map: one WaferSite per (die placement, design pitch).

    ``designs`` is a sequence of electrode pitches in meters.  Each die draws
    its local film thickness from the radial profile plus noise and each
    design on it draws a pitch jitter, all from a per-die stream spawned off
    the master seed.  Frequencies come from first-order log sensitivities
    around the nominal plate, or from a full dispersion re-solve per site when
    ``model.full_resolve`` is set.  A site whose perturbed evaluation fails is
    flagged, not fatal; nominal failures propagate.
    """
    pitches = [float(p) for p in designs]
    if not pitches:
        raise InputError("no designs to simulate")
    if any(p <= 0.0 for p in pitches):
        raise InputError("design pitches must be positive")
    modes = tuple(model.mode_quality)

    # Nominal frequency and log sensitivities per (mode, pitch); failures
    # here violate the documented precondition and propagate to the caller.
    nominal = {}
    for pitch in pitches:
        k = math.pi / pitch
        for mode in modes:
            f_nom = pitch_to_frequency(pitch, mode, plate)
            s_h, s_p = sensitivity(plate, mode, k)
            nominal[(mode, pitch)] = (f_nom, s_h, s_p)

    placements = gen_wafer_map(chip_cfg, wafer_cfg)
    streams = np.random.SeedSequence(model.seed).spawn(len(placements))
    radius = wafer_cfg.radius_m

    sites = []
    for placement, stream in zip(placements, streams):
        rng = np.random.default_rng(stream)
        cx, cy = placement.center(chip_cfg)
        r = math.hypot(cx, cy)
        t_local = model.thickness_at(r, radius) + rng.normal(0.0, model.thickness_noise_sigma_m)
        for pitch in pitches:
            p_local = pitch + rng.normal(0.0, model.pitch_sigma_m)
            metrics = {}
            failed = []
            for mode in modes:
                try:
                    if t_local <= 0.0 or p_local <= 0.0:
                        raise SolverError("perturbed geometry is non-physical")
                    if model.full_resolve:
                        f_site = pitch_to_frequency(
                            p_local, mode, PlateSpec(plate.material, t_local)
                        )
                    else:
                        f_nom, s_h, s_p = nominal[(mode, pitch)]
                        f_site = f_nom * math.exp(
                            s_h * math.log(t_local / plate.h)
                            + s_p * math.log(p_local / pitch)
                        )
                    metrics[mode] = _mode_metrics(model, mode, f_site)
                except (SolverError, DispersionRangeError):
                    failed.append(mode)
            sites.append(
                WaferSite(
                    site_id=placement.site_id,
                    x_mm=cx * 1e3,
                    y_mm=cy * 1e3,
                    pitch_m=pitch,
                    metrics=metrics,
                    failed_modes=tuple(failed),
                    local_thickness_m=t_local,
                    local_pitch_m=p_local,
                )
            )
    return sites


# ------------------------------------------------------------- serialization


def deviation_csv_rows(report: DeviationReport) -> list:
    rows = ["mode,pitch,mean_f_Hz,relstd_pct,n"]
    for r in report.rows:
        rows.append(
            f"{r.mode},{r.pitch_m:.9g},{r.mean_f_hz:.10g},{r.relstd_pct:.8g},{r.n}"
        )
    return rows


def trend_csv_rows(series: TrendSeries) -> list:
    rows = ["mode,pitch,mean_f_Hz,q_mean,q_std,k_eff_sq_mean,k_eff_sq_std,n"]
    for mode in sorted(series.points):
        for p in series.points[mode]:
            rows.append(
                f"{p.mode},{p.pitch_m:.9g},{p.mean_f_hz:.10g},"
                f"{p.q_mean:.8g},{p.q_std:.8g},{p.k_mean:.8g},{p.k_std:.8g},{p.n}"
            )
    return rows


def heatmap_csv_rows(sites, mode: str, pitch_m: float) -> list:
    """Heatmap-ready rows for one (mode, pitch) group, in site order."""
    rows = ["x_mm,y_mm,f_Hz"]
    for site in sites:
        if not math.isclose(site.pitch_m, pitch_m, rel_tol=1e-9):
            continue
        m = site.metrics.get(mode)
        if m is None:
            continue
        rows.append(f"{site.x_mm:.6g},{site.y_mm:.6g},{m.f_r:.10g}")
    return rows


def sites_to_dict(sites, seed: int | None = None) -> dict:
    """JSON document for a wafer map; echoes the seed that produced it."""
    doc: dict = {"sites": []}
    if seed is not None:
        doc["seed"] = int(seed)
    for s in sites:
        entry = {
            "site_id": s.site_id,
            "x_mm": s.x_mm,
            "y_mm": s.y_mm,
            "pitch_m": s.pitch_m,
            "metrics": {
                mode: {
                    "f_r_hz": m.f_r,
                    "f_a_hz": m.f_a,
                    "q_r": m.q_r,
                    "k_eff_sq": m.k_eff_sq,
                }
                for mode, m in sorted(s.metrics.items())
            },
        }
        if s.failed_modes:
            entry["failed_modes"] = list(s.failed_modes)
        if s.local_thickness_m:
            entry["local_thickness_m"] = s.local_thickness_m
        if s.local_pitch_m:
            entry["local_pitch_m"] = s.local_pitch_m
        doc["sites"].append(entry)
    return doc


def sites_from_dict(doc: dict) -> list:
    if not isinstance(doc, dict) or "sites" not in doc:
        raise InputError("wafer map document must be an object with a 'sites' array")
    sites = []
    for entry in doc["sites"]:
        metrics = {
            mode: ModeMetrics(
                f_r=m["f_r_hz"], f_a=m["f_a_hz"], q_r=m["q_r"], k_eff_sq=m["k_eff_sq"]
            )
            for mode, m in entry.get("metrics", {}).items()
        }
        sites.append(
            WaferSite(
                site_id=entry["site_id"],
                x_mm=entry["x_mm"],
                y_mm=entry["y_mm"],
                pitch_m=entry["pitch_m"],
                metrics=metrics,
                failed_modes=tuple(entry.get("failed_modes", ())),
                local_thickness_m=entry.get("local_thickness_m", 0.0),
                local_pitch_m=entry.get("local_pitch_m", 0.0),
            )
        )
    return sites
