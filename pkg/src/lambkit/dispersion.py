"""Lamb-wave dispersion for a uniform elastic plate.

The plate is traction-free on both faces and characterized by its bulk
longitudinal and transverse velocities.  Guided modes split into symmetric
(S0, S1, ...) and antisymmetric (A0, A1, ...) families; within a family the
characteristic function has isolated roots in omega at fixed wavenumber k,
ordered so that index 0 is the lowest branch.

The characteristic function is evaluated in an all-real form: with
p^2 = w^2/v_l^2 - k^2 and q^2 = w^2/v_t^2 - k^2, the functions
sin(x*hh)/x and cos(x*hh) are even in x, so they stay real when p^2 or q^2
turns negative (sin -> sinh, cos -> cosh) and the residual is continuous
across the sign changes.  Hyperbolic factors are rescaled by exp(-|x|*hh)
to avoid overflow; the rescaling is a positive common factor per term and
preserves both roots and signs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import DispersionRangeError, InputError, SensitivityError, SolverError

__all__ = [
    "PlateMaterial",
    "PlateSpec",
    "DispersionCurve",
    "MODE_NAMES",
    "rayleigh_lamb_residual",
    "solve_mode",
    "solve_at_k",
    "pitch_to_frequency",
    "sensitivity",
    "thin_plate_s0_velocity",
    "curve_to_csv_rows",
]

MODE_NAMES = ("A0", "A1", "S0", "S1")

# Scan-window recipe for root bracketing: omega in (0, 3*v_l*k + 4*pi*v_l/h]
# sampled with SCAN_POINTS abscissae.  The low end uses log spacing because
# the A0 branch sits orders of magnitude below the window top at small k*h.
# The floor must stay below the lowest root but above the region where both
# residual terms cancel to rounding noise, so it tracks a physical estimate
# of the lowest branch (thin-plate flexural law, capped by the Rayleigh
# asymptote) rather than a fixed fraction of the window top.
SCAN_POINTS = 2000
_LOG_FRACTION = 0.35
_FLOOR_MARGIN = 0.02
_ROOT_RTOL = 1e-12


@dataclass(frozen=True)
class PlateMaterial:
    """Isotropic effective plate material (velocities in m/s, density kg/m^3)."""

    rho: float
    v_l: float
    v_t: float
    name: str = ""

    def __post_init__(self):
        if not (self.rho > 0 and self.v_l > 0 and self.v_t > 0):
            raise InputError("material constants must be positive")
        if not self.v_t < self.v_l:
            raise InputError("transverse velocity must be below longitudinal")


@dataclass(frozen=True)
class PlateSpec:
    """A plate: material plus thickness h in meters."""

    material: PlateMaterial
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise InputError("plate thickness must be positive")

    def scaled(self, s: float) -> "PlateSpec":
        return PlateSpec(self.material, self.h * s)


def _mode_family(mode: str) -> str:
    if mode not in ("A0", "A1", "S0", "S1"):
        raise InputError(f"unknown mode name {mode!r}")
    return "symmetric" if mode.startswith("S") else "antisymmetric"


def _branch_index(mode: str) -> int:
    return int(mode[1])


def _even_sin(x2, hh):
    """sin(x*hh)/x for x = sqrt(x2), even in x; hyperbolic branch is scaled
    by exp(-|x|*hh).  Vectorized over x2."""
    x2 = np.asarray(x2, dtype=float)
    out = np.empty_like(x2)
    pos = x2 > 0
    neg = x2 < 0
    zero = ~pos & ~neg
    if np.any(pos):
        x = np.sqrt(x2[pos])
        out[pos] = np.sin(x * hh) / x
    if np.any(neg):
        xi = np.sqrt(-x2[neg])
        # sinh(xi*hh)/xi * exp(-xi*hh) = (1 - exp(-2*xi*hh)) / (2*xi)
        out[neg] = -np.expm1(-2.0 * xi * hh) / (2.0 * xi)
    if np.any(zero):
        out[zero] = hh
    return out


def _even_cos(x2, hh):
    """cos(x*hh) for x = sqrt(x2), even in x; hyperbolic branch is scaled
    by exp(-|x|*hh)."""
    x2 = np.asarray(x2, dtype=float)
    out = np.empty_like(x2)
    pos = x2 >= 0
    neg = ~pos
    if np.any(pos):
        x = np.sqrt(x2[pos])
        out[pos] = np.cos(x * hh)
    if np.any(neg):
        xi = np.sqrt(-x2[neg])
        # cosh(xi*hh) * exp(-xi*hh) = (1 + exp(-2*xi*hh)) / 2
        out[neg] = (1.0 + np.exp(-2.0 * xi * hh)) / 2.0
    return out


def _residual_terms(w, k: float, plate: PlateSpec, symmetry: str):
    """Both additive terms of the characteristic function, vectorized.

    Their sum is the residual; |t1| + |t2| bounds the magnitude that the sum
    cancels against, which calibrates the rounding-noise floor near omega -> 0
    where the two terms annihilate.
    """
    hh = 0.5 * plate.h
    vl = plate.material.v_l
    vt = plate.material.v_t
    p2 = (w / vl) ** 2 - k * k
    q2 = (w / vt) ** 2 - k * k
    k2 = k * k
    if symmetry == "symmetric":
        t1 = (q2 - k2) ** 2 * _even_sin(q2, hh) * _even_cos(p2, hh)
        t2 = (4.0 * k2 * p2) * _even_sin(p2, hh) * _even_cos(q2, hh)
    else:
        t1 = (4.0 * k2 * q2) * _even_sin(q2, hh) * _even_cos(p2, hh)
        t2 = (q2 - k2) ** 2 * _even_sin(p2, hh) * _even_cos(q2, hh)
    return t1, t2


def rayleigh_lamb_residual(omega, k: float, plate: PlateSpec, symmetry: str):
    """Real characteristic residual; zero exactly on a dispersion branch.

    symmetry is "symmetric" or "antisymmetric".  omega may be a scalar or an
    array.  The value is even in the branch choice of p and q, and both terms
    share one p-factor and one q-factor so the overflow rescaling cancels in
    the sign structure.
    """
    if symmetry not in ("symmetric", "antisymmetric"):
        raise InputError(f"unknown symmetry {symmetry!r}")
    if k < 0:
        raise InputError("wavenumber must be >= 0")
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise InputError("omega must be positive")
    t1, t2 = _residual_terms(w, k, plate, symmetry)
    res = t1 + t2
    if np.isscalar(omega):
        return float(res)
    return res


def _scan_grid(plate: PlateSpec, k: float, n_points: int, hints=()):
    vl = plate.material.v_l
    vt = plate.material.v_t
    w_max = 3.0 * vl * k + 4.0 * math.pi * vl / plate.h
    n_log = int(n_points * _LOG_FRACTION)
    n_lin = n_points - n_log
    c_plate = 2.0 * vt * math.sqrt(1.0 - (vt / vl) ** 2)
    w_flex = k * k * plate.h * c_plate / (2.0 * math.sqrt(3.0))
    lo = _FLOOR_MARGIN * min(w_flex, 0.9 * vt * k)
    split = w_max * 0.02
    lo = min(lo, split * 0.5)
    parts = [
        np.geomspace(lo, split, n_log, endpoint=False),
        np.linspace(split, w_max, n_lin),
    ]
    # Continuation hints: cluster extra abscissae around roots found at the
    # previous k so narrow brackets are never stepped over.
    for w0 in hints:
        if 0 < w0 < w_max:
            parts.append(np.linspace(w0 * 0.98, min(w0 * 1.02, w_max), 17))
    grid = np.unique(np.concatenate(parts))
    return grid[grid > 0]


# Sign changes are trusted only where the residual stands clear of the
# cancellation noise of its two terms (the terms annihilate as omega -> 0, so
# sub-noise flicker there would otherwise fabricate brackets).
_NOISE_MARGIN = 16.0 * np.finfo(float).eps


def _roots_at_k(
    plate: PlateSpec,
    symmetry: str,
    k: float,
    n_roots: int,
    n_points: int = SCAN_POINTS,
    hints=(),
):
    """Lowest n_roots zeros of the residual in the scan window, ascending.

    Returns (roots, reliable_count): reliable_count is False when grid points
    below the first accepted root were indistinguishable from rounding noise,
    in which case ascending branch indices above 0 cannot be trusted.
    """
    grid = _scan_grid(plate, k, n_points, hints)
    t1, t2 = _residual_terms(grid, k, plate, symmetry)
    vals = t1 + t2
    noise = _NOISE_MARGIN * (np.abs(t1) + np.abs(t2))
    resolved = np.abs(vals) > noise
    roots = []
    first_root_idx = None
    f = lambda w: rayleigh_lamb_residual(float(w), k, plate, symmetry)
    for i in range(len(grid) - 1):
        if len(roots) >= n_roots:
            break
        if not (resolved[i] and resolved[i + 1]):
            continue
        a, b = grid[i], grid[i + 1]
        fa, fb = vals[i], vals[i + 1]
        if fa * fb < 0.0:
            root = brentq(f, a, b, rtol=_ROOT_RTOL, maxiter=200)
        else:
            continue
        if roots and abs(root - roots[-1]) <= _ROOT_RTOL * root * 10:
            continue
        if first_root_idx is None:
            first_root_idx = i
        roots.append(float(root))
    if first_root_idx is None:
        reliable_count = not np.any(~resolved)
    else:
        reliable_count = bool(np.all(resolved[: first_root_idx + 1]))
    return roots, reliable_count


def solve_at_k(plate: PlateSpec, mode: str, k: float) -> float:
    """Frequency in Hz of one mode at a single wavenumber.

    Raises SolverError if the branch index has no root in the scan window.
    """
    if not k > 0:
        raise InputError("wavenumber must be positive")
    fam = _mode_family(mode)
    idx = _branch_index(mode)
    roots, reliable = _roots_at_k(plate, fam, k, idx + 1)
    if idx > 0 and not reliable:
        raise SolverError(
            f"branch indexing unreliable at k={k:.6g} rad/m: residual is below "
            "the rounding-noise floor near the scan floor (k*h too small)"
        )
    if len(roots) <= idx:
        raise SolverError(
            f"no {mode} root in scan window at k={k:.6g} rad/m "
            f"(found {len(roots)} root(s), need branch {idx})"
        )
    return roots[idx] / (2.0 * math.pi)


@dataclass
class DispersionCurve:
    """Solved f(k) samples for one mode, plus k-intervals with no root."""

    mode: str
    k: np.ndarray
    f: np.ndarray
    gaps: tuple = ()

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        self.gaps = tuple((float(lo), float(hi)) for lo, hi in self.gaps)
        if self.k.size != self.f.size:
            raise InputError("k and f arrays must have equal length")
        if self.k.size and (np.any(np.diff(self.k) <= 0) or np.any(self.k <= 0)):
            raise InputError("k samples must be positive and strictly increasing")
        if np.any(self.f <= 0):
            raise InputError("frequencies must be positive")
        if self.mode in ("A0", "S0") and self.f.size > 1:
            # Fundamental branches are non-decreasing in k; tolerate only
            # solver-level jitter.
            dif = np.diff(self.f)
            if np.any(dif < -1e-9 * self.f[:-1]):
                raise InputError(f"{self.mode} curve is not non-decreasing in k")

    @property
    def v_phase(self) -> np.ndarray:
        return 2.0 * math.pi * self.f / self.k

    def in_gap(self, k: float) -> bool:
        return any(lo <= k <= hi for lo, hi in self.gaps)


def solve_mode(
    plate: PlateSpec, mode: str, k_grid, n_scan: int = SCAN_POINTS
) -> DispersionCurve:
    """Solve one mode over a strictly increasing positive wavenumber grid.

    Wavenumbers where the branch index has no root in the scan window are
    recorded as gap intervals rather than raising.
    """
    ks = np.asarray(k_grid, dtype=float)
    if ks.ndim != 1 or ks.size == 0:
        raise InputError("k grid must be a non-empty 1-D array")
    if np.any(ks <= 0) or np.any(np.diff(ks) <= 0):
        raise InputError("k grid must be positive and strictly increasing")
    fam = _mode_family(mode)
    idx = _branch_index(mode)
    out_k, out_f = [], []
    missing_idx = []
    hints = ()
    for i, k in enumerate(ks):
        roots, reliable = _roots_at_k(plate, fam, float(k), idx + 1, n_scan, hints)
        if (idx > 0 and not reliable) or len(roots) <= idx:
            missing_idx.append(i)
            continue
        out_k.append(float(k))
        out_f.append(roots[idx] / (2.0 * math.pi))
        hints = tuple(roots)
    # Consecutive missing grid points collapse into one gap interval.
    gaps = []
    for i in missing_idx:
        if gaps and i == gaps[-1][1]:
            gaps[-1] = (gaps[-1][0], i + 1)
        else:
            gaps.append((i, i + 1))
    gaps = [(float(ks[a]), float(ks[b - 1])) for a, b in gaps]
    return DispersionCurve(mode, np.array(out_k), np.array(out_f), gaps)


def pitch_to_frequency(
    pitch: float, mode: str, plate: PlateSpec, curve: DispersionCurve | None = None
) -> float:
    """Frequency at the electrode-pitch-defined wavenumber k = pi/pitch.

    The acoustic wavelength equals twice the pitch.  Evaluation interpolates
    a solved curve with a monotone cubic (PCHIP); when no curve is supplied a
    local one is solved around the target wavenumber.
    """
    if not pitch > 0:
        raise InputError("pitch must be positive")
    k = math.pi / pitch
    if curve is None:
        grid = k * np.linspace(0.9, 1.1, 11)
        curve = solve_mode(plate, mode, grid)
    if curve.mode != mode:
        raise InputError(f"curve is for {curve.mode}, not {mode}")
    if curve.k.size < 2 or k < curve.k[0] or k > curve.k[-1]:
        raise DispersionRangeError(
            f"k={k:.6g} rad/m outside solved range for {mode}"
        )
    if curve.in_gap(k):
        raise DispersionRangeError(f"k={k:.6g} rad/m falls in a {mode} gap")
    interp = PchipInterpolator(curve.k, curve.f)
    return float(interp(k))


def sensitivity(plate: PlateSpec, mode: str, k: float, rel_step: float = 1e-4):
    """Logarithmic sensitivities (dlnf/dlnh, dlnf/dlnpitch) at fixed mode and k.

    Central differences with a relative step on thickness and on pitch
    (pitch enters through k = pi/pitch).  Euler homogeneity of f(k, h) makes
    the two sum to -1 up to truncation error.
    """
    if not 0 < rel_step < 0.1:
        raise InputError("rel_step must be in (0, 0.1)")
    d = rel_step
    try:
        f_hp = solve_at_k(plate.scaled(1.0 + d), mode, k)
        f_hm = solve_at_k(plate.scaled(1.0 - d), mode, k)
        pitch = math.pi / k
        f_pp = solve_at_k(plate, mode, math.pi / (pitch * (1.0 + d)))
        f_pm = solve_at_k(plate, mode, math.pi / (pitch * (1.0 - d)))
    except SolverError as exc:
        raise SensitivityError(f"perturbed solve failed for {mode}: {exc}") from exc
    dln = math.log((1.0 + d) / (1.0 - d))
    dlnf_dlnh = math.log(f_hp / f_hm) / dln
    dlnf_dlnpitch = math.log(f_pp / f_pm) / dln
    return dlnf_dlnh, dlnf_dlnpitch


def thin_plate_s0_velocity(material: PlateMaterial) -> float:
    """Extensional plate velocity 2*v_t*sqrt(1 - v_t^2/v_l^2) (kh -> 0 limit)."""
    r = (material.v_t / material.v_l) ** 2
    return 2.0 * material.v_t * math.sqrt(1.0 - r)


def curve_to_csv_rows(curve: DispersionCurve):
    """Rows of (mode, k_rad_per_m, f_hz, v_phase_m_per_s) as strings."""
    rows = []
    vp = curve.v_phase
    for i in range(curve.k.size):
        rows.append(
            (curve.mode, f"{curve.k[i]:.9e}", f"{curve.f[i]:.9e}", f"{vp[i]:.9e}")
        )
    return rows
