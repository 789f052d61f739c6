"""One-port OSL calibration: three-term error box solved per frequency.

Model:  G_meas = e00 + (e10e01 * G) / (1 - e11 * G)
             = (e00 - de * G) / (1 - e11 * G),   de = e00*e11 - e10e01

Given measured reflections of the short, open, and load standards, each
frequency yields one linear 3x3 system in (e00, e11, de):

    [1,  G_meas * G,  -G] . [e00, e11, de]^T = G_meas

Standards default to the ideal definitions (-1, +1, 0); an offset model
with electrical delay and loss is available for characterized standards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, CorrectionError, InputError
from .touchstone import TouchstoneFile

__all__ = [
    "ErrorBox",
    "OffsetStandard",
    "OslStandards",
    "IDEAL_STANDARDS",
    "osl_solve",
    "apply_correction",
    "calibrate_file",
]


@dataclass(frozen=True)
class ErrorBox:
    """Directivity, source match, and the combined tracking term."""

    e00: complex
    e11: complex
    de: complex  # e00*e11 - e10e01

    def __post_init__(self):
        if abs(self.e11) >= 1.0:
            raise InputError("source match |e11| must be < 1 for a physical fixture")

    @property
    def e10e01(self) -> complex:
        return self.e00 * self.e11 - self.de

    @classmethod
    def identity(cls) -> "ErrorBox":
        return cls(e00=0j, e11=0j, de=-1 + 0j)


@dataclass(frozen=True)
class OffsetStandard:
    """Reflection standard with electrical delay and loss.

    gamma(f) = gamma0 * exp(-2 * (loss_np_per_hz * f + j*2*pi*f*delay_s))
    The factor 2 accounts for the round trip through the offset line.
    """

    gamma0: complex
    delay_s: float = 0.0
    loss_np_per_hz: float = 0.0

    def gamma(self, f_hz):
        f = np.asarray(f_hz, dtype=float)
        g = self.gamma0 * np.exp(
            -2.0 * (self.loss_np_per_hz * f + 2j * math.pi * f * self.delay_s)
        )
        return complex(g) if g.ndim == 0 else g


@dataclass(frozen=True)
class OslStandards:
    short: OffsetStandard
    open: OffsetStandard
    load: OffsetStandard


IDEAL_STANDARDS = OslStandards(
    short=OffsetStandard(gamma0=-1 + 0j),
    open=OffsetStandard(gamma0=1 + 0j),
    load=OffsetStandard(gamma0=0j),
)


def osl_solve(
    f_hz,
    meas_short,
    meas_open,
    meas_load,
    standards: OslStandards = IDEAL_STANDARDS,
):
    """Error boxes per frequency from the three measured standards."""
    f = np.asarray(f_hz, dtype=float)
    ms = np.asarray(meas_short, dtype=complex)
    mo = np.asarray(meas_open, dtype=complex)
    ml = np.asarray(meas_load, dtype=complex)
    if not (f.shape == ms.shape == mo.shape == ml.shape) or f.ndim != 1:
        raise InputError("frequency and standard arrays must share one shape")
    boxes = []
    for i in range(f.size):
        meas = (ms[i], mo[i], ml[i])
        gact = (
            standards.short.gamma(f[i]),
            standards.open.gamma(f[i]),
            standards.load.gamma(f[i]),
        )
        if len({meas[0], meas[1], meas[2]}) < 3:
            raise CalibrationError(
                f"degenerate standards at {f[i]:.6g} Hz: two measured values equal"
            )
        a = np.array(
            [[1.0, m * g, -g] for m, g in zip(meas, gact)], dtype=complex
        )
        b = np.array(meas, dtype=complex)
        try:
            e00, e11, de = np.linalg.solve(a, b)
        except np.linalg.LinAlgError as exc:
            raise CalibrationError(
                f"singular calibration system at {f[i]:.6g} Hz: {exc}"
            ) from exc
        try:
            boxes.append(ErrorBox(e00=e00, e11=e11, de=de))
        except InputError as exc:
            raise CalibrationError(
                f"unphysical error box at {f[i]:.6g} Hz: {exc}"
            ) from exc
    return boxes


def apply_correction(box: ErrorBox, s_meas):
    """Invert the bilinear model: G = (s - e00) / (e10e01 + e11 (s - e00))."""
    s = np.asarray(s_meas, dtype=complex)
    num = s - box.e00
    den = box.e10e01 + box.e11 * num
    if np.any(den == 0):
        raise CorrectionError("singular correction denominator")
    g = num / den
    return complex(g) if g.ndim == 0 else g


def _check_same_grid(name: str, a: TouchstoneFile, b: TouchstoneFile):
    if len(a) != len(b) or not np.allclose(
        a.frequencies, b.frequencies, rtol=1e-9, atol=0.0
    ):
        raise CalibrationError(f"{name} standard frequency grid differs from the DUT")


def calibrate_file(
    dut: TouchstoneFile,
    short: TouchstoneFile,
    open_std: TouchstoneFile,
    load: TouchstoneFile,
    standards: OslStandards = IDEAL_STANDARDS,
) -> TouchstoneFile:
    """OSL-correct a measured DUT file against three standard files."""
    _check_same_grid("short", dut, short)
    _check_same_grid("open", dut, open_std)
    _check_same_grid("load", dut, load)
    boxes = osl_solve(dut.frequencies, short.s11, open_std.s11, load.s11, standards)
    corrected = np.array(
        [apply_correction(box, s) for box, s in zip(boxes, dut.s11)], dtype=complex
    )
    return TouchstoneFile(
        frequencies=dut.frequencies.copy(),
        s11=corrected,
        z0=dut.z0,
        frequency_unit=dut.frequency_unit,
        fmt=dut.fmt,
        comments=dut.comments,
    )
