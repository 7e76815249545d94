"""Welch power spectral density of force-coefficient time series."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .errors import ConfigurationError, InsufficientDataError, SamplingError

__all__ = ["Window", "PsdConfig", "PsdResult", "welch_psd", "dominant_peaks", "check_uniform", "write_psd_csv", "read_forces_csv"]


class Window(enum.Enum):
    HAMMING = "Hamming"
    HANN = "Hann"
    RECTANGULAR = "Rectangular"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        for w in cls:
            if w.value.lower() == str(value).lower():
                return w
        raise ConfigurationError(f"unknown window {value!r}; expected Hamming, Hann or Rectangular")

    def samples(self, n):
        # symmetric windows, matching the usual pwelch defaults
        if self is Window.HAMMING:
            return np.hamming(n)
        if self is Window.HANN:
            return np.hanning(n)
        return np.ones(n)


@dataclass
class PsdConfig:
    segment_length: int
    overlap: float = 0.5
    window: Window = Window.HAMMING
    dt: float = 1.0
    chord: float = 1.0
    u_inf: float = 1.0

    def __post_init__(self):
        self.window = Window.parse(self.window)
        if int(self.segment_length) != self.segment_length or self.segment_length < 2:
            raise ConfigurationError(f"segment length must be an integer >= 2, got {self.segment_length!r}")
        self.segment_length = int(self.segment_length)
        if not 0.0 <= self.overlap < 1.0:
            raise ConfigurationError(f"overlap fraction must lie in [0, 1), got {self.overlap}")
        if self.dt <= 0.0 or self.chord <= 0.0 or self.u_inf <= 0.0:
            raise ConfigurationError("dt, chord and u_inf must be positive")


@dataclass
class PsdResult:
    frequency: np.ndarray
    psd: np.ndarray
    strouhal: np.ndarray
    segments: int

    @property
    def df(self):
        return float(self.frequency[1] - self.frequency[0])


def check_uniform(times, rtol=1e-6):
    """Return the sampling interval of ``times``; raise :class:`SamplingError` if uneven."""
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise InsufficientDataError("need at least two time stamps")
    steps = np.diff(times)
    dt = float(np.mean(steps))
    if dt <= 0.0 or np.max(np.abs(steps - dt)) > rtol * dt:
        raise SamplingError(
            f"time stamps are not uniformly spaced (interval range {steps.min():.6g} .. {steps.max():.6g})"
        )
    return dt


def welch_psd(signal, config, times=None):
    """One-sided Welch PSD (power per unit frequency), no detrending.

    Segments of ``segment_length`` samples advance by
    ``round(segment_length * (1 - overlap))``; each is windowed, transformed
    and the squared magnitudes are averaged.  The frequency axis is also given
    in Strouhal units ``f c / U``.
    """
    x = np.asarray(signal, dtype=float)
    dt = config.dt
    if times is not None:
        dt = check_uniform(times)
    nseg = config.segment_length
    if x.ndim != 1 or len(x) < nseg:
        raise InsufficientDataError(f"signal of length {len(x)} is shorter than one segment ({nseg})")
    step = max(1, int(round(nseg * (1.0 - config.overlap))))
    starts = np.arange(0, len(x) - nseg + 1, step)
    win = config.window.samples(nseg)
    scale = 1.0 / ((1.0 / dt) * np.sum(win * win))
    acc = np.zeros(nseg // 2 + 1)
    for s in starts:
        spec = np.fft.rfft(x[s : s + nseg] * win)
        acc += np.abs(spec) ** 2
    psd = acc * scale / len(starts)
    # fold negative frequencies except DC and (even length) Nyquist
    if nseg % 2 == 0:
        psd[1:-1] *= 2.0
    else:
        psd[1:] *= 2.0
    freq = np.fft.rfftfreq(nseg, dt)
    return PsdResult(frequency=freq, psd=psd, strouhal=freq * config.chord / config.u_inf, segments=len(starts))


def dominant_peaks(result, k):
    """Top ``k`` local maxima ranked by prominence, returned as ``(St, power)`` sorted by power."""
    if int(k) != k or k < 1:
        raise ConfigurationError(f"number of peaks must be >= 1, got {k!r}")
    idx, props = find_peaks(result.psd, prominence=0.0)
    if len(idx) == 0:
        return []
    top = idx[np.argsort(props["prominences"])[::-1][: int(k)]]
    top = top[np.argsort(result.psd[top])[::-1]]
    return [(float(result.strouhal[i]), float(result.psd[i])) for i in top]


def read_forces_csv(path):
    """Columns of a ``forces.csv`` file as a dict of arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InsufficientDataError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return {h: data[:, i] for i, h in enumerate(header)}


def write_psd_csv(path, results):
    """``psd.csv`` with columns ``st, psd_total, psd_<patch>...``.

    ``results`` maps a series name (``"total"`` or a patch) to a
    :class:`PsdResult`; all must share one frequency axis.
    """
    names = ["total"] + [k for k in results if k != "total"]
    st = results[names[0]].strouhal
    for n in names:
        if not np.array_equal(results[n].strouhal, st):
            raise ValueError("all spectra in psd.csv must share one frequency axis")
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["st"] + [f"psd_{n}" for n in names])
        for i in range(len(st)):
            wr.writerow([f"{st[i]:.17g}"] + [f"{results[n].psd[i]:.17g}" for n in names])
