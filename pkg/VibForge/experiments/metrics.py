import logging
from dataclasses import dataclass

import numpy
import pandas
from scipy import fft
from scipy.signal import windows

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s", datefmt="%Y-%m-%d %H:%M:%S")


@dataclass(frozen=True)
class Metric:
    """Open- and closed-loop steady-state amplitudes and the attenuation between them."""

    y_ol: float
    y_cl: float
    ratio: float
    attenuation_db: float
    flagged: bool = False

    @classmethod
    def from_amplitudes(cls, y_ol, y_cl):
        if y_ol < 0 or y_cl < 0:
            raise ValueError(f"Amplitudes must be non-negative, got {y_ol} and {y_cl}")
        flagged = y_cl == 0
        ratio = numpy.inf if flagged else y_ol / y_cl
        return cls(y_ol=float(y_ol), y_cl=float(y_cl), ratio=float(ratio), attenuation_db=attenuation_db(y_ol, y_cl), flagged=flagged)


def steady_state_amplitude(series, t_grid, window=0.5):
    """
    Largest |value| over the final ``window`` seconds.

    Parameters:
    ----------
    series : numpy.ndarray
    t_grid : numpy.ndarray
        Sample times matching ``series``
    window : float
        Length of the trailing window [s] [Default: 0.5]
    """
    series = numpy.asarray(series, dtype=float)
    t_grid = numpy.asarray(t_grid, dtype=float)
    if series.shape != t_grid.shape:
        raise ValueError(f"series and t_grid differ in shape: {series.shape} vs {t_grid.shape}")
    if series.size == 0:
        raise ValueError("Cannot take the amplitude of an empty series")
    if window < 0 or window > t_grid[-1] - t_grid[0] + 1e-12:
        raise ValueError(f"window = {window} s exceeds the series span {t_grid[-1] - t_grid[0]} s")
    mask = t_grid >= t_grid[-1] - window - 1e-12
    return float(numpy.max(numpy.abs(series[mask])))


def attenuation_db(y_ol, y_cl):
    """20 log10(y_ol / y_cl); y_cl = 0 gives +inf and a warning."""
    if y_cl == 0:
        logging.warning("Closed-loop amplitude is zero; attenuation reported as +inf")
        return numpy.inf
    return float(20 * numpy.log10(y_ol / y_cl))


def magnitude_spectrum(series, T_s, window=None):
    """
    Single-sided, Hann-windowed amplitude spectrum.

    Parameters:
    ----------
    series : numpy.ndarray
        Uniformly sampled signal
    T_s : float
        Sample period [s]
    window : float, optional
        Only the trailing ``window`` seconds are analysed [Default: whole series]

    Returns:
    --------
    (frequency, magnitude)
        Frequencies up to 1 / (2 T_s); a sinusoid sitting on a bin reads its amplitude.
    """
    series = numpy.asarray(series, dtype=float)
    if window is not None:
        n_window = int(round(window / T_s))
        if n_window < len(series):
            series = series[-n_window:]
    if series.size < 2:
        raise ValueError("Need at least two samples for a spectrum")
    taper = windows.hann(series.size, sym=False)
    magnitude = numpy.abs(fft.rfft(series * taper)) * 2 / taper.sum()
    magnitude[0] /= 2
    if series.size % 2 == 0:
        magnitude[-1] /= 2
    frequency = fft.rfftfreq(series.size, d=T_s)
    return frequency, magnitude


def spectrum_table(open_loop, closed_loop, T_s, window=5.0):
    """Displacement and acceleration spectra of an open/closed-loop pair on a shared frequency grid."""
    columns = {}
    for label, record in (("ol", open_loop), ("cl", closed_loop)):
        for channel in ("y_disp", "y_acc"):
            frequency, magnitude = magnitude_spectrum(getattr(record, channel), T_s, window)
            columns["frequency"] = frequency
            columns[f"{channel}_{label}"] = magnitude
    return pandas.DataFrame(columns, columns=["frequency", "y_disp_ol", "y_disp_cl", "y_acc_ol", "y_acc_cl"])
