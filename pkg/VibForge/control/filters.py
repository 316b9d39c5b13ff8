from dataclasses import dataclass

import numpy
from scipy import signal

from .. import utils

FILTER_VARIANTS = ("gain", "lowpass", "dispestimator")


class DiscreteTransferFunction:
    def __init__(self, numerator, denominator=(1.0,)):
        """
        Direct form I realisation of b(q^-1) / a(q^-1).

        Parameters:
        ----------
        numerator : sequence of float
            b_0, b_1, ... multiplying x_k, x_{k-1}, ...
        denominator : sequence of float
            a_0, a_1, ... multiplying y_k, y_{k-1}, ...; normalised so that a_0 = 1

        Samples may be scalars or arrays; delay registers take the shape of the first sample and start at zero.
        """
        numerator = numpy.atleast_1d(numpy.asarray(numerator, dtype=float))
        denominator = numpy.atleast_1d(numpy.asarray(denominator, dtype=float))
        if denominator[0] == 0:
            raise ValueError("Leading denominator coefficient must be non-zero")
        self.numerator = numerator / denominator[0]
        self.denominator = denominator / denominator[0]
        self.reset()

    def reset(self):
        self._x = None
        self._y = None

    def step(self, x_k):
        """Advance one sample and return y_k."""
        x_k = numpy.asarray(x_k, dtype=float)
        if self._x is None:
            self._x = numpy.zeros((len(self.numerator),) + x_k.shape)
            self._y = numpy.zeros((max(len(self.denominator) - 1, 1),) + x_k.shape)
        self._x = numpy.roll(self._x, 1, axis=0)
        self._x[0] = x_k
        y_k = numpy.tensordot(self.numerator, self._x, axes=1)
        if len(self.denominator) > 1:
            y_k = y_k - numpy.tensordot(self.denominator[1:], self._y[: len(self.denominator) - 1], axes=1)
        self._y = numpy.roll(self._y, 1, axis=0)
        self._y[0] = y_k
        return y_k if y_k.ndim else float(y_k)

    def filter(self, x):
        """Run a whole sequence from the current state."""
        return numpy.array([self.step(x_k) for x_k in x])

    def frequency_response(self, omega, T_s):
        """Complex gain at angular frequency ``omega`` [rad/s] for sample period ``T_s``."""
        _, response = signal.freqz(self.numerator, self.denominator, worN=numpy.atleast_1d(omega) * T_s)
        return response


class HighPassFilter(DiscreteTransferFunction):
    def __init__(self, nu_hp):
        """(q - 1) / (q - nu/(nu+1)), i.e. y_k = x_k - x_{k-1} + nu/(nu+1) y_{k-1}."""
        if not nu_hp > 0:
            raise ValueError(f"nu_hp must be positive, got {nu_hp}")
        self.nu_hp = nu_hp
        self.pole = nu_hp / (nu_hp + 1)
        super().__init__([1.0, -1.0], [1.0, -self.pole])


class TrapezoidalIntegrator(DiscreteTransferFunction):
    def __init__(self, T_s):
        """(T_s/2) (q + 1) / (q - 1), i.e. y_k = y_{k-1} + T_s/2 (x_k + x_{k-1})."""
        if not T_s > 0:
            raise ValueError(f"T_s must be positive, got {T_s}")
        self.T_s = T_s
        super().__init__([T_s / 2, T_s / 2], [1.0, -1.0])


@dataclass(frozen=True)
class LowPassCoefficients:
    K_g: float
    r_lp: float
    theta_lp: float
    a1: float
    a2: float
    b_lp: float


def lowpass_coefficients(K_g, omega_lp, zeta_lp, T_s):
    """
    Coefficients of the second-order low-pass K_g b_lp q / (q^2 + a1 q + a2).

    The poles sit at r_lp exp(+-j theta_lp) with r_lp = exp(-zeta omega T_s) and theta_lp = omega T_s sqrt(1 - zeta^2);
    b_lp = 1 + a1 + a2 makes the DC gain equal to K_g.
    """
    if not 0 < zeta_lp < 1:
        raise ValueError(f"zeta_lp must lie strictly inside (0, 1), got {zeta_lp}")
    if not omega_lp > 0 or not T_s > 0:
        raise ValueError(f"omega_lp and T_s must be positive, got {omega_lp} and {T_s}")
    r_lp = numpy.exp(-zeta_lp * omega_lp * T_s)
    theta_lp = omega_lp * T_s * numpy.sqrt(1 - zeta_lp**2)
    a1 = -2 * r_lp * numpy.cos(theta_lp)
    a2 = r_lp**2
    return LowPassCoefficients(K_g=K_g, r_lp=float(r_lp), theta_lp=float(theta_lp), a1=float(a1), a2=float(a2), b_lp=float(1 + a1 + a2))


class LowPassFilter(DiscreteTransferFunction):
    def __init__(self, K_g, omega_lp, zeta_lp, T_s):
        self.coefficients = lowpass_coefficients(K_g, omega_lp, zeta_lp, T_s)
        c = self.coefficients
        super().__init__([0.0, c.K_g * c.b_lp], [1.0, c.a1, c.a2])


@dataclass(frozen=True)
class FilterSpec:
    """
    Signal conditioning between the sampled error e_k and the performance variable z_k.

    Parameters:
    ----------
    variant : str
        gain, lowpass or dispestimator
    K_g : float
        Output gain
    T_s : float
        Sample period [s]
    omega_lp, zeta_lp : float, optional
        Low-pass natural frequency [rad/s] and damping ratio
    nu_hp : float, optional
        High-pass window parameter of the displacement estimator
    """

    variant: str = "gain"
    K_g: float = 1.0
    T_s: float = 2.5e-3
    omega_lp: float = None
    zeta_lp: float = None
    nu_hp: float = None

    def __post_init__(self):
        variant = utils.remove_special_characters(str(self.variant).lower())
        aliases = {"displacementestimator": "dispestimator", "dispest": "dispestimator", "displacementestimate": "dispestimator"}
        variant = aliases.get(variant, variant)
        if variant not in FILTER_VARIANTS:
            raise ValueError(f"Unknown filter variant {self.variant}. Available: {FILTER_VARIANTS}")
        object.__setattr__(self, "variant", variant)
        if not self.K_g > 0:
            raise ValueError(f"K_g must be positive, got {self.K_g}")
        if not self.T_s > 0:
            raise ValueError(f"T_s must be positive, got {self.T_s}")
        if variant == "lowpass":
            if self.omega_lp is None or self.zeta_lp is None:
                raise ValueError("Low-pass filter needs omega_lp and zeta_lp")
            if not 0 < self.zeta_lp < 1:
                raise ValueError(f"zeta_lp must lie strictly inside (0, 1), got {self.zeta_lp}")
            if not self.omega_lp > 0:
                raise ValueError(f"omega_lp must be positive, got {self.omega_lp}")
        if variant == "dispestimator":
            if self.nu_hp is None or not self.nu_hp > 0:
                raise ValueError(f"Displacement estimator needs nu_hp > 0, got {self.nu_hp}")


class SignalConditioner:
    def __init__(self, spec):
        """
        Cascade of filter stages realising ``spec``.

        The displacement estimator runs high-pass, integrator, high-pass, integrator, high-pass and then the gain.
        Integrator poles and high-pass zeros at q = 1 are kept in separate stages.
        """
        self.spec = spec
        if spec.variant == "gain":
            self.stages = [DiscreteTransferFunction([spec.K_g])]
        elif spec.variant == "lowpass":
            self.stages = [LowPassFilter(spec.K_g, spec.omega_lp, spec.zeta_lp, spec.T_s)]
        else:
            self.stages = [
                HighPassFilter(spec.nu_hp),
                TrapezoidalIntegrator(spec.T_s),
                HighPassFilter(spec.nu_hp),
                TrapezoidalIntegrator(spec.T_s),
                HighPassFilter(spec.nu_hp),
                DiscreteTransferFunction([spec.K_g]),
            ]

    def reset(self):
        for stage in self.stages:
            stage.reset()

    def apply(self, e_k):
        """Push one error sample through every stage and return z_k."""
        value = e_k
        for stage in self.stages:
            value = stage.step(value)
        return value

    def filter(self, e):
        return numpy.array([self.apply(e_k) for e_k in e])

    def polynomials(self):
        """Numerator and denominator of the whole cascade in powers of q^-1 (no cancellation)."""
        numerator, denominator = numpy.ones(1), numpy.ones(1)
        for stage in self.stages:
            numerator = numpy.convolve(numerator, stage.numerator)
            denominator = numpy.convolve(denominator, stage.denominator)
        return numerator, denominator

    def frequency_response(self, omega):
        response = numpy.ones(numpy.atleast_1d(omega).shape, dtype=complex)
        for stage in self.stages:
            response = response * stage.frequency_response(omega, self.spec.T_s)
        return response


def filter_apply(spec, conditioner, e_k):
    """
    One filtering step; returns ``(conditioner, z_k)``. A ``None`` conditioner is built fresh from ``spec``.
    """
    if conditioner is None:
        conditioner = SignalConditioner(spec)
    return conditioner, conditioner.apply(e_k)


def frequency_response(spec, omega):
    """Analytic complex gain of the filter described by ``spec`` at angular frequency ``omega``."""
    return SignalConditioner(spec).frequency_response(omega)
