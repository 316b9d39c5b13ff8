import logging

import numpy
from scipy import linalg

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s", datefmt="%Y-%m-%d %H:%M:%S")

MAX_HALVINGS = 12


def disturbance(t, f_dist):
    """Unit sinusoidal force sin(2 pi f_dist t)."""
    return numpy.sin(2 * numpy.pi * f_dist * t)


def _rk4_linear(A, x, f0, fm, f1, h):
    """
    Classical RK4 step of x' = A x + f(t) with the forcing given at t, t + h/2 and t + h.

    ``x`` and the forcing terms may be matrices, in which case every column is stepped.
    """
    k1 = A @ x + f0
    k2 = A @ (x + h / 2 * k1) + fm
    k3 = A @ (x + h / 2 * k2) + fm
    k4 = A @ (x + h * k3) + f1
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_substep(ss, x, u_held, t, h, f_dist):
    """
    One RK4 step of the beam with the control held and the disturbance evaluated at the stage times.

    Parameters:
    ----------
    ss : StateSpace
    x : numpy.ndarray
        State at time t
    u_held : float
        Zero-order-held control
    t : float
        Start of the substep [s]
    h : float
        Substep [s]
    f_dist : float
        Disturbance frequency [Hz]
    """
    forcing = ss.B_u * u_held
    f0 = forcing + ss.B_d * disturbance(t, f_dist)
    fm = forcing + ss.B_d * disturbance(t + h / 2, f_dist)
    f1 = forcing + ss.B_d * disturbance(t + h, f_dist)
    return _rk4_linear(ss.A, x, f0, fm, f1, h)


def integrate_control_period(ss, x, u_held, t0, f_dist, n_sub, h):
    """Chain ``n_sub`` RK4 substeps of length ``h`` starting at ``t0``."""
    for j in range(n_sub):
        x = rk4_substep(ss, x, u_held, t0 + j * h, h, f_dist)
    return x


def rk4_amplification(z):
    """Stability polynomial of classical RK4."""
    return 1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24


def rk4_spectral_radius(A, h):
    eigenvalues = linalg.eigvals(A)
    return float(numpy.max(numpy.abs(rk4_amplification(h * eigenvalues))))


def substeps_per_period(T_sim, T_s):
    n_sub = int(round(T_s / T_sim))
    if n_sub < 1 or abs(n_sub * T_sim - T_s) > 1e-9 * T_s:
        raise ValueError(f"T_s = {T_s} is not an integer multiple of T_sim = {T_sim}")
    return n_sub


def stable_substep(A, T_sim, T_s, refine=True):
    """
    Largest substep T_sim / 2^j for which RK4 is stable on every eigenvalue of A.

    Returns:
    --------
    (h, n_sub)
        substep and the number of substeps in one sample period
    """
    n_sub = substeps_per_period(T_sim, T_s)
    h = T_s / n_sub
    eigenvalues = linalg.eigvals(A)
    radius = float(numpy.max(numpy.abs(rk4_amplification(h * eigenvalues))))
    if radius <= 1:
        return h, n_sub
    if not refine:
        logging.warning(f"RK4 step {h:.3e} s is unstable for this model (spectral radius {radius:.3f}); refinement disabled")
        return h, n_sub
    for _ in range(MAX_HALVINGS):
        h, n_sub = h / 2, n_sub * 2
        refined = float(numpy.max(numpy.abs(rk4_amplification(h * eigenvalues))))
        if refined <= 1:
            logging.info(f"Refined RK4 substep from {T_sim:.3e} s to {h:.3e} s (spectral radius {radius:.3f} -> {refined:.3f}, {n_sub} substeps per period)")
            return h, n_sub
    raise ValueError(f"Could not find a stable RK4 substep below {T_sim} s after {MAX_HALVINGS} halvings")


class PeriodPropagator:
    def __init__(self, ss, T_s, n_sub, f_dist):
        """
        One sample period of chained RK4 substeps collapsed into an affine map.

        With the control held and d = sin(omega t), the period starting at t_k maps
        x -> F x + G_u u + G_s sin(omega t_k) + G_c cos(omega t_k), using the same stage algebra as ``rk4_substep``.

        Parameters:
        ----------
        ss : StateSpace
        T_s : float
            Sample period [s]
        n_sub : int
            RK4 substeps per period
        f_dist : float
            Disturbance frequency [Hz]
        """
        self.T_s = T_s
        self.n_sub = n_sub
        self.h = h = T_s / n_sub
        self.omega = omega = 2 * numpy.pi * f_dist
        A = ss.A
        n = A.shape[0]
        zero = numpy.zeros(n)

        Phi = _rk4_linear(A, numpy.eye(n), 0.0, 0.0, 0.0, h)
        Psi_u = _rk4_linear(A, zero, ss.B_u, ss.B_u, ss.B_u, h)
        Psi_0 = _rk4_linear(A, zero, ss.B_d, zero, zero, h)
        Psi_m = _rk4_linear(A, zero, zero, ss.B_d, zero, h)
        Psi_1 = _rk4_linear(A, zero, zero, zero, ss.B_d, h)

        F, G_u, G_s, G_c = numpy.eye(n), zero.copy(), zero.copy(), zero.copy()
        for j in range(n_sub):
            tau = j * h
            F = Phi @ F
            G_u = Phi @ G_u + Psi_u
            # sin(omega (t_k + tau)) = sin(omega t_k) cos(omega tau) + cos(omega t_k) sin(omega tau)
            G_s = Phi @ G_s + Psi_0 * numpy.cos(omega * tau) + Psi_m * numpy.cos(omega * (tau + h / 2)) + Psi_1 * numpy.cos(omega * (tau + h))
            G_c = Phi @ G_c + Psi_0 * numpy.sin(omega * tau) + Psi_m * numpy.sin(omega * (tau + h / 2)) + Psi_1 * numpy.sin(omega * (tau + h))
        self.F, self.G_u, self.G_s, self.G_c = F, G_u, G_s, G_c

    @property
    def spectral_radius(self):
        return float(numpy.max(numpy.abs(linalg.eigvals(self.F))))

    def advance(self, x, u_held, t0):
        return self.F @ x + self.G_u * u_held + self.G_s * numpy.sin(self.omega * t0) + self.G_c * numpy.cos(self.omega * t0)
