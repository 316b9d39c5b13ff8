import logging
from dataclasses import dataclass

import numpy
from scipy import linalg

from .filters import DiscreteTransferFunction

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s", datefmt="%Y-%m-%d %H:%M:%S")

SYMMETRY_TOLERANCE = 1e-10
# control weights below this fraction of the largest are treated as zero
WEIGHT_CUTOFF = 1e-14


@dataclass(frozen=True)
class TargetModel:
    """
    G_f(q) = N / (q^d_f (q^2 - 2 alpha_f cos(omega_f T_s) q + alpha_f^2)).

    ``denominator`` holds the coefficients of the degree d_f + 2 polynomial in descending powers of q.
    """

    N: int
    d_f: int
    f_f: float
    alpha_f: float
    T_s: float
    a1: float
    a2: float
    denominator: numpy.ndarray
    numerator: numpy.ndarray

    @property
    def poles(self):
        return numpy.roots(self.denominator)

    @property
    def relative_degree(self):
        return self.d_f + 2

    def phi_filter(self):
        """Realisation applied to the current sample (phi_k -> phi_f,k)."""
        return DiscreteTransferFunction(numpy.r_[numpy.zeros(self.d_f + 2), self.N], [1.0, self.a1, self.a2])

    def lagged_filter(self):
        """
        Realisation fed with the previous sample: y_k = G_f x_k computed from x_{k-1}.

        Valid because G_f has relative degree of at least two.
        """
        return DiscreteTransferFunction(numpy.r_[numpy.zeros(self.d_f + 1), self.N], [1.0, self.a1, self.a2])

    def impulse_response(self, n):
        impulse = numpy.zeros(n)
        impulse[0] = 1.0
        return self.phi_filter().filter(impulse)

    def frequency_response(self, omega):
        return self.phi_filter().frequency_response(omega, self.T_s)


def build_target_model(N, d_f, f_f, alpha_f, T_s):
    """
    Target model encoding the sign of the leading Markov parameter, the delay and the disturbance frequency.

    Parameters:
    ----------
    N : int
        +1 or -1
    d_f : int
        Extra delay, at least 0
    f_f : float
        Disturbance frequency placed in the denominator [Hz]
    alpha_f : float
        Pole radius in (0, 1]
    T_s : float
        Sample period [s]
    """
    if N not in (-1, 1):
        raise ValueError(f"N must be +1 or -1, got {N}")
    if int(d_f) != d_f or d_f < 0:
        raise ValueError(f"d_f must be a non-negative integer, got {d_f}")
    if not 0 < alpha_f <= 1:
        raise ValueError(f"alpha_f must lie in (0, 1], got {alpha_f}")
    if not T_s > 0:
        raise ValueError(f"T_s must be positive, got {T_s}")
    if not 0 <= f_f < 1 / (2 * T_s):
        raise ValueError(f"f_f = {f_f} Hz is not below the Nyquist frequency {1 / (2 * T_s)} Hz")
    d_f = int(d_f)
    a1 = -2 * alpha_f * numpy.cos(2 * numpy.pi * f_f * T_s)
    a2 = alpha_f**2
    denominator = numpy.r_[1.0, a1, a2, numpy.zeros(d_f)]
    return TargetModel(
        N=int(N), d_f=d_f, f_f=float(f_f), alpha_f=float(alpha_f), T_s=float(T_s), a1=float(a1), a2=float(a2), denominator=denominator, numerator=numpy.array([float(N)])
    )


@dataclass(frozen=True)
class RcacConfig:
    """
    Hyperparameters of the retrospective cost adaptive controller.

    Parameters:
    ----------
    l_c : int
        Controller window length
    p0 : float
        Initial covariance scale, P_0 = p0 I
    R_u : float or numpy.ndarray
        Control weighting, positive semidefinite
    u_min, u_max : float
        Saturation bounds
    target : TargetModel
    l_u, l_z : int
        Input and performance dimensions
    """

    l_c: int
    p0: float
    R_u: object
    u_min: float
    u_max: float
    target: TargetModel
    l_u: int = 1
    l_z: int = 1

    def __post_init__(self):
        if int(self.l_c) != self.l_c or self.l_c < 1:
            raise ValueError(f"l_c must be a positive integer, got {self.l_c}")
        if not self.p0 > 0:
            raise ValueError(f"p0 must be positive, got {self.p0}")
        if not self.u_min < self.u_max:
            raise ValueError(f"u_min = {self.u_min} must be below u_max = {self.u_max}")
        if self.l_z != self.l_u:
            raise ValueError(f"The scalar target model needs l_z == l_u, got l_z = {self.l_z}, l_u = {self.l_u}")
        R_u = self.weighting
        if numpy.any(linalg.eigvalsh(R_u) < -1e-12):
            raise ValueError(f"R_u must be positive semidefinite, got {self.R_u}")

    @property
    def l_theta(self):
        return self.l_c * self.l_u * (self.l_u + self.l_z)

    @property
    def weighting(self):
        R_u = numpy.atleast_2d(numpy.asarray(self.R_u, dtype=float))
        if R_u.shape == (1, 1):
            R_u = R_u[0, 0] * numpy.eye(self.l_u)
        if R_u.shape != (self.l_u, self.l_u):
            raise ValueError(f"R_u must be {self.l_u}x{self.l_u}, got shape {R_u.shape}")
        return R_u


def make_regressor(u_hist, z_hist, l_u=1):
    """
    Regressor [u_{k-1} ... u_{k-l_c}, z_{k-1} ... z_{k-l_c}] kron I_{l_u}.

    ``u_hist`` and ``z_hist`` hold the newest sample first, with shapes (l_c, l_u) and (l_c, l_z) (1-D when SISO).
    """
    row = numpy.concatenate([numpy.ravel(u_hist), numpy.ravel(z_hist)])
    return numpy.kron(row, numpy.eye(l_u))


def saturate(u_c, u_min, u_max):
    """Clamp the commanded control to [u_min, u_max]."""
    if not u_min < u_max:
        raise ValueError(f"u_min = {u_min} must be below u_max = {u_max}")
    return numpy.clip(u_c, u_min, u_max)


def rls_update(theta, P, phi_f, phi, u_f, z, R_u):
    """
    One recursive least-squares step on the retrospective cost.

    Parameters:
    ----------
    theta : numpy.ndarray
        Coefficients, shape (l_theta,)
    P : numpy.ndarray
        Covariance, shape (l_theta, l_theta)
    phi_f, phi : numpy.ndarray
        Filtered and raw regressors, shapes (l_z, l_theta) and (l_u, l_theta)
    u_f, z : float or numpy.ndarray
        Filtered control and measured performance
    R_u : float or numpy.ndarray
        Control weighting

    Returns:
    --------
    (theta, P)
        theta minimises the accumulated retrospective cost plus the initial-covariance regularisation

    The weighted rows are rotated onto the eigenvectors of R_u and rows with zero weight are dropped, so the
    gain K = P Phi^T (W^-1 + Phi P Phi^T)^-1 only ever inverts a positive definite matrix. The covariance is
    propagated in Joseph form, which keeps it positive semidefinite when R_u is very large.
    """
    phi_f = numpy.atleast_2d(phi_f)
    phi = numpy.atleast_2d(phi)
    l_u = phi.shape[0]
    R_u = numpy.atleast_2d(numpy.asarray(R_u, dtype=float))
    if R_u.shape == (1, 1) and l_u > 1:
        R_u = R_u[0, 0] * numpy.eye(l_u)
    weights, directions = linalg.eigh(R_u)
    keep = weights > WEIGHT_CUTOFF * max(weights.max(), 1.0)
    weights, directions = weights[keep], directions[:, keep]

    Phi = numpy.vstack([phi_f, directions.T @ phi])
    residual = numpy.concatenate([numpy.atleast_1d(z) - numpy.atleast_1d(u_f) + phi_f @ theta, directions.T @ (phi @ theta)])
    noise = numpy.concatenate([numpy.ones(phi_f.shape[0]), 1 / weights])

    Phi_P = Phi @ P
    innovation = numpy.diag(noise) + Phi_P @ Phi.T
    try:
        factor = linalg.cho_factor((innovation + innovation.T) / 2)
    except linalg.LinAlgError as error:
        raise ValueError(f"singular inner matrix in the covariance update: {error}") from error
    K = linalg.cho_solve(factor, Phi_P).T

    theta_next = theta - K @ residual
    reduction = numpy.eye(P.shape[0]) - K @ Phi
    P_next = reduction @ P @ reduction.T + (K * noise) @ K.T
    asymmetry = numpy.linalg.norm(P_next - P_next.T) / max(numpy.linalg.norm(P_next), numpy.finfo(float).tiny)
    if asymmetry > SYMMETRY_TOLERANCE:
        logging.warning(f"Covariance asymmetry {asymmetry:.3e} above {SYMMETRY_TOLERANCE:.0e}, symmetrising")
    P_next = (P_next + P_next.T) / 2
    return theta_next, P_next


class RCAC:
    def __init__(self, config):
        """
        Retrospective cost adaptive controller with theta_0 = 0 and P_0 = p0 I.

        Parameters:
        ----------
        config : RcacConfig

        The controller is disabled until ``enable`` is called. While disabled, ``observe`` keeps the
        performance history warm and records zero control.
        """
        self.config = config
        self.target = config.target
        self.R_u = config.weighting
        self.theta = numpy.zeros(config.l_theta)
        self.P = config.p0 * numpy.eye(config.l_theta)
        self.u_hist = numpy.zeros((config.l_c, config.l_u))
        self.z_hist = numpy.zeros((config.l_c, config.l_z))
        self.gf_phi = self.target.phi_filter()
        self.gf_u = self.target.lagged_filter()
        self.enabled = False
        self.adapt = True
        self.k = 0
        self.n_enabled = 0
        self.n_saturated = 0

    @property
    def saturation_fraction(self):
        return self.n_saturated / self.n_enabled if self.n_enabled else 0.0

    def enable(self):
        """Start adapting; the target-model filters start from rest."""
        self.enabled = True
        self.gf_phi.reset()
        self.gf_u.reset()

    def freeze(self, theta=None):
        """Stop adapting and optionally impose the coefficients."""
        self.adapt = False
        if theta is not None:
            theta = numpy.asarray(theta, dtype=float)
            if theta.shape != self.theta.shape:
                raise ValueError(f"theta must have shape {self.theta.shape}, got {theta.shape}")
            self.theta = theta.copy()

    def regressor(self):
        return make_regressor(self.u_hist, self.z_hist, self.config.l_u)

    def _push(self, u_k, z_k):
        self.u_hist = numpy.roll(self.u_hist, 1, axis=0)
        self.u_hist[0] = u_k
        self.z_hist = numpy.roll(self.z_hist, 1, axis=0)
        self.z_hist[0] = z_k
        self.k += 1

    def observe(self, z_k):
        """Disabled tick: u = 0, histories advance."""
        self._push(0.0, z_k)
        return 0.0

    def step(self, z_k):
        """
        Enabled tick: form phi_k, filter, update theta, and return the saturated control u_k.
        """
        if not self.enabled:
            raise RuntimeError("Controller step requested before enable()")
        phi = self.regressor()
        phi_f = self.gf_phi.step(phi)
        u_f = self.gf_u.step(self.u_hist[0])
        if self.adapt:
            self.theta, self.P = rls_update(self.theta, self.P, phi_f, phi, u_f, z_k, self.R_u)
        u_c = phi @ self.theta
        u_k = saturate(u_c, self.config.u_min, self.config.u_max)
        self.n_enabled += 1
        if numpy.any(u_k != u_c):
            self.n_saturated += 1
        self._push(u_k, z_k)
        return float(u_k[0]) if self.config.l_u == 1 else u_k


def controller_step(controller, z_k):
    """Functional form of ``RCAC.step``: returns ``(controller, u_k)``."""
    u_k = controller.step(z_k)
    return controller, u_k
