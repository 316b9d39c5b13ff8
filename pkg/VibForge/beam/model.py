import logging
from dataclasses import dataclass, field

import numpy
import pandas
from scipy import linalg

from .. import utils

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s", datefmt="%Y-%m-%d %H:%M:%S")

OUTPUT_KINDS = ("displacement", "acceleration")


@dataclass(frozen=True)
class BeamParams:
    """
    Physical description of a clamped-free beam split into ``n_b`` rigid elements.

    Parameters:
    ----------
    L : float
        Beam length [m]
    b : float
        Cross-section width [m]
    h : float
        Cross-section height [m]
    m : float
        Total mass [kg]
    E : float
        Young's modulus [N/m^2]
    alpha : float
        Rayleigh mass coefficient [1/s]
    beta : float
        Rayleigh stiffness coefficient [s]
    n_b : int
        Number of elements (at least 5)
    """

    L: float = 0.5
    b: float = 0.05
    h: float = 0.001
    m: float = 0.07
    E: float = 69e9
    alpha: float = 1.5
    beta: float = 2.5e-4
    n_b: int = 20

    def __post_init__(self):
        for name in ("L", "b", "h", "m", "E"):
            value = getattr(self, name)
            if not numpy.isfinite(value) or value <= 0:
                raise ValueError(f"Beam parameter {name} must be positive, got {value}")
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if not numpy.isfinite(value) or value < 0:
                raise ValueError(f"Rayleigh coefficient {name} must be non-negative, got {value}")
        if int(self.n_b) != self.n_b:
            raise TypeError(f"n_b must be an integer, got {self.n_b}")
        if self.n_b < 5:
            raise ValueError(f"n_b must be at least 5, got {self.n_b}")


@dataclass(frozen=True)
class LumpedConstants:
    dL: float
    dm: float
    K_phi: float
    gamma1: float
    gamma2: float


@dataclass(frozen=True)
class SecondOrderModel:
    """M w'' + C_R w' + K w = f on the ``n_b`` element displacements."""

    M: numpy.ndarray
    K: numpy.ndarray
    C_R: numpy.ndarray

    @property
    def n_b(self):
        return self.M.shape[0]


@dataclass(frozen=True)
class StateSpace:
    """
    x' = A x + B_u u + B_d d with x = [w, w'].

    ``i_u`` and ``i_d`` are 1-based element indices.
    """

    A: numpy.ndarray
    B_u: numpy.ndarray
    B_d: numpy.ndarray
    i_u: int
    i_d: int

    @property
    def n_states(self):
        return self.A.shape[0]


@dataclass(frozen=True)
class OutputMap:
    """y = C x + D_u u + D_d d at element ``i_y`` (1-based)."""

    kind: str
    C: numpy.ndarray
    D_u: float
    D_d: float
    i_y: int


@dataclass(frozen=True)
class ModalSummary:
    """
    Natural frequencies [Hz] and damping ratios of the eigenvalues of A, sorted by frequency.

    Overdamped modes show up as real eigenvalues; each is listed on its own with damping ratio 1.
    """

    frequency: numpy.ndarray
    damping_ratio: numpy.ndarray
    overdamped: numpy.ndarray = field(default=None)

    @property
    def minimum_damping_ratio(self):
        return float(numpy.min(self.damping_ratio))

    def to_dataframe(self):
        return pandas.DataFrame(
            {
                "frequency": self.frequency,
                "damping_ratio": self.damping_ratio,
                "overdamped": self.overdamped if self.overdamped is not None else numpy.zeros(len(self.frequency), dtype=bool),
            }
        )


def _check_index(name, index, n_b):
    if int(index) != index:
        raise TypeError(f"{name} must be an integer element index, got {index}")
    if not 1 <= index <= n_b:
        raise ValueError(f"{name} = {index} outside the element range 1..{n_b}")
    return int(index)


def derive_constants(p):
    """
    Per-element constants of the lumped model.

    Parameters:
    ----------
    p : BeamParams

    Returns:
    --------
    LumpedConstants
        element length, element mass, rotational stiffness E b h^3 / (4 dL) and the two effective inertia coefficients
    """
    dL = p.L / p.n_b
    dm = p.m / p.n_b
    K_phi = p.E * p.b * p.h**3 / (4 * dL)
    aspect = 1 + (p.h / dL) ** 2
    gamma1 = dm / 2 * (1 + aspect / 3)
    gamma2 = dm / 4 * (1 - aspect / 3)
    if not gamma1 > abs(2 * gamma2):
        raise ValueError(f"Element aspect ratio h/dL = {p.h / dL} gives an indefinite mass matrix")
    return LumpedConstants(dL=dL, dm=dm, K_phi=K_phi, gamma1=gamma1, gamma2=gamma2)


def stiffness_stencil(n_b):
    """Integer stencil of the clamped-free stiffness matrix, before scaling by K_phi / dL^2."""
    if n_b < 5:
        raise ValueError(f"n_b must be at least 5, got {n_b}")
    S = 6 * numpy.eye(n_b) - 4 * numpy.eye(n_b, k=1) - 4 * numpy.eye(n_b, k=-1) + numpy.eye(n_b, k=2) + numpy.eye(n_b, k=-2)
    # free end
    S[n_b - 2, n_b - 2] = 5
    S[n_b - 2, n_b - 1] = S[n_b - 1, n_b - 2] = -2
    S[n_b - 1, n_b - 1] = 1
    return S


def assemble_second_order(c, p):
    """
    Assemble the mass, stiffness and Rayleigh damping matrices.

    Parameters:
    ----------
    c : LumpedConstants
    p : BeamParams

    Returns:
    --------
    SecondOrderModel
    """
    n_b = p.n_b
    if n_b < 5:
        raise ValueError(f"n_b must be at least 5, got {n_b}")
    M = c.gamma1 * numpy.eye(n_b) + c.gamma2 * (numpy.eye(n_b, k=1) + numpy.eye(n_b, k=-1))
    M[n_b - 1, n_b - 1] = c.gamma1 / 2
    K = (c.K_phi / c.dL**2) * stiffness_stencil(n_b)
    C_R = p.alpha * M + p.beta * K
    return SecondOrderModel(M=M, K=K, C_R=C_R)


def build_state_space(s, i_u, i_d):
    """
    First-order form of the second-order model with force inputs at elements ``i_u`` and ``i_d``.

    M^-1 is applied through a Cholesky factorization of M; the inverse is never stored.
    """
    n_b = s.n_b
    i_u = _check_index("i_u", i_u, n_b)
    i_d = _check_index("i_d", i_d, n_b)
    try:
        factor = linalg.cho_factor(s.M)
    except linalg.LinAlgError as error:
        raise ValueError(f"Mass matrix is not positive definite: {error}") from error

    E = numpy.zeros((n_b, 2))
    E[i_u - 1, 0] = 1.0
    E[i_d - 1, 1] = 1.0
    rhs = numpy.hstack([s.K, s.C_R, E])
    solved = linalg.cho_solve(factor, rhs)
    Minv_K, Minv_C, Minv_E = solved[:, :n_b], solved[:, n_b : 2 * n_b], solved[:, 2 * n_b :]

    residual = numpy.linalg.norm(s.M @ Minv_E - E, axis=0)
    if numpy.any(residual > 1e-10):
        raise ValueError(f"Mass matrix solve residual {residual.max():.3e} exceeds 1e-10")

    A = numpy.block([[numpy.zeros((n_b, n_b)), numpy.eye(n_b)], [-Minv_K, -Minv_C]])
    B_u = numpy.concatenate([numpy.zeros(n_b), Minv_E[:, 0]])
    B_d = numpy.concatenate([numpy.zeros(n_b), Minv_E[:, 1]])
    return StateSpace(A=A, B_u=B_u, B_d=B_d, i_u=i_u, i_d=i_d)


def output_map(s, ss, i_y, kind):
    """
    Displacement or acceleration measurement at element ``i_y``.

    The acceleration row is the ``(n_b + i_y)``-th row of the state equation, so it carries feedthrough from u and d.
    """
    n_b = s.n_b
    i_y = _check_index("i_y", i_y, n_b)
    kind = utils.remove_special_characters(str(kind).lower())
    if kind in ("displacement", "disp"):
        C = numpy.zeros(2 * n_b)
        C[i_y - 1] = 1.0
        return OutputMap(kind="displacement", C=C, D_u=0.0, D_d=0.0, i_y=i_y)
    if kind in ("acceleration", "acc"):
        row = n_b + i_y - 1
        return OutputMap(kind="acceleration", C=ss.A[row].copy(), D_u=float(ss.B_u[row]), D_d=float(ss.B_d[row]), i_y=i_y)
    raise ValueError(f"Unknown output kind {kind}. Available: {OUTPUT_KINDS}")


def modal_summary(ss, imaginary_tolerance=1e-9):
    """
    Frequencies and damping ratios from the eigenvalues of A.

    Complex pairs give one entry with frequency |lambda| / 2 pi and damping ratio -Re(lambda) / |lambda|.
    Real eigenvalues (overdamped modes) are reported individually with damping ratio 1.
    """
    A = numpy.asarray(ss.A if hasattr(ss, "A") else ss)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 2:
        raise ValueError(f"State matrix must be square with even dimension, got shape {A.shape}")
    eigenvalues = linalg.eigvals(A)
    magnitude = numpy.abs(eigenvalues)
    real = numpy.abs(eigenvalues.imag) <= imaginary_tolerance * numpy.maximum(magnitude, 1.0)
    upper = (eigenvalues.imag > 0) & ~real

    frequency = numpy.concatenate([magnitude[upper], magnitude[real]]) / (2 * numpy.pi)
    damping = numpy.concatenate([-eigenvalues[upper].real / magnitude[upper], numpy.ones(real.sum())])
    overdamped = numpy.concatenate([numpy.zeros(upper.sum(), dtype=bool), numpy.ones(real.sum(), dtype=bool)])
    order = numpy.argsort(frequency, kind="stable")
    return ModalSummary(frequency=frequency[order], damping_ratio=damping[order], overdamped=overdamped[order])


def undamped_frequencies(s):
    """Natural angular frequencies [rad/s] of the generalized problem K v = omega^2 M v."""
    return numpy.sqrt(linalg.eigh(s.K, s.M, eigvals_only=True))


def modal_damping(p, omega):
    """Rayleigh damping ratio (alpha / omega + beta omega) / 2."""
    omega = numpy.asarray(omega, dtype=float)
    return (p.alpha / omega + p.beta * omega) / 2


def rayleigh_from_damping_ratios(zeta1, zeta2, omega1, omega2):
    """
    Rayleigh coefficients that give damping ratios ``zeta1`` and ``zeta2`` at angular frequencies ``omega1`` and ``omega2``.

    Returns:
    --------
    (alpha, beta)
    """
    if omega1 <= 0 or omega2 <= 0 or omega1 == omega2:
        raise ValueError(f"Need two distinct positive frequencies, got {omega1} and {omega2}")
    system = 0.5 * numpy.array([[1 / omega1, omega1], [1 / omega2, omega2]])
    alpha, beta = numpy.linalg.solve(system, [zeta1, zeta2])
    return float(alpha), float(beta)


def mechanical_energy(s, x):
    """Kinetic plus strain energy of state ``x = [w, w']``."""
    n_b = s.n_b
    w, w_dot = x[:n_b], x[n_b:]
    return 0.5 * w_dot @ s.M @ w_dot + 0.5 * w @ s.K @ w


def static_deflection(s, i_f, force=1.0):
    """Displacements under a static point force at element ``i_f``."""
    i_f = _check_index("i_f", i_f, s.n_b)
    load = numpy.zeros(s.n_b)
    load[i_f - 1] = force
    return linalg.solve(s.K, load, assume_a="pos")


class Beam:
    def __init__(self, params=None, i_u=12, i_d=5, i_y=20):
        """
        Lumped cantilever with its actuator, disturbance and sensor locations.

        Parameters:
        ----------
        params : BeamParams, optional
            Physical parameters [Default: aluminium strip, 0.5 m x 50 mm x 1 mm, 20 elements]
        i_u : int
            Element where the control force acts
        i_d : int
            Element where the disturbance force acts
        i_y : int
            Sensed element
        """
        self.params = params if params is not None else BeamParams()
        self.constants = derive_constants(self.params)
        self.model = assemble_second_order(self.constants, self.params)
        self.state_space = build_state_space(self.model, i_u, i_d)
        self.displacement = output_map(self.model, self.state_space, i_y, "displacement")
        self.acceleration = output_map(self.model, self.state_space, i_y, "acceleration")

    def output(self, kind):
        kind = utils.remove_special_characters(str(kind).lower())
        if kind in ("displacement", "disp"):
            return self.displacement
        if kind in ("acceleration", "acc"):
            return self.acceleration
        raise ValueError(f"Unknown output kind {kind}. Available: {OUTPUT_KINDS}")

    def modal_summary(self):
        summary = modal_summary(self.state_space)
        logging.info(f"{len(summary.frequency)} modes, first {summary.frequency[0]:.3f} Hz, minimum damping ratio {summary.minimum_damping_ratio:.4f}")
        return summary
