import logging
import math
from dataclasses import dataclass, field

import numpy
import pandas

from .. import utils
from ..beam.model import Beam, BeamParams
from ..control.filters import FilterSpec, SignalConditioner
from ..control.rcac import RCAC, RcacConfig
from .integrator import PeriodPropagator, disturbance, integrate_control_period, stable_substep

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s", datefmt="%Y-%m-%d %H:%M:%S")

TRAJECTORY_COLUMNS = ["t", "y_disp", "y_acc", "u", "d", "z"]
INTEGRATORS = ("propagator", "substep")


@dataclass(frozen=True)
class SimConfig:
    """
    Everything needed for one open- or closed-loop run.

    Parameters:
    ----------
    beam : BeamParams
    i_u, i_d, i_y : int
        Actuator, disturbance and sensor elements (1-based)
    feedback : str
        displacement or acceleration
    f_dist : float
        Disturbance frequency [Hz]
    filter : FilterSpec
        Conditioning between e_k = -y_k and z_k
    controller : RcacConfig, optional
        Required unless ``open_loop``
    T_sim : float
        RK4 substep [s] (refined automatically when unstable)
    T_s : float
        Controller sample period [s]
    t_end : float
        Final time [s]
    t_enable : float
        Controller enable time [s]; ``numpy.inf`` never enables
    open_loop : bool
        Force u = 0 throughout
    early_exit : bool
        Stop once the displacement peak settles after enabling
    integrator : str
        propagator (composed per-period map) or substep (chained RK4 calls)
    refine_unstable : bool
        Halve T_sim until RK4 is stable on the model
    """

    beam: BeamParams = field(default_factory=BeamParams)
    i_u: int = 12
    i_d: int = 5
    i_y: int = 20
    feedback: str = "displacement"
    f_dist: float = 20.0
    filter: FilterSpec = field(default_factory=FilterSpec)
    controller: RcacConfig = None
    T_sim: float = 1e-4
    T_s: float = 2.5e-3
    t_end: float = 30.0
    t_enable: float = 2.5
    open_loop: bool = False
    early_exit: bool = False
    integrator: str = "propagator"
    refine_unstable: bool = True

    def __post_init__(self):
        feedback = utils.remove_special_characters(str(self.feedback).lower())
        feedback = {"disp": "displacement", "acc": "acceleration"}.get(feedback, feedback)
        if feedback not in ("displacement", "acceleration"):
            raise ValueError(f"Unknown feedback {self.feedback}. Available: displacement, acceleration")
        object.__setattr__(self, "feedback", feedback)
        integrator = utils.remove_special_characters(str(self.integrator).lower())
        if integrator not in INTEGRATORS:
            raise ValueError(f"Unknown integrator {self.integrator}. Available: {INTEGRATORS}")
        object.__setattr__(self, "integrator", integrator)
        if not self.T_sim > 0 or not self.T_s > 0:
            raise ValueError(f"T_sim and T_s must be positive, got {self.T_sim} and {self.T_s}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not self.open_loop and numpy.isfinite(self.t_enable) and not self.t_enable < self.t_end:
            raise ValueError(f"t_enable = {self.t_enable} must precede t_end = {self.t_end}")
        if not 0 < self.f_dist < 1 / (2 * self.T_s):
            raise ValueError(f"f_dist = {self.f_dist} Hz must lie between 0 and the Nyquist frequency {1 / (2 * self.T_s)} Hz")
        if not self.open_loop and self.controller is None:
            raise ValueError("A closed-loop run needs a controller configuration")
        if abs(self.filter.T_s - self.T_s) > 1e-12 * self.T_s:
            raise ValueError(f"Filter sample period {self.filter.T_s} differs from T_s = {self.T_s}")

    @property
    def n_ticks(self):
        return int(math.floor(self.t_end / self.T_s + 1e-9)) + 1

    @property
    def enable_tick(self):
        if self.open_loop or not numpy.isfinite(self.t_enable):
            return None
        return max(int(math.ceil(self.t_enable / self.T_s - 1e-9)), 0)


@dataclass
class SimRecord:
    """Sampled channels of one run, one row per controller tick."""

    t: numpy.ndarray
    y_disp: numpy.ndarray
    y_acc: numpy.ndarray
    u: numpy.ndarray
    d: numpy.ndarray
    z: numpy.ndarray
    theta: numpy.ndarray
    saturation_fraction: float = 0.0
    substep: float = None
    n_sub: int = None
    enable_tick: int = None
    converged_at: float = None

    def __len__(self):
        return len(self.t)

    def to_dataframe(self):
        return pandas.DataFrame({column: getattr(self, column) for column in TRAJECTORY_COLUMNS})


def write_trajectory(record, path):
    """Write ``t,y_disp,y_acc,u,d,z`` with round-trip float formatting."""
    try:
        record.to_dataframe().to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    except OSError as error:
        raise OSError(f"Could not write trajectory {path}: {error}") from error


def sample_output(om, x, u, d):
    """y = C x + D_u u + D_d d."""
    return float(om.C @ x + om.D_u * u + om.D_d * d)


def _settled(t, y_disp, tick, T_s, enable_tick):
    """Peak displacement changed by less than 0.5% between the last two 1 s windows."""
    per_second = int(round(1.0 / T_s))
    if enable_tick is None or tick - enable_tick < 2 * per_second or (tick - enable_tick) % per_second:
        return False
    last = numpy.max(numpy.abs(y_disp[tick - per_second + 1 : tick + 1]))
    previous = numpy.max(numpy.abs(y_disp[tick - 2 * per_second + 1 : tick - per_second + 1]))
    return previous > 0 and abs(last - previous) < 0.005 * previous


def run_simulation(cfg):
    """
    Sampled-data loop: sample y_k, filter e_k = -y_k into z_k, update the controller, hold u_k and integrate one period.

    Outputs are sampled before the new control is applied, so acceleration feedthrough uses the held u_{k-1}.
    Two runs of the same configuration give bit-identical records.
    """
    beam = Beam(cfg.beam, i_u=cfg.i_u, i_d=cfg.i_d, i_y=cfg.i_y)
    ss = beam.state_space
    feedback_map = beam.output(cfg.feedback)
    h, n_sub = stable_substep(ss.A, cfg.T_sim, cfg.T_s, refine=cfg.refine_unstable)
    propagator = PeriodPropagator(ss, cfg.T_s, n_sub, cfg.f_dist) if cfg.integrator == "propagator" else None

    conditioner = SignalConditioner(cfg.filter)
    controller = None if cfg.open_loop else RCAC(cfg.controller)
    enable_tick = cfg.enable_tick
    n_ticks = cfg.n_ticks
    l_theta = controller.config.l_theta if controller else 0

    channels = {name: numpy.zeros(n_ticks) for name in TRAJECTORY_COLUMNS}
    theta = numpy.zeros((n_ticks, l_theta))
    x = numpy.zeros(ss.n_states)
    u_held = 0.0
    converged_at = None

    for k in range(n_ticks):
        t_k = k * cfg.T_s
        d_k = disturbance(t_k, cfg.f_dist)
        y_disp = sample_output(beam.displacement, x, u_held, d_k)
        y_acc = sample_output(beam.acceleration, x, u_held, d_k)
        y_k = y_disp if feedback_map.kind == "displacement" else y_acc
        z_k = conditioner.apply(-y_k)

        if controller is None:
            u_k = 0.0
        elif enable_tick is not None and k >= enable_tick:
            if not controller.enabled:
                logging.info(f"Enabling controller at tick {k} (t = {t_k:.4f} s)")
                controller.enable()
            u_k = controller.step(z_k)
        else:
            u_k = controller.observe(z_k)

        for name, value in zip(TRAJECTORY_COLUMNS, (t_k, y_disp, y_acc, u_k, d_k, z_k)):
            channels[name][k] = value
        if controller is not None:
            theta[k] = controller.theta
        if not (numpy.isfinite(y_k) and numpy.isfinite(z_k) and numpy.isfinite(u_k)):
            raise utils.SimulationError("Non-finite signal", tick=k, time=t_k)

        if cfg.early_exit and _settled(channels["t"], channels["y_disp"], k, cfg.T_s, enable_tick):
            converged_at = t_k
            logging.info(f"Displacement peak settled at t = {t_k:.3f} s, stopping early")
            n_ticks = k + 1
            break
        if k == n_ticks - 1:
            break

        if propagator is not None:
            x = propagator.advance(x, u_k, t_k)
        else:
            x = integrate_control_period(ss, x, u_k, t_k, cfg.f_dist, n_sub, h)
        if not numpy.all(numpy.isfinite(x)):
            raise utils.SimulationError("Non-finite state", tick=k, time=t_k)
        u_held = u_k

    return SimRecord(
        **{name: values[:n_ticks] for name, values in channels.items()},
        theta=theta[:n_ticks],
        saturation_fraction=controller.saturation_fraction if controller else 0.0,
        substep=h,
        n_sub=n_sub,
        enable_tick=enable_tick,
        converged_at=converged_at,
    )
