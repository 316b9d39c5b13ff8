import configparser
import itertools
import logging
import os

import numpy

from .. import __version__, utils
from ..beam.model import BeamParams
from ..control.filters import FilterSpec
from ..control.rcac import RcacConfig, build_target_model
from ..simulation.closed_loop import SimConfig

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s", datefmt="%Y-%m-%d %H:%M:%S")

CONFIGURATION_DIRECTORY = os.path.join(os.path.dirname(__file__), "configuration_files")

PRESETS = {
    "disp": "displacement.ini",
    "acclp": "acceleration_lowpass.ini",
    "accest": "acceleration_displacement_estimate.ini",
}
CASE_ALIASES = {
    "displacement": "disp",
    "accelerationlowpass": "acclp",
    "acclowpass": "acclp",
    "accelerationdisplacementestimate": "accest",
    "accdispest": "accest",
    "accdisplacementestimate": "accest",
}
CASE_LABELS = {"disp": "disp", "acclp": "acc-lp", "accest": "acc-est"}

SCHEMA = {
    "beam": ("L", "b", "h", "m", "E", "alpha", "beta", "n_b", "i_d", "i_y"),
    "controller": ("l_c", "p0", "R_u", "u_min", "u_max", "N", "d_f", "alpha_f", "f_f"),
    "filter": ("variant", "K_g", "omega_lp", "zeta_lp", "nu_hp"),
    "simulation": (
        "feedback",
        "i_u",
        "f_dist",
        "T_sim",
        "T_s",
        "t_end",
        "t_enable",
        "amplitude_window",
        "spectrum_window",
        "early_exit",
        "integrator",
        "refine_unstable",
    ),
    "sweep": ("case", "i_u", "f_dist", "cells", "workers"),
}

SIMULATION_DEFAULTS = {
    "T_sim": 1e-4,
    "T_s": 2.5e-3,
    "t_end": 30.0,
    "t_enable": 2.5,
    "amplitude_window": 0.5,
    "spectrum_window": 5.0,
    "early_exit": False,
    "integrator": "propagator",
    "refine_unstable": True,
}


def normalise_case(case):
    key = utils.remove_special_characters(str(case).lower())
    key = CASE_ALIASES.get(key, key)
    if key not in PRESETS:
        raise utils.ConfigurationError(f"Unknown case {case}. Available: {sorted(CASE_LABELS.values())}")
    return key


def preset_path(case):
    return os.path.join(CONFIGURATION_DIRECTORY, PRESETS[normalise_case(case)])


def _parser():
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = utils.custom_optionxform
    return parser


def read_settings(case=None, config_file=None, overrides=None):
    """
    Resolve the configuration from a bundled preset, a user INI file and explicit overrides, in that order.

    Parameters:
    ----------
    case : str, optional
        disp, acc-lp or acc-est
    config_file : str, optional
        Path to an INI file; keys may be written with hyphens or underscores
    overrides : dict, optional
        ``{section: {key: value}}``; ``None`` values are ignored

    Returns:
    --------
    Settings
    """
    if case is None and config_file is None:
        raise utils.ConfigurationError("Provide a case preset or a configuration file")
    parser = _parser()
    files = []
    if case is not None:
        files.append(preset_path(case))
    if config_file is not None:
        if not os.path.isfile(config_file):
            raise utils.ConfigurationError(f"Configuration file {config_file} does not exist")
        files.append(config_file)
    for path in files:
        logging.info(f"Reading configuration {path}")
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as error:
            raise utils.ConfigurationError(f"Could not parse {path}: {error}") from error

    values = {section: {} for section in SCHEMA}
    for section in parser.sections():
        if section not in SCHEMA:
            raise utils.ConfigurationError(f"Unknown section [{section}]. Available: {list(SCHEMA)}")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise utils.ConfigurationError(f"Unknown key {key} in section [{section}]. Available: {list(SCHEMA[section])}")
            values[section][key] = utils.parse_value(raw)

    for section, entries in (overrides or {}).items():
        if section not in SCHEMA:
            raise utils.ConfigurationError(f"Unknown section [{section}]")
        for key, value in entries.items():
            if key not in SCHEMA[section]:
                raise utils.ConfigurationError(f"Unknown key {key} in section [{section}]")
            if value is not None:
                values[section][key] = value

    if case is not None and "case" not in values["sweep"]:
        values["sweep"]["case"] = CASE_LABELS[normalise_case(case)]
    return Settings(values)


class Settings:
    def __init__(self, values):
        """
        Validated configuration sections with typed accessors for every domain object.
        """
        self.values = {section: dict(values.get(section, {})) for section in SCHEMA}
        for key, value in SIMULATION_DEFAULTS.items():
            self.values["simulation"].setdefault(key, value)

    def get(self, section, key, default=None):
        return self.values[section].get(key, default)

    def require(self, section, key):
        if key not in self.values[section]:
            raise utils.ConfigurationError(f"Missing key {key} in section [{section}]")
        return self.values[section][key]

    @property
    def case(self):
        return CASE_LABELS[normalise_case(self.get("sweep", "case", "disp"))]

    @property
    def T_s(self):
        return float(self.values["simulation"]["T_s"])

    def beam_params(self):
        entries = {key: value for key, value in self.values["beam"].items() if key not in ("i_d", "i_y")}
        return BeamParams(**entries)

    def filter_spec(self):
        return FilterSpec(
            variant=self.require("filter", "variant"),
            K_g=float(self.require("filter", "K_g")),
            T_s=self.T_s,
            omega_lp=self.get("filter", "omega_lp"),
            zeta_lp=self.get("filter", "zeta_lp"),
            nu_hp=self.get("filter", "nu_hp"),
        )

    def cell_parameters(self, f_dist, i_u):
        """(d_f, R_u) for a cell: the per-cell table first, then the controller defaults."""
        cells = self.get("sweep", "cells") or {}
        if (f_dist, i_u) in cells:
            d_f, R_u = cells[(f_dist, i_u)]
            return int(d_f), float(R_u)
        return int(self.require("controller", "d_f")), float(self.require("controller", "R_u"))

    def rcac_config(self, f_dist, d_f, R_u):
        f_f = self.get("controller", "f_f")
        target = build_target_model(
            N=int(self.require("controller", "N")),
            d_f=d_f,
            f_f=f_dist if f_f is None else float(f_f),
            alpha_f=float(self.require("controller", "alpha_f")),
            T_s=self.T_s,
        )
        return RcacConfig(
            l_c=int(self.require("controller", "l_c")),
            p0=float(self.require("controller", "p0")),
            R_u=R_u,
            u_min=float(self.require("controller", "u_min")),
            u_max=float(self.require("controller", "u_max")),
            target=target,
        )

    def sim_config(self, f_dist=None, i_u=None, d_f=None, R_u=None, open_loop=False):
        """
        One run of the configured experiment; unspecified cell values come from [simulation] and the cell table.
        """
        simulation = self.values["simulation"]
        f_dist = float(self.require("simulation", "f_dist") if f_dist is None else f_dist)
        i_u = int(self.require("simulation", "i_u") if i_u is None else i_u)
        default_d_f, default_R_u = self.cell_parameters(f_dist, i_u)
        d_f = default_d_f if d_f is None else int(d_f)
        R_u = default_R_u if R_u is None else float(R_u)
        return SimConfig(
            beam=self.beam_params(),
            i_u=i_u,
            i_d=int(self.require("beam", "i_d")),
            i_y=int(self.require("beam", "i_y")),
            feedback=self.require("simulation", "feedback"),
            f_dist=f_dist,
            filter=self.filter_spec(),
            controller=None if open_loop else self.rcac_config(f_dist, d_f, R_u),
            T_sim=float(simulation["T_sim"]),
            T_s=self.T_s,
            t_end=float(simulation["t_end"]),
            t_enable=float(simulation["t_enable"]),
            open_loop=open_loop,
            early_exit=bool(simulation["early_exit"]),
            integrator=simulation["integrator"],
            refine_unstable=bool(simulation["refine_unstable"]),
        )

    def sweep_cells(self):
        """Cross product of f_dist and i_u with the resolved (d_f, R_u) of every cell, ordered by (f_dist, i_u)."""
        f_dists = sorted(numpy.atleast_1d(self.require("sweep", "f_dist")).tolist())
        i_us = sorted(numpy.atleast_1d(self.require("sweep", "i_u")).tolist())
        product = set(itertools.product(f_dists, i_us))
        for key in (self.get("sweep", "cells") or {}):
            if tuple(key) not in product:
                raise utils.ConfigurationError(f"Cell {key} is not part of the sweep grid f_dist x i_u")
        return [(f_dist, i_u) + self.cell_parameters(f_dist, i_u) for f_dist, i_u in itertools.product(f_dists, i_us)]

    def write(self, path):
        """Write the resolved configuration as a re-loadable INI manifest."""
        parser = _parser()
        for section in SCHEMA:
            parser.add_section(section)
            for key in SCHEMA[section]:
                if key in self.values[section]:
                    value = self.values[section][key]
                    parser.set(section, key, value if isinstance(value, str) else repr(value))
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                f.write(f"; vibforge {__version__}\n")
                parser.write(f)
        except OSError as error:
            raise OSError(f"Could not write manifest {path}: {error}") from error
        return path
