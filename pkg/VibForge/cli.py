import argparse
import logging
import os

import pandas

from . import __version__, utils
from .beam.model import assemble_second_order, build_state_space, derive_constants, modal_summary
from .experiments.config import read_settings
from .experiments.metrics import magnitude_spectrum
from .experiments.sweep import SweepSpec, compare_cases, emit_outputs, run_sweep, write_comparison
from .simulation.closed_loop import run_simulation, write_trajectory

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s", datefmt="%Y-%m-%d %H:%M:%S")


def _parser():
    parser = argparse.ArgumentParser(prog="vibforge", description="Adaptive vibration suppression of a lumped cantilever beam")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="Log debug messages")
    verbosity.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Run one open-loop/closed-loop pair")
    simulate.add_argument("--config", help="INI file layered on top of the case preset")
    simulate.add_argument("--case", default="disp", help="Preset: disp, acc-lp or acc-est [Default: disp]")
    simulate.add_argument("--iu", type=int, help="Actuator element")
    simulate.add_argument("--fdist", type=float, help="Disturbance frequency [Hz]")
    simulate.add_argument("--df", type=int, help="Target model delay d_f")
    simulate.add_argument("--ru", type=float, help="Control weighting R_u")
    simulate.add_argument("--t-end", type=float, help="Final time [s]")
    simulate.add_argument("--out", default="vibforge_output", help="Output directory")
    simulate.add_argument("--open-loop", action="store_true", help="Only run the uncontrolled beam")

    sweep = commands.add_parser("sweep", help="Run every (f_dist, i_u) cell of a case")
    sweep.add_argument("--config", help="INI file layered on top of the case preset")
    sweep.add_argument("--case", default="disp", help="Preset: disp, acc-lp or acc-est [Default: disp]")
    sweep.add_argument("--t-end", type=float, help="Final time [s]")
    sweep.add_argument("--out", default="vibforge_output", help="Output directory")
    sweep.add_argument("--workers", type=int, help="Parallel processes")

    compare = commands.add_parser("compare", help="Tabulate attenuation across feedback cases")
    compare.add_argument("--results", nargs="+", help="results.csv files of earlier sweeps; skips running the cases")
    compare.add_argument("--cases", nargs="+", default=["disp", "acc-lp", "acc-est"], help="Presets to sweep [Default: disp acc-lp acc-est]")
    compare.add_argument("--config", help="INI file layered on top of every case preset")
    compare.add_argument("--t-end", type=float, help="Final time [s]")
    compare.add_argument("--out", default="vibforge_output", help="Output directory")
    compare.add_argument("--workers", type=int, help="Parallel processes")

    modal = commands.add_parser("modal", help="Print natural frequencies and damping ratios")
    modal.add_argument("--config", help="INI file layered on top of the case preset")
    modal.add_argument("--case", default="disp", help="Preset: disp, acc-lp or acc-est [Default: disp]")
    modal.add_argument("--n-b", type=int, help="Number of elements")

    commands.add_parser("version", help="Print the package version")
    return parser


def simulate(args):
    overrides = {"simulation": {"i_u": args.iu, "f_dist": args.fdist, "t_end": args.t_end}}
    settings = read_settings(args.case, args.config, overrides)
    if args.open_loop:
        record = run_simulation(settings.sim_config(open_loop=True))
        os.makedirs(args.out, exist_ok=True)
        write_trajectory(record, os.path.join(args.out, "trajectory_open_loop.csv"))
        window = min(float(settings.get("simulation", "spectrum_window")), record.t[-1])
        spectrum = {"frequency": None}
        for channel in ("y_disp", "y_acc"):
            spectrum["frequency"], spectrum[channel] = magnitude_spectrum(getattr(record, channel), settings.T_s, window)
        pandas.DataFrame(spectrum).to_csv(os.path.join(args.out, "spectrum_open_loop.csv"), index=False, lineterminator="\n", encoding="utf-8")
        settings.write(os.path.join(args.out, "manifest.ini"))
        logging.info(f"Open-loop run written to {args.out}")
        return 0

    config = settings.sim_config(d_f=args.df, R_u=args.ru)
    d_f, R_u = config.controller.target.d_f, float(config.controller.R_u)
    spec = SweepSpec(settings=settings, cells=[(config.f_dist, config.i_u, d_f, R_u)], workers=1)
    result = run_sweep(spec)
    emit_outputs(result, args.out, settings)
    print(result.table.to_string(index=False))
    return 0 if result.table["status"].str.startswith("ok").all() else 1


def sweep(args):
    overrides = {"simulation": {"t_end": args.t_end}, "sweep": {"workers": args.workers}}
    settings = read_settings(args.case, args.config, overrides)
    result = run_sweep(SweepSpec.from_settings(settings))
    emit_outputs(result, args.out, settings)
    print(result.table.to_string(index=False))
    return 0 if result.table["status"].str.startswith("ok").all() else 1


def compare(args):
    if args.results:
        tables = [pandas.read_csv(path) for path in args.results]
    else:
        tables = []
        for case in args.cases:
            overrides = {"simulation": {"t_end": args.t_end}, "sweep": {"workers": args.workers}}
            settings = read_settings(case, args.config, overrides)
            result = run_sweep(SweepSpec.from_settings(settings))
            emit_outputs(result, os.path.join(args.out, case), settings)
            tables.append(result.table)
    table = compare_cases(tables)
    write_comparison(table, args.out)
    print(table.to_string(index=False))
    return 0 if table["attenuation_db"].notna().all() else 1


def modal(args):
    settings = read_settings(args.case, args.config, {"beam": {"n_b": args.n_b}})
    params = settings.beam_params()
    model = assemble_second_order(derive_constants(params), params)
    # A does not depend on where the forces act
    summary = modal_summary(build_state_space(model, params.n_b, params.n_b))
    print(summary.to_dataframe().to_string(index=False))
    print(f"minimum damping ratio: {summary.minimum_damping_ratio:.6f}")
    return 0


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)

    if args.command == "version":
        print(f"vibforge {__version__}")
        return 0
    try:
        return {"simulate": simulate, "sweep": sweep, "compare": compare, "modal": modal}[args.command](args)
    except (utils.ConfigurationError, utils.SimulationError, ValueError) as error:
        logging.error(str(error))
        return 2
