import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy
import pandas
from rich.progress import track

from .. import utils
from ..simulation.closed_loop import run_simulation, write_trajectory
from .metrics import Metric, spectrum_table, steady_state_amplitude

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s", datefmt="%Y-%m-%d %H:%M:%S")

RESULT_COLUMNS = ["case", "f_dist", "i_u", "d_f", "R_u", "y_ol", "y_cl", "attenuation_db", "saturation_fraction", "status"]


@dataclass
class SweepSpec:
    """
    Grid of (f_dist, i_u) cells sharing one configured plant, filter and controller.

    ``cells`` lists (f_dist, i_u, d_f, R_u) in table order.
    """

    settings: object
    cells: list = field(default_factory=list)
    workers: int = 1

    @classmethod
    def from_settings(cls, settings, workers=None):
        workers = workers if workers is not None else settings.get("sweep", "workers", 1)
        return cls(settings=settings, cells=settings.sweep_cells(), workers=int(workers))

    @property
    def case(self):
        return self.settings.case

    @property
    def f_dists(self):
        return sorted({cell[0] for cell in self.cells})


@dataclass
class SweepResult:
    table: pandas.DataFrame
    open_loop: dict
    closed_loop: dict


def _run_task(task):
    key, config = task
    try:
        return key, run_simulation(config), None
    except Exception as error:
        return key, None, f"{type(error).__name__}: {error}"


def _execute(tasks, workers):
    results = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(_run_task, task) for task in tasks]
            for future in track(as_completed(futures), total=len(futures), description="Running sweep cells"):
                key, record, error = future.result()
                results[key] = (record, error)
    else:
        for task in track(tasks, description="Running sweep cells"):
            key, record, error = _run_task(task)
            results[key] = (record, error)
    for key, (record, error) in results.items():
        if error is not None:
            logging.warning(f"Cell {key} failed: {error}")
    return results


def run_sweep(spec):
    """
    One open-loop run per disturbance frequency and one closed-loop run per cell, merged in (f_dist, i_u) order.

    Failed cells stay in the table with ``status`` set to the failure reason.
    """
    settings = spec.settings
    window = float(settings.get("simulation", "amplitude_window"))
    tasks = [(("open-loop", f_dist), settings.sim_config(f_dist=f_dist, i_u=spec.cells[0][1], open_loop=True)) for f_dist in spec.f_dists]
    tasks += [((f_dist, i_u), settings.sim_config(f_dist=f_dist, i_u=i_u, d_f=d_f, R_u=R_u)) for f_dist, i_u, d_f, R_u in spec.cells]
    logging.info(f"Sweeping {len(spec.cells)} cells of case {spec.case} with {spec.workers} worker(s)")
    results = _execute(tasks, spec.workers)

    rows, open_loop, closed_loop = [], {}, {}
    for f_dist, i_u, d_f, R_u in sorted(spec.cells):
        ol_record, ol_error = results[("open-loop", f_dist)]
        cl_record, cl_error = results[(f_dist, i_u)]
        row = {"case": spec.case, "f_dist": f_dist, "i_u": i_u, "d_f": d_f, "R_u": R_u}
        if ol_error or cl_error:
            row.update(y_ol=numpy.nan, y_cl=numpy.nan, attenuation_db=numpy.nan, saturation_fraction=numpy.nan)
            row["status"] = f"failed: {ol_error or cl_error}"
        else:
            metric = Metric.from_amplitudes(
                steady_state_amplitude(ol_record.y_disp, ol_record.t, window),
                steady_state_amplitude(cl_record.y_disp, cl_record.t, window),
            )
            row.update(y_ol=metric.y_ol, y_cl=metric.y_cl, attenuation_db=metric.attenuation_db, saturation_fraction=cl_record.saturation_fraction)
            row["status"] = "ok: closed-loop amplitude is zero" if metric.flagged else "ok"
            open_loop[f_dist] = ol_record
            closed_loop[(f_dist, i_u)] = cl_record
            logging.info(f"f_dist = {f_dist} Hz, i_u = {i_u}: {metric.attenuation_db:.2f} dB")
        rows.append(row)

    table = pandas.DataFrame(rows, columns=RESULT_COLUMNS)
    return SweepResult(table=table, open_loop=open_loop, closed_loop=closed_loop)


def _cell_name(case, f_dist, i_u=None):
    suffix = "open_loop" if i_u is None else f"iu{i_u}"
    return f"{utils.remove_special_characters(case)}_f{f_dist:g}_{suffix}"


def emit_outputs(result, out_dir, settings=None):
    """
    Write results.csv, trajectory and spectrum CSVs, the theta history (theta.h5) and manifest.ini to ``out_dir``.

    Returns:
    --------
    list of str
        Paths written
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as error:
        raise OSError(f"Could not create output directory {out_dir}: {error}") from error
    written = []
    table = result.table if result is not None else pandas.DataFrame(columns=RESULT_COLUMNS)

    results_path = os.path.join(out_dir, "results.csv")
    try:
        table.to_csv(results_path, index=False, columns=RESULT_COLUMNS, lineterminator="\n", encoding="utf-8")
    except OSError as error:
        raise OSError(f"Could not write {results_path}: {error}") from error
    written.append(results_path)

    if result is not None:
        case = settings.case if settings is not None else str(table["case"].iloc[0]) if len(table) else "run"
        spectrum_window = float(settings.get("simulation", "spectrum_window")) if settings is not None else 5.0
        theta_path = os.path.join(out_dir, "theta.h5")
        if os.path.exists(theta_path):
            os.remove(theta_path)

        for f_dist, record in sorted(result.open_loop.items()):
            path = os.path.join(out_dir, f"trajectory_{_cell_name(case, f_dist)}.csv")
            write_trajectory(record, path)
            written.append(path)
        for (f_dist, i_u), record in sorted(result.closed_loop.items()):
            name = _cell_name(case, f_dist, i_u)
            path = os.path.join(out_dir, f"trajectory_{name}.csv")
            write_trajectory(record, path)
            written.append(path)

            T_s = record.t[1] - record.t[0] if len(record.t) > 1 else 1.0
            window = min(spectrum_window, record.t[-1], result.open_loop[f_dist].t[-1])
            path = os.path.join(out_dir, f"spectrum_{name}.csv")
            try:
                spectrum_table(result.open_loop[f_dist], record, T_s, window).to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
            except OSError as error:
                raise OSError(f"Could not write {path}: {error}") from error
            written.append(path)

            utils.write_hdf(theta_path, {name: {"t": record.t, "theta": record.theta}})
        if result.closed_loop:
            written.append(theta_path)

    if settings is not None:
        written.append(settings.write(os.path.join(out_dir, "manifest.ini")))
    logging.info(f"Wrote {len(written)} files to {out_dir}")
    return written


COMPARISON_COLUMNS = ["case", "f_dist", "i_u", "attenuation_db"]


def compare_cases(tables):
    """
    Merge the result tables of several cases into one attenuation table.

    Parameters:
    ----------
    tables: iterable of pandas.DataFrame
        Result tables with at least the ``case``, ``f_dist``, ``i_u`` and ``attenuation_db`` columns

    Returns:
    --------
    pandas.DataFrame
        One row per (case, f_dist, i_u), ordered by f_dist, then i_u, then case
    """
    tables = [table for table in tables if table is not None]
    if not tables:
        return pandas.DataFrame(columns=COMPARISON_COLUMNS)
    for table in tables:
        missing = set(COMPARISON_COLUMNS) - set(table.columns)
        if missing:
            raise ValueError(f"Result table is missing columns {sorted(missing)}")
    merged = pandas.concat([table[COMPARISON_COLUMNS] for table in tables], ignore_index=True)
    duplicated = merged.duplicated(subset=["case", "f_dist", "i_u"])
    if duplicated.any():
        raise ValueError(f"Cells appear more than once: {merged.loc[duplicated, ['case', 'f_dist', 'i_u']].to_dict('records')}")
    return merged.sort_values(["f_dist", "i_u", "case"], kind="stable").reset_index(drop=True)


def write_comparison(table, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "comparison.csv")
    try:
        table.to_csv(path, index=False, columns=COMPARISON_COLUMNS, lineterminator="\n", encoding="utf-8")
    except OSError as error:
        raise OSError(f"Could not write {path}: {error}") from error
    logging.info(f"Wrote {len(table)} compared cells to {path}")
    return path
