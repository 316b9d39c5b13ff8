import h5py
import numpy
import pandas
import pytest

from VibForge.experiments import sweep
from VibForge.experiments.config import read_settings
from VibForge.experiments.metrics import attenuation_db, steady_state_amplitude
from VibForge.experiments.sweep import COMPARISON_COLUMNS, RESULT_COLUMNS, SweepResult, SweepSpec, compare_cases, emit_outputs, run_sweep, write_comparison
from VibForge.simulation.closed_loop import run_simulation

SHORT_RUN = """
[simulation]
t-end = 1.5
t-enable = 0.5
[sweep]
f-dist = [20, 40]
i-u = [10, 12]
cells = {(20, 10): (5, 1.0), (20, 12): (5, 1.0), (40, 10): (9, 0.5), (40, 12): (8, 0.4)}
"""


@pytest.fixture
def settings(tmp_path):
    path = tmp_path / "short.ini"
    path.write_text(SHORT_RUN)
    return read_settings(case="disp", config_file=str(path))


def test_table_layout(settings):
    result = run_sweep(SweepSpec.from_settings(settings))
    table = result.table
    assert list(table.columns) == RESULT_COLUMNS
    assert list(zip(table["f_dist"], table["i_u"])) == [(20, 10), (20, 12), (40, 10), (40, 12)]
    assert (table["status"] == "ok").all()
    assert (table["case"] == "disp").all()
    assert table.loc[3, "d_f"] == 8
    assert table.loc[3, "R_u"] == 0.4


def test_open_loop_shared_within_frequency(settings):
    table = run_sweep(SweepSpec.from_settings(settings)).table
    for _, rows in table.groupby("f_dist"):
        assert rows["y_ol"].nunique() == 1


def test_single_cell_equals_direct_pair(settings):
    spec = SweepSpec(settings=settings, cells=[(40, 12, 8, 0.4)])
    row = run_sweep(spec).table.iloc[0]
    open_loop = run_simulation(settings.sim_config(f_dist=40, i_u=12, open_loop=True))
    closed_loop = run_simulation(settings.sim_config(f_dist=40, i_u=12))
    y_ol = steady_state_amplitude(open_loop.y_disp, open_loop.t)
    y_cl = steady_state_amplitude(closed_loop.y_disp, closed_loop.t)
    assert row["y_ol"] == y_ol
    assert row["y_cl"] == y_cl
    assert row["attenuation_db"] == attenuation_db(y_ol, y_cl)


def test_cell_order_does_not_matter(settings):
    spec = SweepSpec.from_settings(settings)
    forward = run_sweep(spec).table
    backward = run_sweep(SweepSpec(settings=settings, cells=spec.cells[::-1])).table
    pandas.testing.assert_frame_equal(forward, backward)


def test_failed_cell_is_recorded(settings, monkeypatch):
    def failing(config):
        if config.i_u == 12 and config.f_dist == 40 and not config.open_loop:
            raise RuntimeError("diverged")
        return run_simulation(config)

    monkeypatch.setattr(sweep, "run_simulation", failing)
    result = run_sweep(SweepSpec.from_settings(settings))
    table = result.table
    assert len(table) == 4
    failed = table[table["status"] != "ok"]
    assert len(failed) == 1
    assert failed.iloc[0]["status"] == "failed: RuntimeError: diverged"
    assert numpy.isnan(failed.iloc[0]["attenuation_db"])
    assert (40, 12) not in result.closed_loop


def test_parallel_matches_serial(settings, tmp_path):
    serial = run_sweep(SweepSpec.from_settings(settings, workers=1))
    parallel = run_sweep(SweepSpec.from_settings(settings, workers=2))
    emit_outputs(serial, tmp_path / "serial")
    emit_outputs(parallel, tmp_path / "parallel")
    assert (tmp_path / "serial" / "results.csv").read_bytes() == (tmp_path / "parallel" / "results.csv").read_bytes()


def test_emit_outputs(settings, tmp_path):
    result = run_sweep(SweepSpec.from_settings(settings))
    out = tmp_path / "run"
    written = emit_outputs(result, str(out), settings)
    names = {path.name for path in out.iterdir()}
    assert {"results.csv", "theta.h5", "manifest.ini"} <= names
    assert "trajectory_disp_f20_open_loop.csv" in names
    assert "trajectory_disp_f40_iu12.csv" in names
    assert "spectrum_disp_f20_iu10.csv" in names
    assert len(written) == len(names)

    trajectory = pandas.read_csv(out / "trajectory_disp_f20_iu12.csv")
    assert len(trajectory) == int(numpy.floor(1.5 / 2.5e-3 + 1e-9)) + 1
    spectrum = pandas.read_csv(out / "spectrum_disp_f20_iu12.csv")
    assert list(spectrum.columns) == ["frequency", "y_disp_ol", "y_disp_cl", "y_acc_ol", "y_acc_cl"]
    with h5py.File(out / "theta.h5", "r") as f:
        assert f["disp_f40_iu12"]["theta"].shape == (601, 40)

    rerun = tmp_path / "rerun"
    emit_outputs(run_sweep(SweepSpec.from_settings(settings)), str(rerun), settings)
    assert (out / "results.csv").read_bytes() == (rerun / "results.csv").read_bytes()
    emit_outputs(result, str(out), settings)
    with h5py.File(out / "theta.h5", "r") as f:
        assert f["disp_f40_iu12"]["theta"].shape == (601, 40)


def test_empty_table_writes_header_only(tmp_path):
    emit_outputs(SweepResult(table=pandas.DataFrame(columns=RESULT_COLUMNS), open_loop={}, closed_loop={}), str(tmp_path))
    assert (tmp_path / "results.csv").read_text() == ",".join(RESULT_COLUMNS) + "\n"
    emit_outputs(None, str(tmp_path / "none"))
    assert (tmp_path / "none" / "results.csv").read_text() == ",".join(RESULT_COLUMNS) + "\n"


def case_table(case, cells):
    rows = [{"case": case, "f_dist": f_dist, "i_u": i_u, "d_f": 5, "R_u": 1.0, "y_ol": 1.0, "y_cl": 0.1, "attenuation_db": db, "saturation_fraction": 0.0, "status": "ok"} for f_dist, i_u, db in cells]
    return pandas.DataFrame(rows, columns=RESULT_COLUMNS)


def test_compare_cases_layout_and_order(tmp_path):
    tables = [
        case_table("disp", [(20, 12, 30.0), (20, 10, 31.0), (60, 12, 25.0)]),
        case_table("acc-lp", [(60, 12, 12.0), (20, 12, 20.0)]),
        case_table("acc-est", [(20, 12, 26.0)]),
    ]
    table = compare_cases(tables)
    assert list(table.columns) == COMPARISON_COLUMNS
    assert list(zip(table["case"], table["f_dist"], table["i_u"])) == [
        ("disp", 20, 10),
        ("acc-est", 20, 12),
        ("acc-lp", 20, 12),
        ("disp", 20, 12),
        ("acc-lp", 60, 12),
        ("disp", 60, 12),
    ]
    assert table.loc[1, "attenuation_db"] == 26.0

    path = write_comparison(table, str(tmp_path / "out"))
    written = pandas.read_csv(path)
    assert path.endswith("comparison.csv")
    assert list(written.columns) == COMPARISON_COLUMNS
    assert written["attenuation_db"].tolist() == [31.0, 26.0, 20.0, 30.0, 12.0, 25.0]


def test_compare_cases_rejects_repeated_cells():
    with pytest.raises(ValueError, match="more than once"):
        compare_cases([case_table("disp", [(20, 12, 30.0)]), case_table("disp", [(20, 12, 29.0)])])


def test_compare_cases_rejects_incomplete_table():
    with pytest.raises(ValueError, match="missing columns"):
        compare_cases([pandas.DataFrame({"case": ["disp"], "f_dist": [20]})])


def test_compare_cases_empty():
    assert list(compare_cases([]).columns) == COMPARISON_COLUMNS
