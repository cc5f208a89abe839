import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fractalbem.experiments import (
    CSV_COLUMNS,
    ConfigError,
    RunConfig,
    export_outputs,
    growth_exponent,
    run_alpha_sweep,
    run_k_sweep,
    run_level_sweep,
    run_snowflake_comparison,
    snowflake_sequence,
    write_records_csv,
)

CANTOR = {"family": "cantor_set", "k": 5.0, "direction": [0.6, -0.8], "params": {"alpha": 1 / 3}}
DUST = {"family": "cantor_dust", "k": 5.0, "direction": [0.0, 0.6, -0.8], "params": {"alpha": 1 / 3}}


def cfg(base=CANTOR, **more):
    return RunConfig.from_dict({**base, **more})


@pytest.mark.parametrize("bad", [{"colour": "red"}, {"mesh": {"kind": "lattice", "size": 3}}])
def test_unknown_keys_rejected(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict({**CANTOR, **bad})


@pytest.mark.parametrize("bad", [
    {"direction": [1.0, 1.0]},
    {"direction": [0.0, 0.0, -1.0]},
    {"k": -1.0},
    {"levels": [3, 1]},
    {"family": "julia"},
    {"method": "nystrom"},
    {"outputs": ["pictures"]},
    {"fit_fraction": 0.0},
    {"mesh": {"kind": "lattice"}},
    {"mesh": {"kind": "per_component", "n0": 0}},
])
def test_invalid_settings_rejected(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict({**CANTOR, **bad})


def test_galerkin_only_for_segments():
    with pytest.raises(ConfigError):
        cfg(DUST, method="galerkin")


@pytest.mark.parametrize("base,nu", [(CANTOR, 2), (DUST, 4)])
def test_dof_counts(base, nu):
    res = run_level_sweep(cfg(base, levels=[0, 3], outputs=[]))
    assert [r.N for r in res.records] == [nu ** j for j in range(4)]


def test_single_level_sweep():
    res = run_level_sweep(cfg(levels=[0, 0], outputs=["far_field"]))
    assert len(res.records) == 1
    rec = res.records[0]
    assert rec.N == 1 and rec.norm_far > 0
    assert math.isnan(rec.norm_near) and math.isnan(rec.norm_energy)


def test_error_sweep_reference_is_zero():
    res = run_level_sweep(cfg(levels=[1, 4], outputs=["errors"], field_resolution=30))
    last = res.records[-1]
    assert last.err_near == 0.0 and last.err_far == 0.0
    assert all(r.err_far > 0 for r in res.records[:-1])


def test_empty_alpha_list():
    assert run_alpha_sweep(cfg(alphas=[])).records == []


def test_alpha_sweep_tags_records():
    res = run_alpha_sweep(cfg(alphas=[0.1, 0.25], levels=[0, 1], outputs=[]))
    assert [r.extra["alpha"] for r in res.records] == [0.1, 0.1, 0.25, 0.25]


def test_single_wavenumber_has_no_exponent():
    res = run_k_sweep(cfg(wavenumbers=[5.0], levels=[2, 2]))
    assert len(res.records) == 1 and "growth_exponent" not in res.summary


def test_k_sweep_records_both_norms():
    res = run_k_sweep(cfg(wavenumbers=[2.0, 4.0, 8.0], levels=[2, 2], fit_fraction=1.0))
    assert [r.extra["k"] for r in res.records] == [2.0, 4.0, 8.0]
    assert all(r.norm_energy > 0 and r.extra["norm_energy_k"] > 0 for r in res.records)
    assert isinstance(res.summary["growth_exponent"], float)


@given(st.floats(-2, 2), st.floats(0.1, 10))
def test_growth_exponent_recovers_power_law(power, scale):
    ks = np.array([5.0, 10.0, 20.0, 40.0, 80.0])
    assert growth_exponent(ks, scale * ks ** power, 1.0) == pytest.approx(power, abs=1e-9)


def test_growth_exponent_uses_top_fraction():
    ks = np.array([1.0, 2.0, 4.0, 8.0])
    norms = np.array([1.0, 1.0, 4.0, 16.0])
    assert growth_exponent(ks, norms, 0.5) == pytest.approx(2.0, abs=1e-12)
    assert growth_exponent([3.0], [1.0]) is None


def test_header_only_csv(tmp_path):
    write_records_csv([], tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == ",".join(CSV_COLUMNS) + "\n"


def test_manifest(tmp_path):
    c = cfg(levels=[0, 1])
    res = run_level_sweep(c)
    manifest = export_outputs(res, c, tmp_path, "m")
    on_disk = json.loads((tmp_path / "m_manifest.json").read_text())
    assert on_disk["wavelength"] == pytest.approx(2 * math.pi / 5.0, rel=1e-15)
    assert on_disk["config"]["family"] == "cantor_set"
    assert manifest["files"] == ["m.csv"]
    ck = cfg(wavenumbers=[2.0, 4.0], levels=[1, 1])
    export_outputs(run_k_sweep(ck), ck, tmp_path, "k")
    on_disk = json.loads((tmp_path / "k_manifest.json").read_text())
    assert on_disk["wavelength"] == pytest.approx([math.pi, math.pi / 2], rel=1e-15)


def _rows_without_time(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    col = rows[0].index("seconds")
    return [r[:col] + r[col + 1:] for r in rows]


def test_exports_are_deterministic(tmp_path):
    c = cfg(levels=[0, 3], outputs=["norms", "far_field", "errors", "field_files"], field_resolution=8)
    for name in ("a", "b"):
        export_outputs(run_level_sweep(c), c, tmp_path, name)
    assert _rows_without_time(tmp_path / "a.csv") == _rows_without_time(tmp_path / "b.csv")
    assert (tmp_path / "a_far_j2.csv").read_bytes() == (tmp_path / "b_far_j2.csv").read_bytes()
    assert (tmp_path / "a_near_j3.pgm").read_bytes() == (tmp_path / "b_near_j3.pgm").read_bytes()


def test_dof_limit_truncates(caplog):
    res = run_level_sweep(cfg(levels=[0, 6], dof_limit=10, outputs=[]))
    assert [r.N for r in res.records] == [1, 2, 4, 8, 16]
    assert res.records[-1].extra["note"] == "dof_limit"
    assert "truncated" in caplog.text


def test_snowflake_sequence_order():
    assert snowflake_sequence(2) == [("inner", 0), ("outer", 0), ("inner", 1), ("outer", 1), ("inner", 2)]


def test_snowflake_comparison_small():
    c = RunConfig.from_dict({"family": "koch_snowflake", "k": 3.0, "direction": [0.0, 0.0, -1.0],
                             "levels": [0, 1], "mesh": {"kind": "lattice", "h": "1/9"}})
    res = run_snowflake_comparison(c)
    diffs = res.summary["relative_differences"]
    assert len(diffs) == 2 and all(d > 0 for d in diffs)
    assert [r.extra["side"] for r in res.records] == ["inner", "outer", "inner"]


def test_snowflake_comparison_needs_lattice():
    c = RunConfig.from_dict({"family": "koch_snowflake", "k": 3.0, "direction": [0.0, 0.0, -1.0]})
    with pytest.raises(ConfigError):
        run_snowflake_comparison(c)


def test_identical_screens_have_zero_difference():
    from fractalbem.norms import density_difference

    c = RunConfig.from_dict({"family": "koch_snowflake", "k": 3.0, "direction": [0.0, 0.0, -1.0],
                             "levels": [1, 1], "params": {"side": "inner"},
                             "mesh": {"kind": "lattice", "h": "1/9"}})
    a = run_level_sweep(c).densities[1]
    b = run_level_sweep(c).densities[1]
    assert density_difference(a, b).absolute == 0.0


def test_wavelength_policy_scales_with_k():
    c = cfg(DUST, mesh={"kind": "wavelength", "dofs_per_wavelength": 6.0}, levels=[1, 1],
            wavenumbers=[10.0, 20.0])
    res = run_k_sweep(c)
    # side 1/3, wavelength 2 pi / k: ceil(6 * (1/3) * k / (2 pi)) per axis
    per_axis = [math.ceil(6 * k / (3 * 2 * math.pi)) for k in (10.0, 20.0)]
    assert [r.N for r in res.records] == [4 * m * m for m in per_axis]
