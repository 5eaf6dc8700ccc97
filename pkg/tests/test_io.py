import json

import numpy as np
import pytest

from higgsflow import experiment as E
from higgsflow.bundle import preset
from higgsflow.errors import ValidationError
from higgsflow.fieldio import geometry_hash, read_field, write_field
from higgsflow.flow import FlowOpts, run_flow
from higgsflow.geometry import build_torus
from higgsflow.metric import HermitianMetric
from higgsflow.random_fields import random_metric


def test_metric_roundtrip_bitwise(tmp_path, g32, extension01, rng):
    h = random_metric(extension01, rng, 0.5, block_diagonal=False)
    path = tmp_path / "m.hbf1"
    write_field(path, h, g32)
    h2 = read_field(path, g32)
    assert isinstance(h2, HermitianMetric)
    assert np.array_equal(h.values, h2.values)


def test_endfield_roundtrip(tmp_path, g32, extension01):
    path = tmp_path / "a.hbf1"
    write_field(path, extension01.a, g32)
    a2 = read_field(path, g32)
    assert np.array_equal(extension01.a.values, a2.values)
    assert a2.form_type == extension01.a.form_type
    assert np.array_equal(a2.twist.entry_flux, extension01.twist.entry_flux)


def test_config_roundtrip(tmp_path, g32, extension01):
    path = tmp_path / "cfg.hbf1"
    write_field(path, extension01, g32)
    cfg2 = read_field(path, g32)
    assert cfg2.degree == extension01.degree
    assert np.array_equal(cfg2.a.values, extension01.a.values)
    assert np.array_equal(cfg2.phi.values, extension01.phi.values)
    assert [b.flux for b in cfg2.blocks] == [b.flux for b in extension01.blocks]


def test_geometry_hash_mismatch_refused(tmp_path, g32, g64, nilpotent):
    path = tmp_path / "m.hbf1"
    write_field(path, HermitianMetric.identity(nilpotent), g32)
    with pytest.raises(ValidationError):
        read_field(path, g64)
    assert geometry_hash(g32) != geometry_hash(g64)
    assert geometry_hash(g32) == geometry_hash(build_torus(1j, 1.0, 32))


def test_truncation_refused(tmp_path, g32, nilpotent):
    path = tmp_path / "m.hbf1"
    write_field(path, HermitianMetric.identity(nilpotent), g32)
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(ValidationError) as err:
        read_field(path, g32)
    assert "expected" in str(err.value)


def test_bad_magic_refused(tmp_path, g32):
    path = tmp_path / "m.hbf1"
    path.write_bytes(b"NOTHBF1!" + b"\x00" * 64)
    with pytest.raises(ValidationError):
        read_field(path, g32)


# -- experiment configs -------------------------------------------------------------


def _sample_experiment():
    return E.ExperimentConfig(
        geometry={"tau_re": 0.0, "tau_im": 1.0, "lambda": 1.0, "n_grid": 32},
        preset={"kind": "nilpotent", "params": {}},
        initial_metric={"kind": "random", "seed": 7, "amplitude": 0.4},
        flow={"t_max": 0.2, "eps_target": 0.0, "dt": "auto", "sample_every": 5, "safety": 0.5},
        output={},
    )


def test_experiment_roundtrip_byte_identical():
    text = E.emit_experiment(_sample_experiment())
    exp = E.parse_experiment(text)
    assert E.emit_experiment(exp) == text


@pytest.mark.parametrize(
    "mangle,field",
    [
        (lambda d: d["geometry"].update(tau_im=-1.0), "tau_im"),
        (lambda d: d["geometry"].update(n_grid=31), "n_grid"),
        (lambda d: d["geometry"].pop("lambda"), "lambda"),
        (lambda d: d.pop("preset"), "preset"),
        (lambda d: d["flow"].pop("t_max"), "t_max"),
        (lambda d: d["initial_metric"].update(kind="psychic"), "initial_metric"),
    ],
)
def test_experiment_diagnostics_name_fields(mangle, field):
    data = json.loads(E.emit_experiment(_sample_experiment()))
    mangle(data)
    with pytest.raises(ValidationError) as err:
        E.parse_experiment(json.dumps(data))
    assert field.split(".")[-1] in str(err.value) or field in str(err.value)


def test_record_json_and_csv(nilpotent, rng):
    h0 = random_metric(nilpotent, rng, 0.4)
    rec = run_flow(nilpotent, h0, FlowOpts(t_max=0.1, safety=0.5, sample_every=5))
    data = json.loads(E.record_json(rec))
    assert data["format_version"] == 1
    assert data["samples"][0]["t"] == 0.0
    rec2 = E.record_from_dict(data)
    assert rec2.max_res_series().tolist() == rec.max_res_series().tolist()
    csv_text = E.monitor_csv(rec)
    lines = csv_text.strip().split("\n")
    assert lines[0] == "t,L_accum,L_recomputed,max_res,l2_res,min_eig,trace_check"
    assert len(lines) == len(rec.samples) + 1
    vals = [float(x) for x in lines[1].split(",") if x != ""]
    assert all(np.isfinite(vals))


def test_record_series_deterministic(nilpotent):
    h0 = random_metric(nilpotent, np.random.default_rng(11), 0.4)
    opts = FlowOpts(t_max=0.15, safety=0.5, sample_every=5)
    a = E.monitor_csv(run_flow(nilpotent, HermitianMetric(h0.values.copy()), opts))
    b = E.monitor_csv(run_flow(nilpotent, HermitianMetric(h0.values.copy()), opts))
    assert a == b
