import numpy as np
import orjson
import pytest

from spinproc.engine import ExperimentEngine
from spinproc.exporters import (
    dumps,
    result_payload,
    write_fid_csv,
    write_spectrum_csv,
    write_transitions_csv,
)
from spinproc.models import TWO_PI
from spinproc.readout import magnitude_spectrum
from spinproc.spin_model import make_cluster, spin_system


def test_fid_csv_full_precision(tmp_path):
    fid = np.array([1.0 / 3.0 + 0.1j, -2.0e-17 + 0j])
    path = write_fid_csv(tmp_path / "fid.csv", fid, 1e-4)
    lines = path.read_text().splitlines()
    assert lines[0] == "t_s,re,im"
    values = np.loadtxt(path, delimiter=",", skiprows=1)
    assert values[0, 1] == fid[0].real
    assert values[1, 0] == 1e-4


def test_spectrum_csv(tmp_path):
    spectrum = magnitude_spectrum(np.ones(8, dtype=complex), 1e-3, pad_factor=2)
    path = write_spectrum_csv(tmp_path / "spec.csv", spectrum)
    values = np.loadtxt(path, delimiter=",", skiprows=1)
    assert values.shape == (16, 2)
    assert np.array_equal(values[:, 1], spectrum.mags)


def test_transitions_csv(tmp_path):
    table = spin_system(make_cluster([TWO_PI * 250.0])).transitions
    lines = write_transitions_csv(tmp_path / "t.csv", table).read_text().splitlines()
    assert lines[1].split(",")[:2] == ["0", "1"]
    assert float(lines[1].split(",")[3]) == pytest.approx(250.0)


def test_dumps_sorts_keys_and_numpy():
    data = orjson.loads(dumps({"b": np.array([1.5]), "a": 1}))
    assert data == {"a": 1, "b": [1.5]}
    assert dumps({"b": 1, "a": 2}).index(b'"a"') < dumps({"b": 1, "a": 2}).index(b'"b"')


async def test_result_payload_drops_wall_time(mini_config):
    engine = ExperimentEngine(mini_config)
    result = await engine.run_calibration()
    assert "wall_time_s" in result.metadata
    payload = result_payload(result, include_arrays=True)
    assert "wall_time_s" not in payload["metadata"]
    assert len(payload["fid"]["re"]) == 128
    assert payload["decoded"] == {"bits_lsb_first": [1, 1], "value_decimal": "3"}
