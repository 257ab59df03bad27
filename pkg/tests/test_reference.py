"""
六自旋参考集群上的端到端运行
"""
import numpy as np
import pytest

from spinproc import SpinProcessor
from spinproc.codec import bitwise_not_oracle
from spinproc.engine import ExperimentEngine
from spinproc.models import ExperimentKind
from spinproc.scheduler import JobScheduler
from spinproc.specs import load_experiment_config

from .conftest import CONFIG_DIR

pytestmark = pytest.mark.slow

FIXED_WORDS = [0, 255, 178]


@pytest.fixture(scope="module")
def reference_config():
    return load_experiment_config(CONFIG_DIR / "desk_reference.json")


@pytest.fixture
async def engine(reference_config):
    engine = ExperimentEngine(reference_config)
    await engine.run_calibration()
    return engine


def _random_words(count: int) -> list:
    rng = np.random.default_rng(20240611)
    return [int(v) for v in rng.integers(0, 256, size=count)]


async def test_calibration_sets_every_bit(reference_config):
    engine = ExperimentEngine(reference_config)
    result = await engine.run_calibration()
    assert result.value == 255
    assert 0 < len(engine.system.transitions) <= 792
    assert min(result.slot_amplitudes) > result.metadata["floor"]


async def test_not_gate_on_reference(engine):
    words = FIXED_WORDS + _random_words(20)
    results = await engine.execute_batch(words, ExperimentKind.NOT_GATE)
    ref = engine.reference.reference
    for x, result in zip(words, results):
        assert result.value == bitwise_not_oracle(x, 8), x
        for k in range(8):
            if (x >> k) & 1:
                assert result.slot_amplitudes[k] < 0.5 * ref[k]


async def test_encode_on_reference(engine):
    words = FIXED_WORDS + _random_words(20)
    results = await engine.execute_batch(words, ExperimentKind.ENCODE)
    assert [r.value for r in results] == words


async def test_processor_reuses_reference_engine(reference_config):
    app = SpinProcessor()
    result = await app.not_gate(reference_config, 178)
    assert result.value == 77
    assert app.status["calibrated"] == 1


async def test_stored_erase_matches_tuning(reference_config):
    engine = ExperimentEngine(reference_config)
    tuned = await engine.tune_erase(slot=0)
    assert tuned.erase_duration_ms == 10.0
    assert tuned.erase_amplitude_hz == pytest.approx(
        reference_config.pulse.erase_amplitude_hz, abs=0.3
    )
    assert tuned.residual < 0.01


async def test_serial_and_parallel_runs_match(reference_config):
    cfg = reference_config.with_overrides(n_transients=64)
    runs = []
    for workers in (1, 4):
        engine = ExperimentEngine(cfg, JobScheduler(max_workers=workers))
        await engine.run_calibration()
        runs.append(await engine.execute_batch([178, 1], ExperimentKind.NOT_GATE))
    for serial, parallel in zip(*runs):
        assert np.array_equal(serial.fid, parallel.fid)
        assert serial.value_decimal == parallel.value_decimal
