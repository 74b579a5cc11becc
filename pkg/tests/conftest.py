import numpy as np
import pytest

from tcfinger.config.run_config import RunConfig
from tcfinger.timeseries import ACTUATOR, SENSOR, make_dataset


def square_wave_codes(n: int, half_period: int, start_on: bool = False) -> np.ndarray:
    """Actuator codes alternating OFF/ON every half_period samples."""
    phase = (np.arange(n) // half_period) % 2
    if start_on:
        phase = 1 - phase
    return np.where(phase == 1, 2, 1).astype(float)


def first_order_response(codes: np.ndarray, tau_samples: float, high: float = 2.4) -> np.ndarray:
    """Sensor following the actuator with a first-order lag."""
    y = np.zeros(codes.shape[0])
    alpha = 1.0 / tau_samples
    for k in range(1, codes.shape[0]):
        target = high if codes[k] == 2 else 0.0
        y[k] = y[k - 1] + alpha * (target - y[k - 1])
    return y


@pytest.fixture
def valve_dataset():
    codes = square_wave_codes(2000, 100)
    flow = first_order_response(codes, 4.0)
    return make_dataset([("MV101", ACTUATOR, codes), ("FIT101", SENSOR, flow)], sample_period_s=1.0)


@pytest.fixture
def run_config(tmp_path):
    return RunConfig(out_dir=str(tmp_path / "out"), seed=7, operations_per_device=40, attacks_per_type=2)
