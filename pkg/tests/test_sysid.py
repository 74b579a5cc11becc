import numpy as np
import pytest

from tcfinger.errors import ConfigError, InsufficientData, RankDeficient
from tcfinger.lti import StateSpaceModel, rollout
from tcfinger.sysid import IdentConfig, era_realize, holdout_split, identify, markov_parameters, validate
from tcfinger.timeseries import SENSOR, make_dataset, window


def _record(n=600, seed=0):
    model = StateSpaceModel(np.array([[0.5]]), np.array([[1.0]]), np.array([[2.0]]))
    u = np.random.default_rng(seed).normal(0.0, 1.0, (n, 1))
    _, y = rollout(model, u)
    return make_dataset([("u", SENSOR, u[:, 0]), ("y", SENSOR, y[:, 0])])


def test_noise_free_first_order_system_is_recovered():
    ds = _record()
    model = identify(ds, ["u"], ["y"], IdentConfig(order=1, horizon=20, ridge=1e-10))
    assert model.A[0, 0] == pytest.approx(0.5, abs=1e-4)
    assert (model.C @ model.B)[0, 0] == pytest.approx(2.0, abs=1e-4)
    assert (model.C @ model.A @ model.B)[0, 0] == pytest.approx(1.0, abs=1e-4)


def test_model_from_training_split_reproduces_the_record():
    ds = _record(seed=1)
    split, n = holdout_split(ds)
    assert (split, n) == (420, 600)
    model = identify(window(ds, 0, split), ["u"], ["y"], IdentConfig(order=1, horizon=20, ridge=1e-10))
    report = validate(model, ds, ["u"], ["y"])
    assert report.outputs == ["y"]
    assert report.best_fit[0] > 99.0


def test_markov_parameters_of_known_system():
    ds = _record()
    U = ds.values("u")[:, None]
    Y = ds.values("y")[:, None]
    H = markov_parameters(U, Y, horizon=10, ridge=0.0)
    assert H.shape == (11, 1, 1)
    assert H[0, 0, 0] == pytest.approx(0.0, abs=1e-3)
    assert H[1, 0, 0] == pytest.approx(2.0, abs=1e-3)
    assert H[2, 0, 0] == pytest.approx(1.0, abs=1e-3)


def test_rank_deficient_hankel_reports_achievable_rank():
    H = np.zeros((11, 1, 1))
    H[1:, 0, 0] = 0.5 ** np.arange(10)
    with pytest.raises(RankDeficient) as err:
        era_realize(H, order=3)
    assert err.value.achievable_rank == 1


def test_too_short_record():
    ds = _record(n=30)
    with pytest.raises(InsufficientData):
        identify(ds, ["u"], ["y"], IdentConfig(order=1, horizon=20))


@pytest.mark.parametrize("cfg", [IdentConfig(order=0), IdentConfig(order=11, horizon=20), IdentConfig(ridge=-1.0)])
def test_invalid_settings(cfg):
    with pytest.raises(ConfigError):
        identify(_record(), ["u"], ["y"], cfg)
