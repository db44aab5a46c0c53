import numpy as np
import pytest

from pimdn.cfm import fit_standardization_cfm, init_cfm
from pimdn.checkpoints import checkpoint_dict, load_checkpoint, save_checkpoint
from pimdn.errors import InvalidInput
from pimdn.mdn import Architecture, fit_standardization, init_params


def test_mdn_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    model = init_params(Architecture(1, 16, 2, 3), 4)
    model.params += rng.normal(size=model.params.shape) * 1e-3
    model = fit_standardization(model, rng.normal(2.0, 3.0, 100), rng.normal(-1.0, 0.1, 100))
    path = tmp_path / "mdn.json"
    save_checkpoint(model, path, seed=4, training={"iterations": 17})
    back, doc = load_checkpoint(path)
    assert np.array_equal(back.params, model.params)
    assert np.array_equal(back.x_mean, model.x_mean)
    assert back.u_std == model.u_std
    assert back.arch == model.arch
    assert doc["seed"] == 4
    assert doc["training"]["iterations"] == 17


def test_cfm_round_trip_and_kind_dispatch(tmp_path):
    model = fit_standardization_cfm(init_cfm(2), np.linspace(-1, 1, 10), np.linspace(0, 9, 10))
    path = tmp_path / "cfm.json"
    save_checkpoint(model, path, seed=2)
    back, doc = load_checkpoint(path)
    assert doc["kind"] == "cfm"
    assert type(back).__name__ == "CfmModel"
    assert np.array_equal(back.params, model.params)


def test_identical_models_identical_bytes(tmp_path):
    model = init_params(Architecture(1, 8, 2, 2), 7)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_checkpoint(model, p1, seed=7)
    save_checkpoint(model, p2, seed=7)
    assert p1.read_bytes() == p2.read_bytes()


def test_rejects_non_checkpoint_document(tmp_path):
    path = tmp_path / "bogus.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(InvalidInput):
        load_checkpoint(path)


def test_checkpoint_dict_rejects_unknown_model():
    with pytest.raises(InvalidInput):
        checkpoint_dict(object())
