import math

import numpy as np
import pytest

import csipred

TINY = {
    "synth.samples": 600,
    "synth.antennas": 2,
    "window.lags": 8,
    "window.horizon": 4,
    "train.window_stride": 4,
    "rnn.hidden": 4,
    "rnn.layers": 1,
    "rnn.epochs": 2,
    "bilstm.hidden": 3,
    "bilstm.layers": 1,
    "bilstm.epochs": 1,
    "np.epochs": 2,
    "np.changepoints": 3,
    "np.ar_layers": 1,
    "np.ar_hidden": 4,
    "np.seasonalities": "2:0.025",
    "compare.seeds": "1, 2, 3",
}


def test_fading_shape_and_power():
    h = csipred.generate_fading(samples=4000, antennas=3, seed=2)
    assert h.shape == (3, 4000)
    assert h.dtype == np.complex128
    assert abs(np.mean(np.abs(h) ** 2) - 1.0) < 0.1
    assert np.array_equal(h, csipred.generate_fading(samples=4000, antennas=3, seed=2))


def test_windows_layout():
    times, x, y = csipred.make_windows([1.0, 2.0, 3.0, 4.0, 5.0], lags=2, horizon=1)
    assert list(times) == [2, 3]
    assert x.tolist() == [[1.0, 2.0], [2.0, 3.0]]
    assert y.tolist() == [[4.0], [5.0]]


def test_metric_identities():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(10, 6)) + 1j * rng.normal(size=(10, 6))
    assert csipred.nmse(h, h)["value"] == 0.0
    assert csipred.nmse(np.zeros_like(h), h)["value"] == pytest.approx(1.0)
    assert csipred.cosine_similarity((2 - 3j) * h, h)["value"] == pytest.approx(1.0, abs=1e-12)
    assert csipred.nmse(np.array([[0.5 + 0j]]), np.array([[1.0 + 0j]]))["value"] == pytest.approx(0.25)
    assert csipred.to_db(0.01) == pytest.approx(-20.0)


def test_config_errors():
    with pytest.raises(csipred.ConfigError):
        csipred.config({"rnn.hiden": 3})
    with pytest.raises(ValueError):
        csipred.config({"rnn.hidden": "x"})
    c = csipred.config(TINY)
    assert csipred.Config.parse(c.to_text()) == c


def test_train_evaluate_roundtrip():
    cfg = csipred.config(TINY)
    data = csipred.prepare(cfg)
    assert data.features == 4
    p = csipred.train("hybrid", data, cfg, seed=3)
    assert p.kind == "hybrid"
    again = csipred.Predictor.from_checkpoint(p.checkpoint())
    assert again.digest() == p.digest()
    assert csipred.train("hybrid", data, cfg, seed=3).digest() == p.digest()
    reports = csipred.evaluate(p, data, "test")
    assert [r["scope"] for r in reports][-1] == "all"
    for r in reports:
        assert r["nmse"] >= 0.0
        assert 0.0 <= r["cosine"] <= 1.0
        assert r["nmse_db"] == pytest.approx(10 * math.log10(r["nmse"]), abs=1e-9)
    f = csipred.forecast(p, data, "test")
    assert len(f["predicted"]) == 2
    assert f["predicted"][0].shape[1] == 4


def test_compare_table():
    cfg = csipred.config(TINY)
    data = csipred.prepare(cfg)
    r = csipred.compare(data, cfg)
    assert r["dataset_digest"] == data.digest()
    assert len(r["rows"]) == 12
    assert [row["model"] for row in r["rows"][:4]] == ["hybrid", "bilstm", "rnn", "np"]
    assert {m["model"] for m in r["medians"]} == {"hybrid", "bilstm", "rnn", "np"}
