import os

import pytest

import voyagecast as vc


def test_windows():
    assert vc.window_of("2021-01-01T00:00:00Z") == 1
    assert vc.window_of("2021-01-01T05:59:59Z") == 1
    assert vc.window_of("2021-01-01T06:00:00Z") == 2
    # 2021-01-01 was a Friday.
    assert vc.window_identifier(1) == (4, 0)
    assert vc.window_identifier(4) == (4, 3)
    assert vc.window_bounds(2) == ("2021-01-01T06:00:00Z", "2021-01-01T12:00:00Z")
    with pytest.raises(vc.ValidationError):
        vc.window_of("2021-01-01", delta_hours=5)


def test_config():
    cfg = vc.Config(overrides=["model.H=28"])
    text = cfg.render()
    assert "model.H=28\n" in text
    assert "model.d_model=32\n" in text
    assert len(text.splitlines()) == len(vc.Config.keys())
    with pytest.raises(vc.ConfigError):
        vc.Config(overrides=["model.nope=1"])
    with pytest.raises(vc.IoError):
        vc.Config(path="/nonexistent/run.config")


def test_regression():
    r = vc.sensitivity_regression([0.0, 1.0, 2.0, 3.0], [1.0, 3.0, 5.0, 7.0])
    assert r["slope"] == pytest.approx(2.0)
    assert r["intercept"] == pytest.approx(1.0)
    assert r["ci"][0] == pytest.approx(2.0)
    assert r["ci"][1] == pytest.approx(2.0)


def test_pipeline(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = vc.Config(
        overrides=[
            "synth.n_ports=4",
            "synth.n_vessels=8",
            "synth.n_segments=4",
            "model.L=16",
            "model.H=8",
            "model.d_model=8",
            "model.n_head=2",
            "model.d_emb=4",
            "model.d_temp=4",
            "train.batch_size=64",
            "train.max_epochs=2",
        ]
    )
    vc.synth(cfg)
    diag = vc.preprocess(cfg)
    assert diag["voyages"] > 0
    vc.counts(cfg)
    vc.featurize(cfg)
    fit = vc.train(cfg)
    assert fit["epochs"] == 2
    assert fit["best_epoch"] >= 0
    report = vc.evaluate(cfg)
    assert report["records"] > 0
    assert len(report["step_mae"]) in (0, 8)
    assert report["weighted"]["mape"] > 0
    assert os.path.exists("runs/default/reports/metrics.json")
