"""End-to-end smoke of the python bindings on a tiny problem."""

import math
import os

import pytest

import msrich


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    cfg = msrich.RunConfig()
    cfg.fine_n = 16
    cfg.coarse_n = 4
    cfg.nb_list = [4]
    cfg.train_samples = 2
    cfg.test_samples = 1
    cfg.hidden_widths = [8]
    cfg.train.epochs = 2
    cfg.train.batch_size = 4
    cfg.train.validation_fraction = 0.25
    cfg.n_steps = 2
    cfg.enrichment_steps = [1, 2]
    cfg.seed = 11
    cfg.out_dir = str(tmp_path_factory.mktemp("out"))
    return msrich.make_workspace(cfg)


def test_config_roundtrip():
    cfg = msrich.parse_config('{"fine_n": 16, "coarse_n": 4, "seed": 3}')
    assert cfg.fine_n == 16
    assert cfg.seed == 3
    assert cfg.nb_list == [2, 4, 6, 8, 12, 16]
    with pytest.raises(RuntimeError, match="unknown key"):
        msrich.parse_config('{"fine_m": 16}')
    with pytest.raises(RuntimeError, match="divisible"):
        bad = msrich.RunConfig()
        bad.fine_n = 15
        msrich.validate_config(bad)


def test_workspace_geometry(workspace):
    assert workspace.n_vertices == 25
    assert workspace.n_fine_nodes == 17 * 17
    assert workspace.patch_length == 81
    assert workspace.cfg.fine_n == 16


def test_dataset_and_training(workspace):
    ds = msrich.obtain_dataset(workspace, 4)
    assert ds.header.m == 81
    assert len(ds.records) == 25 * 3
    rec = ds.records[0]
    assert rec.neighborhood == 0
    assert len(rec.kappa) == 81
    assert len(rec.phi) == 81
    assert os.path.exists(msrich.dataset_path(workspace.cfg, 4))

    art = msrich.obtain_model(workspace, ds, 4)
    assert art.layer_sizes == [81, 8, 81]
    assert len(art.history.train_loss) == 2
    pred = art.predict(rec.kappa)
    assert len(pred) == 81
    assert all(math.isfinite(v) for v in pred)

    ev = msrich.eval_basis(workspace, ds, art)
    assert len(ev.cer.values) == 25
    assert ev.cer.highlight_index == 0
    assert ev.rmse.value >= 0.0
    assert not ev.rmse.degenerate


def test_run_steady_and_timing(workspace):
    rep = msrich.run_steady(workspace)
    assert len(rep.per_nb) == 1
    row = rep.per_nb[0]
    assert row.nb == 4
    assert row.degenerate == 0
    assert math.isfinite(row.l2.mean)
    assert row.l2.mean >= 0.0
    assert len(row.l2.values) == 1
    assert msrich.report_timing(workspace.cfg.out_dir) == 4
    assert os.path.exists(os.path.join(workspace.cfg.out_dir, "timing.csv"))


def test_run_time_zero_source(tmp_path):
    cfg = msrich.RunConfig()
    cfg.fine_n = 16
    cfg.coarse_n = 4
    cfg.nb_list = [2]
    cfg.train_samples = 2
    cfg.test_samples = 1
    cfg.hidden_widths = [8]
    cfg.train.epochs = 2
    cfg.train.batch_size = 4
    cfg.train.validation_fraction = 0.25
    cfg.n_steps = 2
    cfg.enrichment_steps = [1, 2]
    cfg.source = "zero"
    cfg.seed = 11
    cfg.out_dir = str(tmp_path)
    rep = msrich.run_time_dependent(msrich.make_workspace(cfg))
    row = rep.per_nb[0]
    assert row.steps == [1, 2]
    assert row.max_abs_direct == 0.0
    assert row.max_abs_pred == 0.0
    assert row.max_abs_diff == 0.0
    assert row.last_l2.mean == 0.0
    assert row.boch_l2.mean == 0.0
