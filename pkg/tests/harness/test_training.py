import dataclasses
from decimal import Decimal

import numpy as np
import pytest
from pytest import mark as m

from npg_hpf.autodiff.checkpoint import load_checkpoint
from npg_hpf.fusion import PolicySet, VDPolicy
from npg_hpf.harness import load_run, read_metrics, run_training
from npg_hpf.harness.training import IntervalTotals, checkpoint_parameters


@m.describe("Training runs")
class TestRunTraining:
    @m.context("When a fused run trains on the matrix game")
    @m.it("Evaluates at every interval and at the end")
    def test_rows(self, quick_config):
        artifacts = run_training(quick_config)

        assert isinstance(artifacts.learners, PolicySet)
        assert [row.step for row in artifacts.rows] == [20, 40, 60]
        assert artifacts.final.episode == 60
        assert artifacts.config.optimizer == "adam"
        assert artifacts.config.epsilon_mode == "constant"
        for row in artifacts.rows:
            assert row.epsilon == 1.0
            assert row.select_alpha + row.select_beta == pytest.approx(1.0)
            assert row.loss_total is not None
            assert row.loss_instructive is not None
        assert artifacts.payoff.q_tot.shape == (3, 3)
        assert artifacts.payoff.q_jt.shape == (3, 3)
        assert artifacts.run_dir is None

    @m.context("When run twice with the same seed")
    @m.it("Writes byte-identical metrics logs")
    def test_determinism(self, quick_config, tmp_path):
        for name in ("a", "b"):
            run_training(quick_config, out_dir=tmp_path / name)
        a = (tmp_path / "a" / "metrics.csv").read_bytes()
        b = (tmp_path / "b" / "metrics.csv").read_bytes()
        assert a == b

    @m.context("When run with different seeds")
    @m.it("Trains different parameters")
    def test_seeds(self, quick_config):
        a = run_training(quick_config).learners
        b = run_training(dataclasses.replace(quick_config, seed=4)).learners
        pa, pb = checkpoint_parameters(a), checkpoint_parameters(b)
        assert any(not np.array_equal(pa[k], pb[k]) for k in pa)

    @m.context("When a baseline algorithm is configured")
    @m.it("Trains a single learner without policy selection")
    def test_baseline(self, quick_config):
        for algo in ("vdn", "qmix", "wqmix", "qplex"):
            config = dataclasses.replace(quick_config, algo=algo)
            artifacts = run_training(config)
            assert isinstance(artifacts.learners, VDPolicy)
            assert artifacts.config.optimizer == "rmsprop"
            for row in artifacts.rows:
                assert row.select_alpha is None
                assert row.select_beta is None
                assert row.loss_instructive is None

    @m.context("When the run is written out")
    @m.it("Lays out the metrics, checkpoint and payoff tables")
    def test_write(self, quick_config, tmp_path):
        artifacts = run_training(quick_config, out_dir=tmp_path)

        assert artifacts.run_dir == tmp_path
        rows = read_metrics(tmp_path / "metrics.csv")
        assert [r["step"] for r in rows] == ["20", "40", "60"]
        for r in rows:
            total = Decimal(r["select_alpha"]) + Decimal(r["select_beta"])
            assert total == 1

        parameters, metadata = load_checkpoint(tmp_path / "checkpoint")
        assert metadata["step"] == 60
        assert metadata["episode"] == 60
        assert metadata["config"]["algo"] == "hpf-wq"
        assert any(k.startswith("alpha.") for k in parameters)
        assert any(k.startswith("beta.") for k in parameters)

        payoff = (tmp_path / "payoff.txt").read_text()
        assert "Q_tot" in payoff
        assert "Q_jt" in payoff
        assert payoff.count("*") == 2

    @m.context("When a run is loaded from its checkpoint")
    @m.it("Restores the configuration and trained parameters")
    def test_load(self, quick_config, tmp_path):
        artifacts = run_training(quick_config, out_dir=tmp_path)
        config, learners = load_run(tmp_path / "checkpoint")

        assert config == artifacts.config
        trained = checkpoint_parameters(artifacts.learners)
        loaded = checkpoint_parameters(learners)
        assert trained.keys() == loaded.keys()
        for name, value in trained.items():
            np.testing.assert_array_equal(value, loaded[name], err_msg=name)


@m.describe("Interval statistics")
class TestIntervalTotals:
    @m.context("When nothing has been trained")
    @m.it("Reports no losses")
    def test_empty(self):
        totals = IntervalTotals()
        assert totals.train_return() is None
        assert set(totals.mean_losses().values()) == {None}

    @m.context("When steps are accumulated")
    @m.it("Averages the terms that are present")
    def test_means(self):
        totals = IntervalTotals(returns=[1.0, 3.0])
        totals.losses.append(
            {
                "loss_total": 2.0,
                "loss_td_tot": 1.0,
                "loss_td_jt": None,
                "loss_instructive": None,
            }
        )
        totals.losses.append(
            {
                "loss_total": 4.0,
                "loss_td_tot": 3.0,
                "loss_td_jt": None,
                "loss_instructive": None,
            }
        )
        assert totals.train_return() == 2.0
        assert totals.mean_losses() == {
            "loss_total": 3.0,
            "loss_td_tot": 2.0,
            "loss_td_jt": None,
            "loss_instructive": None,
        }
        totals.clear()
        assert totals.train_return() is None
