import numpy as np
import pytest

from genforest.cli import run
from genforest.data import apply_mcar, load_csv, save_mask


@pytest.fixture
def toy_csv(tmp_path, toy2d):
    p = tmp_path / "toy.csv"
    toy2d.to_csv(p)
    return p


@pytest.fixture
def model_path(tmp_path, toy_csv):
    out = tmp_path / "model.json"
    code = run(["train", "--data", str(toy_csv), "--out", str(out),
                "--trees", "2", "--splits", "3"])
    assert code == 0
    return out


class TestFlows:
    def test_train_writes_model_and_history(self, tmp_path, toy_csv):
        model = tmp_path / "m.json"
        hist = tmp_path / "h.csv"
        code = run(["train", "--data", str(toy_csv), "--out", str(model),
                    "--trees", "2", "--splits", "3", "--history", str(hist)])
        assert code == 0
        assert model.exists()
        assert len(hist.read_text().strip().split("\n")) == 4

    def test_generate(self, tmp_path, toy_csv, model_path):
        out = tmp_path / "gen.csv"
        code = run(["generate", "--model", str(model_path), "--train", str(toy_csv),
                    "--n", "20", "--out", str(out)])
        assert code == 0
        assert load_csv(out).m == 20

    def test_generate_random_order(self, tmp_path, toy_csv, model_path):
        out = tmp_path / "gen.csv"
        code = run(["generate", "--model", str(model_path), "--train", str(toy_csv),
                    "--n", "5", "--order", "random", "--out", str(out)])
        assert code == 0

    def test_density(self, tmp_path, toy_csv, model_path):
        out = tmp_path / "dens.csv"
        code = run(["density", "--model", str(model_path), "--train", str(toy_csv),
                    "--data", str(toy_csv), "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 9
        assert all(float(l.split(",")[0]) > 0 for l in lines[1:])

    def test_convert_then_generate_without_train(self, tmp_path, toy_csv, model_path):
        eogt = tmp_path / "eogt.json"
        assert run(["convert", "--model", str(model_path), "--train", str(toy_csv),
                    "--out", str(eogt)]) == 0
        out = tmp_path / "gen.csv"
        assert run(["generate", "--model", str(eogt), "--n", "10",
                    "--out", str(out)]) == 0
        assert load_csv(out).m == 10

    def test_impute_with_mask(self, tmp_path, toy2d, toy_csv, model_path):
        _, mask = apply_mcar(toy2d, 0.3, seed=1)
        mask_path = tmp_path / "mask.csv"
        save_mask(mask, mask_path)
        out = tmp_path / "imp.csv"
        code = run(["impute", "--model", str(model_path), "--train", str(toy_csv),
                    "--data", str(toy_csv), "--mask", str(mask_path),
                    "--out", str(out)])
        assert code == 0
        imputed = load_csv(out)
        assert not imputed.missing_mask().any()
        # unmasked cells survive the round trip
        for j in range(toy2d.d):
            keep = ~mask[:, j]
            assert np.allclose(imputed.columns[j][keep], toy2d.columns[j][keep])

    def test_eval_impute_metrics(self, tmp_path, toy2d, toy_csv, model_path, capsys):
        _, mask = apply_mcar(toy2d, 0.3, seed=1)
        mask_path = tmp_path / "mask.csv"
        save_mask(mask, mask_path)
        out = tmp_path / "imp.csv"
        run(["impute", "--model", str(model_path), "--train", str(toy_csv),
             "--data", str(toy_csv), "--mask", str(mask_path), "--out", str(out)])
        code = run(["eval", "impute-metrics", "--imputed", str(out),
                    "--truth", str(toy_csv), "--mask", str(mask_path)])
        assert code == 0
        assert '"rmse"' in capsys.readouterr().out

    def test_synth_with_mcar(self, tmp_path):
        out = tmp_path / "s.csv"
        mask_out = tmp_path / "s_mask.csv"
        code = run(["synth", "--name", "ringGauss", "--out", str(out),
                    "--mcar", "0.05", "--mask-out", str(mask_out)])
        assert code == 0
        ds = load_csv(out)
        assert ds.m == 1600
        assert ds.missing_mask().any()
        assert mask_out.exists()

    def test_eval_lifelike_uniform(self, tmp_path, capsys):
        data = tmp_path / "c.csv"
        run(["synth", "--name", "circGauss", "--out", str(data)])
        code = run(["eval", "lifelike", "--data", str(data), "--k", "3",
                    "--generator", "uniform", "--trees", "1", "--splits", "0"])
        assert code == 0
        assert '"fold_costs"' in capsys.readouterr().out


class TestExitCodes:
    def test_usage_error(self):
        assert run(["no-such-command"]) == 2

    def test_bad_config_value(self, tmp_path, toy_csv):
        code = run(["train", "--data", str(toy_csv), "--out", str(tmp_path / "m.json"),
                    "--trees", "0", "--splits", "1"])
        assert code == 2

    def test_unreadable_model(self, tmp_path, toy_csv):
        code = run(["generate", "--model", str(tmp_path / "missing.json"),
                    "--train", str(toy_csv), "--n", "5",
                    "--out", str(tmp_path / "g.csv")])
        assert code == 3

    def test_density_rejects_missing_cells(self, tmp_path, toy_csv, model_path, mixed_ds):
        holes = tmp_path / "holes.csv"
        mixed_ds.to_csv(holes)
        code = run(["density", "--model", str(model_path), "--train", str(toy_csv),
                    "--data", str(holes)])
        assert code == 3
