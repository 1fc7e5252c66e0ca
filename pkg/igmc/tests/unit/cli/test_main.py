import json

import pytest

from igmc.main import main
from igmc.tests.fixtures.graphs import toy_rating_rows, write_ratings

SMALL_RUN = ["--epochs", "2", "--batch-size", "16", "--ensemble-epochs", "1,2", "--layer-dims", "4,4",
             "--num-bases", "2", "--mlp-hidden", "8", "--max-nodes-per-hop", "none", "--seed", "7"]


def last_json(capsys):
    return json.loads(capsys.readouterr().out)


@pytest.fixture
def trained_dir(toy_files, tmp_path):
    train, test = toy_files
    out = tmp_path / "run"
    code = main(["train", "--train-file", str(train), "--test-file", str(test), "--out", str(out), *SMALL_RUN])
    assert code == 0
    return out


class TestMain:
    """Tests for the command-line surface and its exit codes."""

    def test_version(self, capsys):
        assert main(["--version"]) == 0
        assert "igmc" in capsys.readouterr().out.lower()

    def test_missing_command(self):
        assert main([]) == 1

    def test_unknown_flag(self, toy_files):
        train, test = toy_files
        assert main(["train", "--train-file", str(train), "--test-file", str(test), "--bogus", "1"]) == 1

    def test_invalid_config_value(self, toy_files, tmp_path):
        train, test = toy_files
        assert main(["train", "--train-file", str(train), "--test-file", str(test), "--out", str(tmp_path),
                     "--edge-dropout", "1.5"]) == 1

    def test_unknown_config_file_key(self, toy_files, tmp_path):
        train, test = toy_files
        config = tmp_path / "run.cfg"
        config.write_text("epochs=2\nwarmup=3\n", encoding="utf-8")
        assert main(["train", "--train-file", str(train), "--test-file", str(test), "--config", str(config),
                     "--out", str(tmp_path)]) == 1

    def test_unknown_preset(self, tmp_path):
        assert main(["train", "--dataset", "netflix", "--out", str(tmp_path)]) == 1

    def test_ingest(self, toy_files, tmp_path, capsys):
        train, test = toy_files
        out = tmp_path / "ingested"
        assert main(["ingest", "--train-file", str(train), "--test-file", str(test), "--out", str(out)]) == 0
        document = last_json(capsys)
        assert document["train_ratings"] == 60
        assert document["test_ratings"] == 10
        for name in ("train.tsv", "test.tsv", "users.idmap.tsv", "items.idmap.tsv", "scale.json"):
            assert (out / name).is_file()
        assert len((out / "train.tsv").read_text(encoding="utf-8").splitlines()) == 60

    def test_ingest_missing_file(self, tmp_path):
        assert main(["ingest", "--train-file", str(tmp_path / "absent.tsv"), "--out", str(tmp_path)]) == 2

    def test_ingest_duplicate_pair(self, tmp_path):
        path = write_ratings(tmp_path / "dup.tsv", [(1, 1, 3, 0), (1, 1, 4, 0)])
        assert main(["ingest", "--train-file", str(path), "--out", str(tmp_path / "out")]) == 2

    def test_train_writes_run_files(self, trained_dir):
        assert (trained_dir / "results.json").is_file()
        assert (trained_dir / "train_log.jsonl").is_file()
        assert (trained_dir / "checkpoint_epoch002.ckpt").is_file()
        assert json.loads((trained_dir / "results.json").read_text(encoding="utf-8"))["seed"] == 7

    def test_evaluate_and_predict(self, toy_files, trained_dir, tmp_path, capsys):
        train, test = toy_files
        data = ["--train-file", str(train), "--test-file", str(test)]
        checkpoints = ["--checkpoint", str(trained_dir / "checkpoint_epoch001.ckpt"),
                       "--checkpoint", str(trained_dir / "checkpoint_epoch002.ckpt")]
        capsys.readouterr()

        assert main(["evaluate", *data, *checkpoints, "--out", str(tmp_path / "eval")]) == 0
        result = last_json(capsys)
        assert result["count"] == 10
        assert result["rmse_clipped"] <= result["rmse_unclipped"]
        assert (tmp_path / "eval" / "eval.json").is_file()

        assert main(["predict", *data, *checkpoints, "--out", str(tmp_path / "pred")]) == 0
        rows = (tmp_path / "pred" / "predictions.tsv").read_text(encoding="utf-8").splitlines()
        assert len(rows) == 10
        assert all(1.0 <= float(row.split("\t")[2]) <= 5.0 for row in rows)

    def test_evaluate_missing_checkpoint(self, toy_files, tmp_path):
        train, test = toy_files
        assert main(["evaluate", "--train-file", str(train), "--test-file", str(test),
                     "--checkpoint", str(tmp_path / "none.ckpt"), "--out", str(tmp_path)]) == 2

    def test_export_subgraphs(self, toy_files, trained_dir, tmp_path):
        train, test = toy_files
        out = tmp_path / "viz"
        assert main(["export-subgraphs", "--train-file", str(train), "--test-file", str(test),
                     "--checkpoint", str(trained_dir / "checkpoint_epoch002.ckpt"), "--k", "2",
                     "--out", str(out)]) == 0
        assert len(list(out.glob("*.dot"))) == 4
        assert len(list(out.glob("*.json"))) == 4

    def test_transfer(self, toy_files, trained_dir, tmp_path, capsys):
        train, test = toy_files
        capsys.readouterr()
        assert main(["transfer", "--train-file", str(train), "--test-file", str(test),
                     "--checkpoint", str(trained_dir / "checkpoint_epoch002.ckpt"), "--rescale", "1.0",
                     "--out", str(tmp_path / "transfer")]) == 0
        document = last_json(capsys)
        assert document["result"]["count"] == 10
        assert document["spec"]["output_rescale"] == 1.0

    def test_sweep_sparsity(self, toy_files, tmp_path, capsys):
        train, test = toy_files
        out = tmp_path / "sweep"
        assert main(["sweep-sparsity", "--train-file", str(train), "--test-file", str(test), "--out", str(out),
                     "--fractions", "1.0,0.5", *SMALL_RUN]) == 0
        document = json.loads((out / "sweep.json").read_text(encoding="utf-8"))
        assert [row["keep_fraction"] for row in document] == [1.0, 0.5]

    def test_sweep_sparsity_bad_fractions(self, toy_files, tmp_path):
        train, test = toy_files
        assert main(["sweep-sparsity", "--train-file", str(train), "--test-file", str(test),
                     "--out", str(tmp_path), "--fractions", "1.0,abc"]) == 1

    def test_ablate(self, toy_files, tmp_path):
        train, test = toy_files
        out = tmp_path / "ablate"
        assert main(["ablate", "--train-file", str(train), "--test-file", str(test), "--out", str(out),
                     "--variant", "no_arr", *SMALL_RUN]) == 0
        document = json.loads((out / "ablation.json").read_text(encoding="utf-8"))
        assert document["variant"] == "no_arr"
        assert len(document["runs"]) == 1

    def test_ablate_with_content_needs_features(self, toy_files, tmp_path):
        train, test = toy_files
        assert main(["ablate", "--train-file", str(train), "--test-file", str(test), "--out", str(tmp_path),
                     "--variant", "with_content", *SMALL_RUN]) == 2

    def test_evaluate_clips_like_training_unless_told(self, toy_files, tmp_path, capsys):
        train, test = toy_files
        data = ["--train-file", str(train), "--test-file", str(test)]
        run = tmp_path / "run"
        assert main(["train", *data, "--out", str(run), *SMALL_RUN, "--clip-predictions", "false"]) == 0
        checkpoint = ["--checkpoint", str(run / "checkpoint_epoch002.ckpt")]
        capsys.readouterr()

        assert main(["evaluate", *data, *checkpoint, "--out", str(tmp_path / "a")]) == 0
        result = last_json(capsys)
        assert result["rmse"] == result["rmse_unclipped"]

        assert main(["evaluate", *data, *checkpoint, "--clip", "--out", str(tmp_path / "b")]) == 0
        result = last_json(capsys)
        assert result["rmse"] == result["rmse_clipped"]

    def test_evaluate_reuses_the_training_split(self, tmp_path, capsys):
        data_dir = tmp_path / "ml1m"
        data_dir.mkdir()
        write_ratings(data_dir / "ratings.dat", toy_rating_rows(seed=3, count=70), sep="::")
        data = ["--dataset", "ml1m", "--data-dir", str(data_dir)]
        run = tmp_path / "run"
        assert main(["train", *data, "--out", str(run), *SMALL_RUN]) == 0
        trained = json.loads((run / "results.json").read_text(encoding="utf-8"))
        checkpoints = ["--checkpoint", str(run / "checkpoint_epoch001.ckpt"),
                       "--checkpoint", str(run / "checkpoint_epoch002.ckpt")]
        capsys.readouterr()

        assert main(["evaluate", *data, *checkpoints, "--out", str(tmp_path / "eval")]) == 0
        assert last_json(capsys)["rmse_clipped"] == pytest.approx(trained["rmse_clipped"], rel=1e-9)

    def test_evaluate_rejects_another_split_seed(self, tmp_path):
        data_dir = tmp_path / "ml1m"
        data_dir.mkdir()
        write_ratings(data_dir / "ratings.dat", toy_rating_rows(seed=3, count=70), sep="::")
        data = ["--dataset", "ml1m", "--data-dir", str(data_dir)]
        run = tmp_path / "run"
        assert main(["train", *data, "--out", str(run), *SMALL_RUN]) == 0
        assert main(["evaluate", *data, "--checkpoint", str(run / "checkpoint_epoch002.ckpt"), "--seed", "3",
                     "--out", str(tmp_path / "eval")]) == 1
