import json

import pytest
from click.testing import CliRunner

from karelsynth.cli import main


@pytest.fixture(scope="module")
def pipeline_dirs(tmp_path_factory):
    """gen-data + train through the CLI at toy scale."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    result = runner.invoke(main, [
        "gen-data", "--out", str(root / "data"), "--seed", "3",
        "--train-size", "60", "--val-size", "12", "--test-size", "8"])
    assert result.exit_code == 0, result.output
    config = root / "train.json"
    config.write_text(json.dumps({
        "rounds": 1, "batch_size": 16, "embed_dim": 16,
        "hidden_dim": 16, "latent_dim": 8}))
    result = runner.invoke(main, [
        "train", "--data", str(root / "data"), "--out", str(root / "run"),
        "--seed", "3", "--config", str(config)])
    assert result.exit_code == 0, result.output
    return root


def test_gen_data_outputs(pipeline_dirs):
    manifest = json.loads((pipeline_dirs / "data" / "manifest.json").read_text())
    assert manifest["counts"] == {"train": 60, "val": 12, "test": 8}
    assert (pipeline_dirs / "data" / "run_manifest.json").exists()


def test_train_outputs(pipeline_dirs):
    assert (pipeline_dirs / "run" / "checkpoint.ks").exists()
    assert (pipeline_dirs / "run" / "training_log.csv").exists()
    manifest = json.loads((pipeline_dirs / "run" / "run_manifest.json").read_text())
    assert manifest["command"] == "train"
    assert manifest["params"]["config"]["rounds"] == 1


def test_reconstruct_command(pipeline_dirs, tmp_path):
    runner = CliRunner()
    result = runner.invoke(main, [
        "reconstruct", "--checkpoint", str(pipeline_dirs / "run" / "checkpoint.ks"),
        "--out", str(tmp_path), "--seeds", "1", "--max-iters", "2",
        "--method", "random"])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "reconstruct.csv").exists()


def test_generalize_command(tmp_path):
    runner = CliRunner()
    result = runner.invoke(main, [
        "generalize", "--out", str(tmp_path), "--seed", "0"])
    assert result.exit_code == 0, result.output
    assert "StairClimber" in result.output
    assert (tmp_path / "generalize.csv").exists()


def test_interpolate_command(pipeline_dirs):
    runner = CliRunner()
    result = runner.invoke(main, [
        "interpolate", "--checkpoint", str(pipeline_dirs / "run" / "checkpoint.ks"),
        "--program-a", "target_while", "--program-b", "solution_maze",
        "--steps", "4"])
    assert result.exit_code == 0, result.output
    lines = [l for l in result.output.splitlines() if l.strip()]
    assert len(lines) == 4
    assert all("DEF run m(" in line for line in lines)


def test_export_latents_command(pipeline_dirs, tmp_path):
    runner = CliRunner()
    out = tmp_path / "latents.csv"
    result = runner.invoke(main, [
        "export-latents", "--checkpoint", str(pipeline_dirs / "run" / "checkpoint.ks"),
        "--data", str(pipeline_dirs / "data"), "--split", "val",
        "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert out.exists() and "wrote 12 rows" in result.output


def test_help_lists_all_subcommands():
    runner = CliRunner()
    result = runner.invoke(main, ["--help"])
    for command in ("gen-data", "train", "reconstruct", "solve", "generalize",
                    "unseen-config", "interpolate", "export-latents", "serve"):
        assert command in result.output
