from __future__ import annotations

import pytest
import yaml

from promptvid.cli import main
from promptvid.pipeline import load_manifest

TINY = {
    "prompts": [{"text": "a dog", "frames": 2}, {"text": "a cat", "frames": 2}],
    "width": 64,
    "height": 64,
    "seed": 0,
    "temperature": 50.0,
    "optimizer": {
        "iterations_first_frame": 4,
        "iterations_per_frame": 3,
        "views": 6,
        "scorer_input_size": 64,
    },
}


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(TINY))
    return path


class TestValidate:
    def test_good_config_exits_zero_without_writing(self, config_file, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["validate", "--config", str(config_file), "--out", str(out)]) == 0
        assert not out.exists()
        assert "config OK" in capsys.readouterr().out

    def test_validate_only_flag_on_generate(self, config_file, tmp_path):
        out = tmp_path / "out"
        code = main(["generate", "--config", str(config_file), "--out", str(out), "--validate-only"])
        assert code == 0
        assert not out.exists()

    def test_bad_config_lists_every_violation(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text(yaml.safe_dump({"prompts": [], "temperature": 120, "width": 0}))
        assert main(["validate", "--config", str(path)]) == 2
        err = capsys.readouterr().err
        assert "prompts" in err and "temperature" in err and "width" in err

    def test_temperature_flag_out_of_range_rejected(self, config_file, capsys):
        assert main(["validate", "--config", str(config_file), "--temperature", "120"]) == 2
        assert "temperature" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "nope.yaml")]) == 2


class TestGenerate:
    def test_generate_writes_frames_manifest_and_progress(self, config_file, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["generate", "--config", str(config_file), "--out", str(out)]) == 0
        captured = capsys.readouterr().out
        assert (out / "manifest.json").exists()
        assert len(list((out / "raw").glob("*.png"))) == 4
        assert len(list((out / "post").glob("*.png"))) == 4
        assert "frame" in captured and "fps" in captured

    def test_flag_overrides_reach_the_manifest(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert main([
            "generate", "--config", str(config_file), "--out", str(out),
            "--seed", "9", "--temperature", "25", "--fps", "8",
        ]) == 0
        manifest = load_manifest(out / "manifest.json")
        assert manifest.config["seed"] == 9
        assert manifest.config["temperature"] == 25.0
        assert manifest.config["fps"] == 8.0

    def test_resume_without_checkpoint_fails(self, config_file, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["resume", "--config", str(config_file), "--out", str(out)])
        assert code == 1
        assert "checkpoint" in capsys.readouterr().err

    def test_resume_subcommand_completes_run(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert main(["generate", "--config", str(config_file), "--out", str(out)]) == 0
        full_manifest = load_manifest(out / "manifest.json")
        # checkpoint is at the final frame; resume is an empty continuation
        assert main(["resume", "--config", str(config_file), "--out", str(out)]) == 0
        again = load_manifest(out / "manifest.json")
        assert [r.raw_sha256 for r in again.records] == [r.raw_sha256 for r in full_manifest.records]

    def test_generate_resume_flag_equivalent(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert main(["generate", "--config", str(config_file), "--out", str(out)]) == 0
        assert main(["generate", "--config", str(config_file), "--out", str(out), "--resume"]) == 0


class TestReport:
    def test_report_renders_csv_and_figures(self, config_file, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["generate", "--config", str(config_file), "--out", str(out)]) == 0
        assert main(["report", "--out", str(out)]) == 0
        report_dir = out / "report"
        assert (report_dir / "report.csv").exists()
        assert (report_dir / "losses.png").exists()
        assert (report_dir / "timings.png").exists()
        captured = capsys.readouterr().out
        assert "fps" in captured
        header = (report_dir / "report.csv").read_text().splitlines()[0]
        assert header.startswith("index,prompts,loss_initial")

    def test_report_requires_location(self, capsys):
        assert main(["report"]) == 2

    def test_report_missing_manifest(self, tmp_path):
        assert main(["report", "--out", str(tmp_path)]) == 1
