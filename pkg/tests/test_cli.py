"""
Tests for the gaussperc command line.
"""

import json

import pandas as pd
import pytest

import gaussperc.cli as cli
from gaussperc.errors import InvariantViolation
from gaussperc.fileformats import read_field, read_mask


class TestSynthAndLabel:
    """Tests for the synth and label subcommands."""

    def test_synth_writes_field(self, tmp_path):
        """synth writes field_<seed>.gpf on the requested grid."""
        assert cli.main(["--out", str(tmp_path), "--seed", "3", "synth", "--cells", "32"]) == 0
        s = read_field(tmp_path / "field_3.gpf")
        assert s.grid.shape == (32, 32)
        assert s.seed == 3

    def test_synth_seed_range_with_extent(self, tmp_path):
        """--seeds a..b writes one file per seed on a grid of the given extent."""
        out = tmp_path / "fields"
        argv = ["synth", "--kernel", "bf", "--dim", "2", "--cells", "32", "--extent", "8", "--seeds", "0..3",
                "--out", str(out)]
        assert cli.main(argv) == 0
        assert sorted(p.name for p in out.iterdir()) == ["field_0.gpf", "field_1.gpf", "field_2.gpf"]
        s = read_field(out / "field_2.gpf")
        assert s.grid.shape == (32, 32)
        assert abs(s.grid.spacing[0] - 0.25) < 1e-12
        assert s.seed == 2

    def test_out_after_subcommand(self, tmp_path):
        """--out is accepted after the subcommand and leaves the global default alone otherwise."""
        parser = cli.build_parser()
        args = parser.parse_args(["synth", "--cells", "256", "--extent", "64", "--seeds", "0..400", "--out",
                                  str(tmp_path)])
        assert args.out == tmp_path
        assert args.seeds == range(0, 400)
        assert args.extent == 64.0
        assert parser.parse_args(["--out", str(tmp_path), "synth"]).out == tmp_path

    def test_bad_seed_range(self):
        """An empty or malformed seed range is a usage error."""
        parser = cli.build_parser()
        for text in ("5..5", "a..b"):
            with pytest.raises(SystemExit):
                parser.parse_args(["synth", "--seeds", text])

    def test_label_writes_table_and_mask(self, tmp_path):
        """label reads a field and writes its components and mask."""
        cli.main(["--out", str(tmp_path), "--seed", "1", "synth", "--cells", "32"])
        out = tmp_path / "labels"
        code = cli.main(["--out", str(out), "label", "--field", str(tmp_path / "field_1.gpf"), "--level", "0.5"])
        assert code == 0
        table = pd.read_csv(out / "components.csv")
        mask = read_mask(out / "mask.gpm")
        assert table["size"].sum() == mask.bits.sum()
        assert mask.level == 0.5


class TestExperimentCommands:
    """Tests for the experiment subcommands."""

    def test_crossing_outputs(self, tmp_path):
        """crossing writes a CSV table and appends a JSON report."""
        code = cli.main(["--out", str(tmp_path), "crossing", "--levels=-10,10", "--L", "4", "--n", "2"])
        assert code == 0
        table = pd.read_csv(tmp_path / "crossing.csv")
        assert list(table["probability"]) == [1.0, 0.0]
        (line,) = (tmp_path / "reports.jsonl").read_text().splitlines()
        assert json.loads(line)["experiment"] == "crossing"

    def test_kac_rice(self, capsys):
        """count --what kac-rice prints the density estimate."""
        code = cli.main(["count", "--what", "kac-rice", "--kernel", "bf", "--dim", "1"])
        assert code == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed["n_mc"] == 200_000
        assert abs(printed["density"] - 0.5513) < 0.01

    def test_config_file_with_overrides(self, tmp_path, monkeypatch):
        """Flags override the config file."""
        seen = {}

        def capture(cfg):
            seen["cfg"] = cfg
            raise InvariantViolation("stop here")

        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"n_samples": 50, "levels": [0.2]}))
        monkeypatch.setattr(cli, "uniqueness_statistics", capture)
        cli.main(["--config", str(path), "--seed", "9", "uniqueness", "--n", "5"])
        assert seen["cfg"].n_samples == 5
        assert seen["cfg"].levels == [0.2]
        assert seen["cfg"].seed == 9


class TestExitCodes:
    """Tests for main's exit codes."""

    def test_unknown_config_key(self, tmp_path):
        """A misspelled config key exits with 1."""
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"n_sample": 10}))
        assert cli.main(["--config", str(path), "crossing"]) == 1

    def test_failed_precondition(self, tmp_path):
        """A bracket that does not straddle 1/2 exits with 1."""
        code = cli.main(["--out", str(tmp_path), "--config", str(_bracket_config(tmp_path)), "threshold",
                         "--L", "4", "--n", "4"])
        assert code == 1

    def test_invariant_violation(self, tmp_path, monkeypatch):
        """A broken invariant exits with 2."""
        def broken(cfg):
            raise InvariantViolation("T exceeds N_boundary - 2")

        monkeypatch.setattr(cli, "estimate_crossing_probability", broken)
        assert cli.main(["--out", str(tmp_path), "crossing"]) == 2


def _bracket_config(tmp_path):
    path = tmp_path / "bracket.json"
    path.write_text(json.dumps({"bracket": [5.0, 6.0]}))
    return path


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
