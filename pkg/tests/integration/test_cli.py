import json

import pandas as pd
import pytest

from swiptfog.cli import (EXIT_INVALID_CONFIG, EXIT_OK, EXIT_UNKNOWN_SCENARIO, EXIT_UNWRITABLE_OUT, main,
                          run_scenario)
from swiptfog.scenarios import SWEEP_COLUMNS

SMALL_RUN = """\
# tiny run for the command line tests
noise_dbm = -140
realizations = 3
seed = 11
sweep_points = 4
threads = 1
"""


@pytest.fixture(autouse=True)
def fixed_version(mocker):
    return mocker.patch("swiptfog.cli.git_describe", return_value="v-test")


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "params.conf"
    path.write_text(SMALL_RUN, encoding="utf-8")
    return path


@pytest.mark.integration
class TestCommandLine:
    def test_sweep_writes_tables_and_manifest(self, tmp_path, config_file):
        out = tmp_path / "out"
        assert main(["sweep-k", "--config", str(config_file), "--out", str(out)]) == EXIT_OK

        frame = pd.read_csv(out / "sweep-k.csv")
        assert list(frame.columns) == ["k_ops", *SWEEP_COLUMNS]
        assert len(frame) == 4
        sidecar = (out / "sweep-k.columns.txt").read_text(encoding="utf-8").splitlines()
        assert [line.split(":", 1)[0] for line in sidecar] == list(frame.columns)

        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["scenario"] == "sweep-k"
        assert manifest["seed"] == 11
        assert manifest["realizations"] == 3
        assert manifest["git_describe"] == "v-test"
        assert manifest["tables"] == ["sweep-k.csv"]
        assert manifest["params"]["noise_n"] == pytest.approx(1e-17)
        assert manifest["wall_time_s"] >= 0.0

    def test_flags_override_file(self, tmp_path, config_file):
        out = tmp_path / "out"
        assert main(["sweep-dist", "--config", str(config_file), "--out", str(out),
                     "--realizations", "2", "--seed", "5"]) == EXIT_OK
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert (manifest["realizations"], manifest["seed"]) == (2, 5)

    def test_reruns_produce_identical_csv(self, tmp_path, config_file):
        for name in ("a", "b"):
            assert main(["sweep-beta", "--config", str(config_file), "--out", str(tmp_path / name)]) == EXIT_OK
        assert (tmp_path / "a" / "sweep-beta.csv").read_bytes() == (tmp_path / "b" / "sweep-beta.csv").read_bytes()

    def test_invalid_config_writes_nothing(self, tmp_path, config_file):
        out = tmp_path / "out"
        assert main(["sweep-k", "--config", str(config_file), "--out", str(out), "--realizations", "0"]) \
            == EXIT_INVALID_CONFIG
        assert not out.exists()

    def test_unknown_key_is_invalid(self, tmp_path):
        path = tmp_path / "bad.conf"
        path.write_text("warp_factor = 9\n", encoding="utf-8")
        assert run_scenario(str(path), "sweep-k", str(tmp_path / "out")) == EXIT_INVALID_CONFIG

    def test_missing_config_is_invalid(self, tmp_path):
        assert run_scenario(str(tmp_path / "absent.conf"), "sweep-k", str(tmp_path / "out")) == EXIT_INVALID_CONFIG

    def test_unknown_scenario(self, tmp_path, config_file):
        assert run_scenario(str(config_file), "sweep-q", str(tmp_path / "out")) == EXIT_UNKNOWN_SCENARIO
        with pytest.raises(SystemExit) as exc_info:
            main(["sweep-q", "--out", str(tmp_path / "out")])
        assert exc_info.value.code == EXIT_UNKNOWN_SCENARIO

    def test_unwritable_out_dir(self, tmp_path, config_file):
        blocker = tmp_path / "blocker"
        blocker.write_text("", encoding="utf-8")
        assert main(["sweep-k", "--config", str(config_file), "--out", str(blocker / "out")]) == EXIT_UNWRITABLE_OUT
