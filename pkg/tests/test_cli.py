import argparse
import json

import pytest

from adaptive_ptdr import cli
from adaptive_ptdr.errormodel import save_model

from .conftest import flat_model


@pytest.fixture(scope="module")
def net_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli") / "net"
    assert cli.main(["gen", "--out", str(d), "--seed", "3", "--segments", "120", "--profiles", "8",
                     "--paths", "10"]) == 0
    return d


def first_path(d):
    return sorted(p["path_id"] for p in json.loads((d / "paths.json").read_text()))[0]


class TestDeparture:
    def test_seconds(self):
        assert cli.parse_departure("12345") == 12345

    def test_weekday_time(self):
        assert cli.parse_departure("tue 07:30") == 86400 + 7 * 3600 + 1800
        assert cli.parse_departure("Sunday 23:59:59") == 7 * 86400 - 1

    @pytest.mark.parametrize("bad", ["tue 25:00", "xyz 07:00", "07:30", "-5"])
    def test_bad(self, bad):
        with pytest.raises(argparse.ArgumentTypeError):
            cli.parse_departure(bad)


class TestRequestMapping:
    def test_validate_model_dir(self, tmp_path):
        args = cli.build_parser().parse_args(
            ["validate", "--network-dir", "n", "--model", str(tmp_path), "--quantile", "0.95", "--out", "o",
             "--epsilon", "0.03"])
        endpoint, body = cli.to_request(args)
        assert endpoint == "/validate"
        assert body["model"].endswith("model-q0.95.json")
        assert body["constraint"] == {"epsilon": 0.03, "confidence": 0.99, "percentile": 95.0}

    def test_compare_repeatable(self):
        args = cli.build_parser().parse_args(
            ["compare", "--network-dir", "n", "--training-records", "r.csv", "--out", "o",
             "--epsilon", "0.03", "--epsilon", "0.06", "--quantile", "0.5"])
        _, body = cli.to_request(args)
        assert body["epsilons"] == [0.03, 0.06] and body["quantiles"] == [0.5]

    def test_exit_code_rule(self):
        assert cli.exit_code_for("validate", {"all_clamped": True}) == 3
        assert cli.exit_code_for("route", {"clamped": True}) == 3
        assert cli.exit_code_for("sweep", {"all_clamped": False}) == 0


class TestMain:
    def test_usage_errors(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["route", "--network-dir", "n"])
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            cli.main(["nope"])
        assert exc.value.code == 1

    def test_pydantic_rejection_is_usage(self, net_dir, tmp_path):
        assert cli.main(["validate", "--network-dir", str(net_dir), "--model", "m.json", "--out",
                         str(tmp_path), "--epsilon", "2"]) == 1

    def test_data_error(self, tmp_path, capsys):
        code = cli.main(["route", "--network-dir", str(tmp_path / "missing"), "--model", "m.json",
                         "--path", "p", "--departure", "0"])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_unreachable_server(self, net_dir):
        assert cli.main(["--server", "http://127.0.0.1:9", "route", "--network-dir", str(net_dir),
                         "--model", "m.json", "--path", "p", "--departure", "0"]) == 2

    def test_route_ok_and_clamped(self, net_dir, tmp_path, capsys):
        calm = tmp_path / "calm.json"
        save_model(flat_model({100: 0.0, 300: 0.0, 1000: 0.0, 3000: 0.0}), calm)
        path = first_path(net_dir)
        base = ["route", "--network-dir", str(net_dir), "--path", path, "--departure", "mon 08:00"]
        assert cli.main(base + ["--model", str(calm)]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["level"] == 100 and out["path_id"] == path

        steep = tmp_path / "steep.json"
        save_model(flat_model({100: 50.0, 300: 40.0, 1000: 30.0, 3000: 20.0}), steep)
        assert cli.main(base + ["--model", str(steep), "--epsilon", "0.001"]) == 3

    def test_train_then_sweep(self, net_dir, tmp_path, capsys):
        out = tmp_path / "train"
        assert cli.main(["train", "--network-dir", str(net_dir), "--out", str(out), "--requests", "30",
                         "--repetitions", "10", "--seed", "2"]) == 0
        capsys.readouterr()
        code = cli.main(["sweep", "--network-dir", str(net_dir), "--model", str(out), "--path",
                         first_path(net_dir), "--out", str(tmp_path / "s")])
        assert code in (0, 3)
        assert json.loads(capsys.readouterr().out)["intervals"] == 672

    def test_capacity(self, tmp_path, capsys):
        from .test_capacity import CONFIG

        assert cli.main(["capacity", "--config", str(CONFIG), "--out", str(tmp_path), "--no-simulate"]) == 0
        body = json.loads(capsys.readouterr().out)
        assert [p["name"] for p in body["planning"]] == ["steady", "cap70"]
