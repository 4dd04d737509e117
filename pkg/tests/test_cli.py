import json
import re
import subprocess
import sys

import numpy as np
import pytest

from shapbound import cli

from helpers import make_affine_net, make_net


def write_fixture(tmp_path, rng, net, num_background=4, header=True):
    n = net.input_dim
    net_path = tmp_path / "net.json"
    doc = {"input_dim": n, "output_dim": net.output_dim, "layers": []}
    for layer in net.layers:
        if hasattr(layer, "weight"):
            doc["layers"].append({
                "type": "affine",
                "weight": layer.weight.tolist(),
                "bias": layer.bias.tolist(),
            })
        else:
            doc["layers"].append({"type": layer.kind})
    net_path.write_text(json.dumps(doc))

    x = rng.normal(size=n)
    x_path = tmp_path / "x.csv"
    lines = []
    if header:
        lines.append(",".join(f"f{i}" for i in range(n)))
    lines.append(",".join(repr(float(v)) for v in x))
    x_path.write_text("\n".join(lines) + "\n")

    bg = rng.normal(size=(num_background, n))
    bg_path = tmp_path / "bg.csv"
    bg_path.write_text(
        "\n".join(",".join(repr(float(v)) for v in row) for row in bg) + "\n"
    )
    return str(net_path), str(x_path), str(bg_path)


@pytest.fixture
def relu_fixture(tmp_path):
    rng = np.random.default_rng(0)
    net = make_net(rng, 5, [6])
    return write_fixture(tmp_path, rng, net)


class TestBoundsCommand:
    def test_successful_run_writes_json(self, relu_fixture, tmp_path):
        net, x, bg = relu_fixture
        out = tmp_path / "result.json"
        code = cli.main([
            "bounds", "--network", net, "--instance", x, "--background", bg,
            "--value-fn", "marginal", "--target-output", "1",
            "--hr-percent", "10", "--timeout", "600",
            "--batch", "64", "--out", str(out),
        ])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["status"] in ("reached_hr", "converged_exact")
        assert len(doc["features"]) == 5
        for rec in doc["features"]:
            assert rec["lb"] <= rec["ub"]
            assert rec["half_range"] == pytest.approx((rec["ub"] - rec["lb"]) / 2)
            assert rec["midpoint"] == pytest.approx((rec["ub"] + rec["lb"]) / 2)

    def test_missing_network_flag_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["bounds", "--instance", "x.csv", "--background", "bg.csv",
                      "--hr-percent", "10"])
        assert exc.value.code == 2

    def test_baseline_with_multirow_background(self, relu_fixture):
        net, x, bg = relu_fixture
        code = cli.main([
            "bounds", "--network", net, "--instance", x, "--background", bg,
            "--value-fn", "baseline", "--hr-percent", "10",
        ])
        assert code == 2

    def test_no_stop_criterion_is_usage_error(self, relu_fixture):
        net, x, bg = relu_fixture
        code = cli.main([
            "bounds", "--network", net, "--instance", x, "--background", bg,
        ])
        assert code == 2

    def test_unreadable_network_is_io_error(self, relu_fixture):
        _, x, bg = relu_fixture
        code = cli.main([
            "bounds", "--network", "/nonexistent/net.json",
            "--instance", x, "--background", bg, "--hr-percent", "10",
        ])
        assert code == 3

    def test_malformed_network_is_io_error(self, relu_fixture, tmp_path):
        _, x, bg = relu_fixture
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        code = cli.main([
            "bounds", "--network", str(bad),
            "--instance", x, "--background", bg, "--hr-percent", "10",
        ])
        assert code == 3

    def test_reproducible_except_wall_seconds(self, relu_fixture, tmp_path):
        net, x, bg = relu_fixture
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            assert cli.main([
                "bounds", "--network", net, "--instance", x,
                "--background", bg, "--delta", "0.01", "--batch", "16",
                "--out", str(out),
            ]) == 0
            outs.append(out.read_text())
        normalise = lambda s: re.sub(r'"wall_seconds": [^,\n]+', '"wall_seconds": X', s)
        assert normalise(outs[0]) == normalise(outs[1])

    def test_trace_csv_monotone_gap(self, relu_fixture, tmp_path):
        net, x, bg = relu_fixture
        trace = tmp_path / "trace.csv"
        assert cli.main([
            "bounds", "--network", net, "--instance", x, "--background", bg,
            "--delta", "0", "--batch", "32",
            "--out", str(tmp_path / "r.json"), "--trace", str(trace),
            "--trace-features",
        ]) == 0
        lines = trace.read_text().strip().splitlines()
        header = lines[0].split(",")
        assert header[:5] == ["iteration", "active_branches", "pruned_total",
                              "max_gap", "wall_seconds"]
        assert "lb_1" in header and "ub_5" in header
        gaps = [float(line.split(",")[3]) for line in lines[1:]]
        assert all(a >= b for a, b in zip(gaps, gaps[1:]))

    def test_stdout_output(self, relu_fixture, capsys):
        net, x, bg = relu_fixture
        assert cli.main([
            "bounds", "--network", net, "--instance", x, "--background", bg,
            "--hr-percent", "1000",
        ]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["status"] == "reached_hr"


class TestExactCommand:
    def test_affine_gives_tight_bounds(self, tmp_path):
        rng = np.random.default_rng(1)
        net = make_affine_net(rng, 4)
        net_p, x_p, bg_p = write_fixture(tmp_path, rng, net)
        out = tmp_path / "exact.json"
        assert cli.main([
            "exact", "--network", net_p, "--instance", x_p,
            "--background", bg_p, "--batch", "64", "--out", str(out),
        ]) == 0
        doc = json.loads(out.read_text())
        assert doc["status"] == "converged_exact"
        for rec in doc["features"]:
            assert rec["ub"] - rec["lb"] <= 1e-9

    def test_floats_roundtrip_17_digits(self, tmp_path):
        rng = np.random.default_rng(2)
        net = make_affine_net(rng, 3)
        net_p, x_p, bg_p = write_fixture(tmp_path, rng, net)
        out = tmp_path / "exact.json"
        cli.main(["exact", "--network", net_p, "--instance", x_p,
                  "--background", bg_p, "--out", str(out)])
        doc = json.loads(out.read_text())
        x = np.loadtxt(x_p, delimiter=",", skiprows=1)
        zbar = np.loadtxt(bg_p, delimiter=",").mean(axis=0)
        w = net.layers[0].weight[0]
        for i, rec in enumerate(doc["features"]):
            assert rec["lb"] == pytest.approx(w[i] * (x[i] - zbar[i]), abs=1e-9)


class TestOracleCommand:
    def test_matches_exact_command(self, relu_fixture, tmp_path):
        net, x, bg = relu_fixture
        oracle_out = tmp_path / "oracle.json"
        exact_out = tmp_path / "exact.json"
        assert cli.main(["oracle", "--network", net, "--instance", x,
                         "--background", bg, "--out", str(oracle_out)]) == 0
        assert cli.main(["exact", "--network", net, "--instance", x,
                         "--background", bg, "--out", str(exact_out)]) == 0
        phis = {r["index"]: r["phi"] for r in json.loads(oracle_out.read_text())["features"]}
        for rec in json.loads(exact_out.read_text())["features"]:
            assert phis[rec["index"]] == pytest.approx(rec["lb"], abs=1e-6)

    def test_too_many_features_is_usage_error(self, tmp_path):
        rng = np.random.default_rng(3)
        net = make_affine_net(rng, 25)
        net_p, x_p, bg_p = write_fixture(tmp_path, rng, net, num_background=1)
        code = cli.main(["oracle", "--network", net_p, "--instance", x_p,
                         "--background", bg_p])
        assert code == 2


class TestCheckCommand:
    def test_contained_exit_zero(self, relu_fixture, tmp_path):
        net, x, bg = relu_fixture
        out = tmp_path / "check.json"
        code = cli.main([
            "check", "--network", net, "--instance", x, "--background", bg,
            "--delta", "0", "--batch", "64", "--out", str(out),
        ])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["contained"] is True
        assert doc["max_abs_error"] <= 1e-6


class TestGroupsFlag:
    def test_grouped_run(self, tmp_path):
        rng = np.random.default_rng(4)
        net = make_net(rng, 6, [5])
        net_p, x_p, bg_p = write_fixture(tmp_path, rng, net)
        groups = tmp_path / "groups.json"
        groups.write_text("[[1, 2], [3, 6], [4, 5]]")
        out = tmp_path / "res.json"
        assert cli.main([
            "exact", "--network", net_p, "--instance", x_p, "--background", bg_p,
            "--groups", str(groups), "--out", str(out),
        ]) == 0
        doc = json.loads(out.read_text())
        assert len(doc["features"]) == 3

    def test_bad_group_index(self, tmp_path):
        rng = np.random.default_rng(5)
        net = make_net(rng, 3, [4])
        net_p, x_p, bg_p = write_fixture(tmp_path, rng, net)
        groups = tmp_path / "groups.json"
        groups.write_text("[[0, 1], [2, 3]]")  # 0 is not a valid 1-based index
        assert cli.main([
            "exact", "--network", net_p, "--instance", x_p, "--background", bg_p,
            "--groups", str(groups),
        ]) == 2


class TestEntryPoint:
    def test_module_invocation(self, relu_fixture, tmp_path):
        net, x, bg = relu_fixture
        out = tmp_path / "res.json"
        proc = subprocess.run(
            [sys.executable, "-m", "shapbound.cli", "bounds",
             "--network", net, "--instance", x, "--background", bg,
             "--hr-percent", "1000", "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert json.loads(out.read_text())["status"] == "reached_hr"

    def test_headerless_instance(self, tmp_path):
        rng = np.random.default_rng(6)
        net = make_net(rng, 4, [4])
        net_p, x_p, bg_p = write_fixture(tmp_path, rng, net, header=False)
        assert cli.main([
            "bounds", "--network", net_p, "--instance", x_p,
            "--background", bg_p, "--hr-percent", "1000",
            "--out", str(tmp_path / "o.json"),
        ]) == 0
