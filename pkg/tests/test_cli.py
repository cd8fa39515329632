import json
import math
import shutil

import pytest

from fracstab import cli


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def work(tmp_path, systems_dir):
    for f in systems_dir.glob("*.json"):
        shutil.copy(f, tmp_path / f.name)
    return tmp_path


def write(path, doc):
    path.write_text(json.dumps(doc))
    return path


class TestExpand:
    def test_example1(self, capsys, work):
        code, out, _ = run(capsys, "expand", work / "example1.json")
        rep = json.loads(out)
        assert code == 0
        assert rep["lifting"] == {"alpha_c": "0.31", "p": [3, 5, 4], "N": 12}
        assert len(rep["Abig"]) == 12

    def test_example2(self, capsys, work):
        code, out, _ = run(capsys, "expand", work / "example2.json")
        assert code == 0
        assert json.loads(out)["lifting"]["alpha_c"] == "0.39"
        assert json.loads(out)["lifting"]["N"] == 5

    def test_single_state(self, capsys, tmp_path):
        doc = write(tmp_path / "s.json", {"A": [[-2.5]], "orders": ["0.5"]})
        code, out, _ = run(capsys, "expand", doc)
        assert code == 0 and json.loads(out)["Abig"] == [[-2.5]]

    def test_report_to_file(self, capsys, work):
        code, out, _ = run(capsys, "expand", work / "example2.json", "-o", work / "r.json")
        assert code == 0 and out == ""
        assert json.loads((work / "r.json").read_text())["command"] == "expand"


class TestParseErrors:
    @pytest.mark.parametrize(
        "doc,needle",
        [
            ({"A": [[1.0]], "orders": [0.5]}, "orders[0]"),
            ({"A": [[1.0]], "orders": ["2.5"]}, "orders[0]"),
            ({"A": [[1.0, 2.0]], "orders": ["0.5"]}, "'A'"),
            ({"A": [[1.0]]}, "'orders'"),
            ({"A": [[1.0]], "orders": ["0.5"], "x0": [1, 2]}, "'x0'"),
            ({"A": [[1.0]], "orders": ["0.5"], "bogus": 1}, "bogus"),
            ({"A": [[1.0]], "orders": ["0.5"], "B": [[1.0]], "C": [[1.0]], "controller": {"Ac": [[1.0]], "nc": 1}}, "controller.Dc"),
        ],
    )
    def test_field_diagnostics(self, capsys, tmp_path, doc, needle):
        code, _, err = run(capsys, "expand", write(tmp_path / "bad.json", doc))
        assert code == 2
        assert needle in err

    def test_line_diagnostic(self, capsys, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"A": [[1.0]],\n "orders": ["0.5"]\n "x0": [1]}')
        code, _, err = run(capsys, "expand", p)
        assert code == 2 and "line 3" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "stability", tmp_path / "nope.json")
        assert code == 2 and "cannot read" in err

    def test_lmi_needs_fractional_base(self, capsys, tmp_path):
        doc = write(tmp_path / "a.json", {"A": [[-1.0]], "orders": ["1.5"]})
        code, _, err = run(capsys, "stability", doc, "--method", "lmi")
        assert code == 2 and "spectral" in err
        code, out, _ = run(capsys, "stability", doc, "--method", "spectral")
        assert code == 0


class TestStability:
    def test_example1_both_unstable(self, capsys, work):
        code, out, _ = run(capsys, "stability", work / "example1.json", "--method", "both")
        rep = json.loads(out)
        assert code == 1
        assert rep["verdicts"]["spectral"]["status"] == rep["verdicts"]["lmi"]["status"] == "unstable"

    def test_example2_both_stable(self, capsys, work):
        code, out, _ = run(capsys, "stability", work / "example2.json")
        assert code == 0
        assert set(json.loads(out)["verdicts"]) == {"spectral", "lmi"}

    def test_example3_spectral(self, capsys, work):
        code, out, _ = run(capsys, "stability", work / "example3.json", "--method", "spectral")
        rep = json.loads(out)
        assert code == 1 and "lmi" not in rep["verdicts"]

    def test_inconclusive(self, capsys, tmp_path):
        phi = 0.5 * math.pi / 2 + 3e-10
        A = [[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]]
        doc = write(tmp_path / "edge.json", {"A": A, "orders": ["0.5", "0.5"]})
        code, out, _ = run(capsys, "stability", doc, "--method", "lmi")
        assert code == 3
        assert json.loads(out)["verdicts"]["lmi"]["status"] == "inconclusive"

    def test_disagreement_alarm(self, capsys, work, monkeypatch):
        from fracstab.spectral import StabilityVerdict

        # a corrupted LMI backend must be caught, not reported as a verdict
        monkeypatch.setattr(cli, "lmi_verdict", lambda *a, **k: StabilityVerdict("stable", "lmi", 1.0, 0.0))
        code, out, err = run(capsys, "stability", work / "example1.json")
        assert code == 4
        assert "LMI says stable" in err

    def test_eigen_plot(self, capsys, work):
        svg = work / "eig.svg"
        code, _, _ = run(capsys, "stability", work / "example1.json", "--method", "spectral", "--plot", svg)
        text = svg.read_text()
        assert code == 1 and text.startswith("<svg") and text.count("<circle") == 12

    def test_deterministic(self, capsys, work):
        reports = []
        for _ in range(2):
            _, out, _ = run(capsys, "stability", work / "example2.json")
            rep = json.loads(out)
            rep.pop("timing")
            reports.append(json.dumps(rep))
        assert reports[0] == reports[1]


class TestSynthesize:
    def test_static_and_roundtrip(self, capsys, work):
        ctrl = work / "ctrl.json"
        code, out, _ = run(capsys, "synthesize", work / "example3.json", "--nc", 0, "--controller-out", ctrl)
        rep = json.loads(out)
        assert code == 0
        assert rep["synthesis"]["closed_loop"]["status"] == "stable"
        assert json.loads(ctrl.read_text())["controller"]["nc"] == 0
        csv = work / "cl.csv"
        code, _, _ = run(capsys, "simulate", ctrl, "--closed-loop", "--t-final", 20, "-o", csv)
        assert code == 0
        last = [float(v) for v in csv.read_text().splitlines()[-1].split(",")]
        assert math.hypot(last[1], last[3]) < 0.05 * math.sqrt(2)

    def test_dynamic(self, capsys, work):
        code, out, _ = run(capsys, "synthesize", work / "example3.json", "--nc", 1, "-o", work / "r.json")
        assert code == 0 and out == ""
        assert (work / "example3.nc1.json").exists()

    def test_no_authority(self, capsys, tmp_path):
        doc = write(tmp_path / "b0.json", {"A": [[1.0]], "B": [[0.0]], "C": [[1.0]], "orders": ["0.5"]})
        code, out, err = run(capsys, "synthesize", doc, "--nc", 0)
        assert code == 1
        assert "sufficient only" in err
        assert json.loads(out)["synthesis"]["status"] == "infeasible"

    def test_needs_b_and_c(self, capsys, work):
        code, _, err = run(capsys, "synthesize", work / "example1.json", "--nc", 0)
        assert code == 2

    def test_recovery_failure_exit(self, capsys, work, monkeypatch):
        from fracstab.synthesis import RecoveryError

        def boom(*a, **k):
            raise RecoveryError("Q_S is numerically singular")

        monkeypatch.setattr(cli, "synthesize", boom)
        code, out, err = run(capsys, "synthesize", work / "example3.json", "--nc", 0)
        assert code == 4 and "singular" in err


class TestSimulate:
    def test_open_loop_diverges(self, capsys, work):
        csv = work / "ol.csv"
        code, _, err = run(capsys, "simulate", work / "example3.json", "--t-final", 20, "-o", csv)
        assert code == 1 and "divergence" in err
        lines = csv.read_text().splitlines()
        assert lines[0].startswith("t,z_1") and lines[-1].startswith("# diverged")

    def test_zero_state(self, capsys, work):
        code, out, _ = run(capsys, "simulate", work / "example1.json", "--t-final", 1)
        rows = out.splitlines()[1:]
        assert code == 0 and len(rows) == 101
        assert all(float(v) == 0.0 for r in rows for v in r.split(",")[1:])

    def test_closed_loop_reference_with_plots(self, capsys, work):
        svg, eig = work / "x.svg", work / "e.svg"
        code, out, _ = run(
            capsys, "simulate", work / "example3_nc1.json", "--closed-loop", "--scheme", "implicit",
            "--t-final", 20, "--plot", svg, "--eig-plot", eig,
        )
        assert code == 0
        assert svg.read_text().count("<polyline") == 3
        assert eig.read_text().count("<circle") == 8

    def test_closed_loop_needs_controller(self, capsys, work):
        code, _, err = run(capsys, "simulate", work / "example3.json", "--closed-loop")
        assert code == 2 and "controller" in err

    def test_deterministic_csv(self, capsys, work):
        outs = [run(capsys, "simulate", work / "example3_nc0.json", "--closed-loop", "--t-final", 2)[1] for _ in range(2)]
        assert outs[0] == outs[1]


def test_bad_flag(capsys, work):
    with pytest.raises(SystemExit) as info:
        cli.main(["stability", str(work / "example1.json"), "--method", "magic"])
    assert info.value.code == 2
