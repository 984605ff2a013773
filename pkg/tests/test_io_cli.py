import json

import numpy as np
import pytest

from gcica.cli import run
from gcica.errors import ValidationError
from gcica.io import load_matrix, read_json, save_matrix, without_timestamp, write_manifest


def test_matrix_round_trip_is_exact(tmp_path, rng):
    a = rng.standard_normal((5, 4)) * 10.0 ** rng.integers(-300, 300, (5, 4))
    save_matrix(a, tmp_path / "a.csv", "header line")
    np.testing.assert_array_equal(load_matrix(tmp_path / "a.csv"), a)


def test_comments_skipped(tmp_path):
    (tmp_path / "m.csv").write_text("# a header\n1,2\n\n# mid comment\n3,4\n")
    np.testing.assert_array_equal(load_matrix(tmp_path / "m.csv"), [[1, 2], [3, 4]])


def test_ragged_and_bad_tokens(tmp_path):
    (tmp_path / "r.csv").write_text("1,2\n3\n")
    with pytest.raises(ValidationError, match=":2:"):
        load_matrix(tmp_path / "r.csv")
    (tmp_path / "b.csv").write_text("1,2\n3,x\n")
    with pytest.raises(ValidationError, match="column 2"):
        load_matrix(tmp_path / "b.csv")
    with pytest.raises(ValidationError):
        load_matrix(tmp_path / "missing.csv")


def test_manifest_bytes_stable(tmp_path):
    f = save_matrix(np.eye(2), tmp_path / "deep" / "dir" / "x.csv")
    m1 = write_manifest(tmp_path / "deep" / "dir" / "m.json", {"a": 1.5}, [f], timestamp=False)
    b1 = (tmp_path / "deep" / "dir" / "m.json").read_bytes()
    write_manifest(tmp_path / "deep" / "dir" / "m.json", {"a": 1.5}, [f], timestamp=False)
    assert (tmp_path / "deep" / "dir" / "m.json").read_bytes() == b1
    assert m1["files"] == ["x.csv"]
    stamped = write_manifest(tmp_path / "s.json", {"a": 1}, timestamp=True)
    assert "timestamp" in stamped and without_timestamp(stamped) == {"a": 1, "files": []}


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipe")
    assert run(["generate", "--out", str(root / "gen"), "--seed", "5"]) == 0
    assert run(["fit", "--timeseries", str(root / "gen/observations.csv"),
                "--adjacency", str(root / "gen/adjacency.csv"),
                "--out", str(root / "fit"), "--seed", "5", "--trace"]) == 0
    assert run(["metrics", "--loadings", str(root / "fit/loadings.csv"),
                "--truth", str(root / "gen/scaled_components.csv"),
                "--adjacency", str(root / "gen/adjacency.csv"),
                "--supports", str(root / "gen/manifest.json"), "--out", str(root / "met")]) == 0
    return root


def test_pipeline_recovers(pipeline):
    met = read_json(pipeline / "met/metrics.json")
    assert met["metrics"]["n_recovered"] == 5
    gen = read_json(pipeline / "gen/manifest.json")
    assert set(gen["files"]) == {"adjacency.csv", "components.csv", "scaled_components.csv", "observations.csv"}
    assert gen["synthetic"]["seed"] == 5
    fit = read_json(pipeline / "fit/manifest.json")
    assert set(fit["files"]) == {"loadings.csv", "gamma.csv", "trace.csv"}
    assert fit["solver"]["connect_weight"] == 0.01


def test_config_file_overrides_flags(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 2, "t_samples": 50}))
    assert run(["generate", "--out", str(tmp_path / "g"), "--t-samples", "80", "--config", str(cfg)]) == 0
    man = read_json(tmp_path / "g/manifest.json")
    assert man["seed"] == 2 and man["synthetic"]["t_samples"] == 50
    assert load_matrix(tmp_path / "g/observations.csv").shape == (50, 46)


def test_exit_codes(tmp_path, capsys, monkeypatch):
    assert run(["fit", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err
    assert run(["nonsense"]) == 1
    assert run(["fit", "--timeseries", str(tmp_path / "nope.csv"), "--adjacency", "x"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"not_a_field": 1}))
    assert run(["generate", "--out", str(tmp_path), "--config", str(bad)]) == 1

    import gcica.cli as cli
    from gcica.errors import NumericalError

    def explode(*a, **k):
        raise NumericalError("diverged")

    monkeypatch.setattr(cli, "generate_instance", explode)
    assert run(["generate", "--out", str(tmp_path / "x")]) == 2


def test_sweep_and_robustness_commands(tmp_path):
    assert run(["sweep", "--out", str(tmp_path / "sw"), "--sigmas", "0", "--trials", "1",
                "--synth-n-components", "2", "--synth-t-samples", "200", "--n-components", "3",
                "--max-outer", "3"]) == 0
    lines = (tmp_path / "sw/sweep.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("sigma,solver,trial")

    rng = np.random.default_rng(0)
    bank = tmp_path / "bank"
    labels = {}
    for subj in range(4):
        base = rng.standard_normal((3, 12))
        for scan in range(2):
            name = f"s{subj}_{scan}.csv"
            save_matrix(base + 0.2 * rng.standard_normal((3, 12)), bank / name)
            labels[name] = {"subject": f"s{subj}", "scan": scan}
    (bank / "labels.json").write_text(json.dumps(labels))
    assert run(["robustness", "--inputs", str(bank), "--out", str(tmp_path / "rob"),
                "--n-perm", "200", "--eta", "0.6"]) == 0
    rob = read_json(tmp_path / "rob/robustness.json")
    assert [row["k"] for row in rob["subject"]] == list(range(1, 11))
    assert rob["subject"][0]["p_value"] < 0.05
    assert len(rob["eta_sweep"]) == 11
    assert rob["files"] == [f"cluster_mean_{i}.csv" for i in range(1, 6)]
