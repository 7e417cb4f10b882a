import csv

import numpy as np
import pytest

from facekit.cli import main
from facekit.dataset import load_pgm, read_manifest
from facekit.experiments import ExperimentConfig, parse_config_text
from facekit.errors import ConfigError


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def manifest(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--classes", "5", "--per-class", "6", "--rows", "12", "--cols", "10",
                 "--class-sep", "1.0", "--noise", "0.4", "--seed", "7", "--out", str(root)]) == 0
    return root / "manifest.txt"


def small(manifest, out, *extra):
    return ["--dataset", str(manifest), "--out", str(out), "--per-class-train", "3",
            "--per-class-test", "3", "--t", "6", "--d", "2", "--d-original", "3", *extra]


def test_synth_writes_loadable_dataset(manifest):
    ds = read_manifest(manifest)
    assert len(ds) == 30 and ds.shape == (12, 10) and ds.class_count == 5
    assert ds.images.min() >= 0 and ds.images.max() <= 255


def test_synth_ascii(tmp_path):
    assert main(["synth", "--classes", "2", "--per-class", "1", "--rows", "3", "--cols", "2",
                 "--out", str(tmp_path), "--ascii"]) == 0
    assert (tmp_path / "img0.pgm").read_bytes().startswith(b"P2")
    assert load_pgm(tmp_path / "img1.pgm").shape == (3, 2)


def test_table(manifest, tmp_path):
    assert main(["table", *small(manifest, tmp_path, "--repeats", "2", "--methods", "R2DLDA,B2DPCA")]) == 0
    rows = read_csv(tmp_path / "table.csv")
    assert len(rows) == 2 * 2 * 3
    assert list(rows[0]) == ["method", "metric", "voting", "t", "d", "k", "b", "repeats",
                             "mean", "sd", "se", "runs"]
    for row in rows:
        runs = [float(a) for a in row["runs"].split(";")]
        assert len(runs) == 2
        assert float(row["mean"]) == pytest.approx(np.mean(runs))
        assert 0 <= float(row["mean"]) <= 1
    original = [r for r in rows if r["voting"] == "original"]
    assert all(r["t"] == "1" and r["d"] == "3" for r in original)
    assert b"\r\n" not in (tmp_path / "table.csv").read_bytes()


def test_single_repeat_has_zero_spread(manifest, tmp_path):
    assert main(["table", *small(manifest, tmp_path, "--repeats", "1", "--methods", "L2DLDA",
                                 "--metrics", "cosine", "--votings", "weighted")]) == 0
    (row,) = read_csv(tmp_path / "table.csv")
    assert float(row["sd"]) == 0.0 and float(row["se"]) == 0.0


def test_ari_report(manifest, tmp_path):
    assert main(["ari-report", *small(manifest, tmp_path, "--methods", "B2DLDA"), "--svg"]) == 0
    rows = read_csv(tmp_path / "ari.csv")
    assert len(rows) == 6 * 2
    for row in rows:
        assert len(row["left_indices"].split()) == 2 and len(row["right_indices"].split()) == 2
        assert float(row["weight"]) == pytest.approx(max(float(row["ari"]), 1e-6) ** 2)
    assert (tmp_path / "ari.svg").read_text().startswith("<svg")


def test_b_sweep_zero_matches_unweighted(manifest, tmp_path):
    args = small(manifest, tmp_path, "--repeats", "3", "--methods", "R2DPCA", "--metrics", "cosine")
    assert main(["b-sweep", *args, "--b-values", "0,1,4", "--svg"]) == 0
    sweep = read_csv(tmp_path / "b_sweep.csv")
    assert [float(r["b"]) for r in sweep] == [0.0, 1.0, 4.0]
    assert main(["table", *args, "--votings", "unweighted"]) == 0
    (table,) = read_csv(tmp_path / "table.csv")
    assert float(sweep[0]["mean"]) == float(table["mean"])
    assert (tmp_path / "b_sweep.svg").exists()


def test_entropy_sweep(manifest, tmp_path):
    args = small(manifest, tmp_path, "--repeats", "1", "--methods", "R2DPCA", "--metrics", "cosine")
    assert main(["entropy-sweep", *args, "--over", "d", "--values", "1,10", "--svg"]) == 0
    rows = read_csv(tmp_path / "entropy_d.csv")
    assert [r["value"] for r in rows] == ["1", "10"]
    assert float(rows[1]["entropy"]) == 0.0  # every classifier uses the whole spectrum
    assert main(["entropy-sweep", *args, "--over", "t", "--values", "2"]) == 0
    (row,) = read_csv(tmp_path / "entropy_t.csv")
    assert 0.0 <= float(row["entropy"]) <= 1.0
    assert main(["entropy-sweep", *args, "--over", "t", "--values", "1"]) == 2


def test_reconstruct(manifest, tmp_path):
    assert main(["reconstruct", "--dataset", str(manifest), "--out", str(tmp_path),
                 "--image", "4", "--d-values", "1,3,6,10"]) == 0
    rows = read_csv(tmp_path / "reconstruction.csv")
    errors = [float(r["frobenius_error"]) for r in rows]
    assert all(b <= a + 1e-9 for a, b in zip(errors, errors[1:]))
    assert errors[-1] < 1e-8
    mosaic = load_pgm(tmp_path / "reconstruction.pgm")
    assert mosaic.shape == (12, 50)
    original = read_manifest(manifest).images[4]
    assert np.array_equal(mosaic[:, :10], original)
    assert np.array_equal(mosaic[:, 40:], original)


def test_reconstruct_bad_index(manifest, tmp_path, capsys):
    code = main(["reconstruct", "--dataset", str(manifest), "--out", str(tmp_path),
                 "--d-values", "1", "--method", "R2DPCA", "--image", "999"])
    assert code == 2
    assert "error" in capsys.readouterr().err
    assert not (tmp_path / "reconstruction.csv").exists()


def test_split(manifest, tmp_path):
    assert main(["split", *small(manifest, tmp_path, "--seed", "4")]) == 0
    lines = (tmp_path / "split.txt").read_text().splitlines()
    assert lines[0].startswith("#")
    assert sum(l.startswith("train") for l in lines) == 15
    assert sum(l.startswith("test") for l in lines) == 15


def test_error_leaves_no_csv(manifest, tmp_path, capsys):
    # 7 images per class are requested but only 6 exist
    code = main(["table", *small(manifest, tmp_path, "--per-class-train", "4", "--per-class-test", "3")])
    assert code == 2
    assert "error" in capsys.readouterr().err
    assert not list(tmp_path.iterdir())


def test_missing_dataset_fails(tmp_path):
    assert main(["table", "--out", str(tmp_path)]) == 2
    assert main(["table", "--dataset", str(tmp_path / "none.txt"), "--out", str(tmp_path)]) == 2


def test_config_file_and_overrides(manifest, tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text(f"# small run\ndataset = {manifest}\nmethods = R2DLDA\nmetrics = cosine\n"
                        "votings = weighted\nper_class_train = 3\nper_class_test = 3\n"
                        "t = 4\nd = 2\nrepeats = 2\nb = 1.5\n")
    out = tmp_path / "out"
    assert main(["table", "--config", str(cfg_file), "--out", str(out), "--repeats", "1"]) == 0
    (row,) = read_csv(out / "table.csv")
    assert (row["repeats"], row["b"], row["t"]) == ("1", "1.5", "4")


def test_config_parsing_errors():
    assert parse_config_text("a = 1 # note\n\n b=x") == {"a": "1", "b": "x"}
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"colour": "red"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping({"t": "many"})
    with pytest.raises(ConfigError):
        ExperimentConfig(metrics=("chebyshev",))
    assert ExperimentConfig.from_mapping({"equalize": "yes", "k": "3"}).k == 3
