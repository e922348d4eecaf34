import hashlib

import numpy as np
import pytest

from alsc import cli, features, synth
from alsc.cloud import ingest


def run(*argv):
    return cli.main([str(a) for a in argv])


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    synth.five_class_scene(seed=5, size=50).write(d / "scene.ini")
    assert run("synth", d / "scene.ini", d / "cloud.txt") == 0
    return d


def _pipeline(d, tag):
    assert run("features", d / "cloud.txt", d / f"f{tag}.txt", "--radius", 2) == 0
    assert run("train", d / f"f{tag}.txt", d / f"t{tag}.tree", "--size", 3000) == 0
    assert run("classify", d / f"f{tag}.txt", d / f"t{tag}.tree", d / f"p{tag}.txt") == 0
    assert run("evaluate", d / f"f{tag}.txt", d / f"p{tag}.txt", d / f"e{tag}",
               "--plan", d / f"t{tag}.plan") == 0
    return [d / f"f{tag}.txt", d / f"t{tag}.tree", d / f"t{tag}.plan", d / f"p{tag}.txt",
            d / f"e{tag}" / "confusion.csv", d / f"e{tag}" / "mcr.txt"]


def test_full_pipeline_is_reproducible(work, capsys):
    a = _pipeline(work, "a")
    out = capsys.readouterr().out
    b = _pipeline(work, "b")
    assert [sha(p) for p in a] == [sha(p) for p in b]
    mcr_line = (work / "ea" / "mcr.txt").read_text().strip()
    assert mcr_line.startswith("MCR 0.") and len(mcr_line) == 9
    assert mcr_line in out
    n = len(ingest(work / "cloud.txt"))
    assert len(features.read_features(work / "fa.txt")) == n


def test_synth_rerun_same_checksum(work):
    assert run("synth", work / "scene.ini", work / "again.txt") == 0
    assert sha(work / "again.txt") == sha(work / "cloud.txt")


def test_synth_zero_extent(tmp_path, capsys):
    (tmp_path / "bad.ini").write_text("[scene]\nextent = 0 0\n")
    assert run("synth", tmp_path / "bad.ini", tmp_path / "x.txt") == 2
    assert "extent" in capsys.readouterr().err
    assert not (tmp_path / "x.txt").exists()


def test_missing_beam_columns(tmp_path, capsys):
    (tmp_path / "c.txt").write_text("x,y,z,class_code\n0,0,0,2\n1,0,0,2\n0,1,0,2\n")
    assert run("features", tmp_path / "c.txt", tmp_path / "f.txt", "--border-mode", "beam") == 2
    err = capsys.readouterr().err
    assert "vx" in err and "vy" in err and "vz" in err


def test_all_six_meter_config_is_constant_baseline(work, tmp_path):
    (tmp_path / "r.ini").write_text("[neighborhood]\ndefault = 6.0\n")
    assert run("features", work / "cloud.txt", tmp_path / "a.txt", "--radii", tmp_path / "r.ini") == 0
    assert run("features", work / "cloud.txt", tmp_path / "b.txt", "--radius", 6) == 0
    assert sha(tmp_path / "a.txt") == sha(tmp_path / "b.txt")


def test_classify_schema_mismatch(work, tmp_path):
    assert run("features", work / "cloud.txt", tmp_path / "f.txt", "--radius", 1.5) == 0
    assert run("train", tmp_path / "f.txt", tmp_path / "t.tree", "--size", 2000,
               "--columns", "Planarity,EchoRatio") == 0
    fm = features.read_features(tmp_path / "f.txt")
    keep = [i for i, c in enumerate(fm.names) if c != "EchoRatio"]
    fm2 = features.FeatureMatrix([fm.names[i] for i in keep], fm.values[:, keep],
                                 fm.causes[:, keep], labels=fm.labels, point_ids=fm.point_ids)
    features.write_features(tmp_path / "g.txt", fm2)
    assert run("classify", tmp_path / "g.txt", tmp_path / "t.tree", tmp_path / "p.txt") == 2


def test_separable_training_file_scores_zero(tmp_path, capsys):
    rng = np.random.default_rng(0)
    x, y = rng.uniform(0, 40, 4000), rng.uniform(0, 40, 4000)
    up = x > 20
    z = np.where(up, 10.0, 0.0) + rng.normal(0, 0.01, 4000)
    lines = ["x,y,z,amplitude,class_code"] + [f"{a},{b},{c},{200 if u else 50},{8 if u else 2}"
                                    for a, b, c, u in zip(x, y, z, up)]
    (tmp_path / "c.txt").write_text("\n".join(lines) + "\n")
    assert run("features", tmp_path / "c.txt", tmp_path / "f.txt", "--radius", 1) == 0
    assert run("train", tmp_path / "f.txt", tmp_path / "t.tree", "--columns", "amplitude") == 0
    assert run("classify", tmp_path / "f.txt", tmp_path / "t.tree", tmp_path / "p.txt") == 0
    assert run("evaluate", tmp_path / "f.txt", tmp_path / "p.txt", tmp_path / "e") == 0
    assert (tmp_path / "e" / "mcr.txt").read_text().strip() == "MCR 0.000"


def test_optimize_single_replication_warns(work, tmp_path, caplog):
    (tmp_path / "ga.ini").write_text("[ga]\npopulation = 10\ngenerations = 2\n")
    code = run("optimize-radii", work / "cloud.txt", tmp_path / "o", "--params", tmp_path / "ga.ini",
               "--sample", 3000, "--train-size", 500)
    assert code == 0
    assert "no stability grid" in caplog.text
    assert not (tmp_path / "o" / "stability_grid.csv").exists()
    hist = (tmp_path / "o" / "history_0.csv").read_text().splitlines()
    assert hist[0] == "generation,best,mean,best_so_far" and len(hist) == 3


def test_optimize_two_replications_write_grid(work, tmp_path):
    (tmp_path / "ga.ini").write_text("[ga]\npopulation = 10\ngenerations = 2\n")
    assert run("optimize-radii", work / "cloud.txt", tmp_path / "o", "--params", tmp_path / "ga.ini",
               "--sample", 3000, "--train-size", 500, "--replications", 2) == 0
    grid = (tmp_path / "o" / "stability_grid.csv").read_text().splitlines()
    assert grid[0] == "feature,rep0,rep1" and len(grid) == 15


def test_optimize_bad_params(work, tmp_path):
    (tmp_path / "ga.ini").write_text("[ga]\nelite = 0.6\nreseed = 0.6\n")
    assert run("optimize-radii", work / "cloud.txt", tmp_path / "o", "--params", tmp_path / "ga.ini") == 2


def test_hillshade_command(work, tmp_path):
    assert run("hillshade", work / "cloud.txt", tmp_path / "h.asc", "--cell", 2,
               "--surface", tmp_path / "s.asc") == 0
    head = (tmp_path / "h.asc").read_text().splitlines()[:6]
    assert [h.split()[0] for h in head] == ["ncols", "nrows", "xllcorner", "yllcorner",
                                            "cellsize", "NODATA_value"]
    assert run("hillshade", work / "cloud.txt", tmp_path / "h.asc", "--cell", 0) == 2


def test_usage_errors(tmp_path):
    assert run("classify", tmp_path / "none.txt", tmp_path / "t", tmp_path / "p") == 2
    with pytest.raises(SystemExit) as e:
        run("--threads", 0, "synth", tmp_path / "a", tmp_path / "b")
    assert e.value.code == 2
