import hashlib
import math

import numpy as np
import pytest

import oracles
from alsc import features, synth
from alsc.cloud import from_arrays, write_cloud


@pytest.fixture(scope="module")
def scene_r2(small_scene):
    idx = features.build_index(small_scene, features.uniform_specs(2.0))
    cyl = features.feature_table(small_scene, idx, features.uniform_specs(2.0))
    sph = features.feature_table(small_scene, idx, features.uniform_specs(2.0, "sphere"))
    return small_scene, cyl, sph


def _col(fm, name):
    return fm.values[:, fm.names.index(name)]


def _digest(cloud, tmp_path, name):
    p = tmp_path / name
    write_cloud(p, cloud, binary=True)
    return hashlib.sha256(p.read_bytes()).hexdigest()


def test_same_seed_same_cloud(tmp_path):
    spec = synth.five_class_scene(seed=11, size=40)
    a, b = synth.generate(spec), synth.generate(spec)
    assert _digest(a, tmp_path, "a") == _digest(b, tmp_path, "b")
    c = synth.generate(synth.five_class_scene(seed=12, size=40))
    assert _digest(a, tmp_path, "a") != _digest(c, tmp_path, "c")


def test_flat_scene_poisson_count():
    n = len(synth.generate(synth.flat_scene()))
    assert abs(n - 60_000) <= 3 * math.sqrt(60_000)


def test_every_component_class_present(small_scene):
    assert set(np.unique(small_scene.labels).tolist()) == {2, 5, 8, 9, 13}


def test_beams_point_down_from_a_strip():
    spec = synth.five_class_scene(seed=1, size=60)
    cloud = synth.generate(spec)
    vx, vz = cloud.column("vx"), cloud.column("vz")
    assert (vz < 0).all()
    # the across-track tangent times the flying height is the offset to some strip center
    offset = np.abs(vx / vz) * (spec.terrain.base + spec.strips.altitude - cloud.xyz[:, 2])
    gap = np.abs(np.abs(cloud.xyz[:, 0, None] - synth.strip_centers(spec)[None, :])
                 - offset[:, None]).min(axis=1)
    assert gap.max() < 1e-6


def test_tree_echo_ratio_below_roofs(scene_r2):
    cloud, cyl, _ = scene_r2
    er = _col(cyl, "EchoRatio")
    assert np.nanmean(er[cloud.labels == 5]) < np.nanmean(er[cloud.labels == 8])


def test_trees_multi_echo(small_scene):
    ec = small_scene.column("echo_count")
    y = small_scene.labels
    assert ec[y == 5].mean() > 1.5 and (ec[y == 8] == 1).mean() > 0.9


def _roof_interior(cloud):
    x, y = cloud.xyz[:, 0], cloud.xyz[:, 1]
    # the flat hall, shrunk by more than the radius so no wall or edge enters
    return (cloud.labels == 8) & (x > 36) & (x < 45) & (y > 39) & (y < 42)


def test_roof_plane_roughness(scene_r2):
    cloud, cyl, _ = scene_r2
    roof = _roof_interior(cloud)
    assert roof.sum() > 50
    assert np.nanmax(_col(cyl, "NormalSigma")[roof]) <= 2 * 0.02
    assert np.nanmin(_col(cyl, "NormalZ")[roof]) > 0.99


def test_roof_planarity_matches_uniform_disk(scene_r2):
    cloud, cyl, _ = scene_r2
    roof = _roof_interior(cloud)
    pl = _col(cyl, "Planarity")[roof]
    n = int(np.median(_col(cyl, "PointDensity")[roof]) * math.pi * 4)
    rng = np.random.default_rng(0)
    ref = []
    for _ in range(400):
        r, t = 2 * np.sqrt(rng.random(n)), 2 * np.pi * rng.random(n)
        pts = np.column_stack([r * np.cos(t), r * np.sin(t), np.zeros(n)])
        ref.append(oracles.shape_scores(oracles.spectrum(oracles.tensor(pts)) + 1e-30)["Planarity"])
    assert np.median(pl) >= np.median(ref) - 0.05
    assert np.mean(np.asarray(ref) >= 0.9) < 0.5


def test_power_line_linear(scene_r2):
    cloud, _, sph = scene_r2
    lin = _col(sph, "Linearity")[cloud.labels == 13]
    assert np.nanmin(lin) >= 0.9


def test_tree_omnivariance_above_ground(scene_r2):
    cloud, _, sph = scene_r2
    om = _col(sph, "Omnivariance")
    cut = np.nanpercentile(om[cloud.labels == 2], 95)
    assert np.nanmin(om[cloud.labels == 5]) > cut


def test_spec_ini_roundtrip(tmp_path):
    for spec in (synth.five_class_scene(seed=2), synth.default_scene(), synth.border_scene(),
                 synth.ga_scene()):
        spec.write(tmp_path / "s.ini")
        back = synth.SceneSpec.read(tmp_path / "s.ini")
        assert back.to_ini() == spec.to_ini()
    small = synth.five_class_scene(seed=2, size=30)
    assert np.array_equal(synth.generate(synth.SceneSpec.from_ini(small.to_ini())).xyz,
                          synth.generate(small).xyz)


@pytest.mark.parametrize("text", [
    "[scene]\nextent = 0 10\n",
    "[scene]\ndensity = -1\n",
    "[scene]\n[component x]\nkind = volcano\n",
    "[scene]\n[component x]\nkind = water\n",
])
def test_bad_specs(text):
    with pytest.raises(synth.SpecError):
        synth.generate(synth.SceneSpec.from_ini(text))


def test_border_effect_zero_strength_and_nadir(small_scene):
    assert synth.inject_border_effect(small_scene, 0.0) is small_scene
    nadir = np.arange(len(small_scene)) % 7 == 0
    vx = np.where(nadir, 0.0, small_scene.column("vx"))
    vy = np.where(nadir, 0.0, small_scene.column("vy"))
    vz = np.where(nadir, -1.0, small_scene.column("vz"))
    small_scene = small_scene.with_columns(vx=vx, vy=vy, vz=vz)
    hit = synth.inject_border_effect(small_scene, 1.0)
    changed = np.zeros(len(small_scene), bool)
    for c in ("amplitude", "echo_width", "reflectance"):
        same = hit.column(c) == small_scene.column(c)
        assert same[nadir].all()
        changed |= ~same
    assert changed[~nadir].mean() > 0.9
    assert np.array_equal(hit.xyz, small_scene.xyz)


def test_border_effect_needs_beams(small_scene):
    cols = {c: small_scene.column(c)[:10] for c in ("x", "y", "z", "class_code")}
    bare = from_arrays(**cols)
    with pytest.raises(ValueError, match="vx"):
        synth.inject_border_effect(bare, 1.0)
