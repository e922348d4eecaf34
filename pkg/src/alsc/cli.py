"""Command line entry point: ``alsc <command> ...``."""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, cart, evaluation, features, ga, raster, synth
from .cloud import LABEL, class_breakdown, format_breakdown, ingest, write_cloud
from .sampling import SplitPlan, simple_random_sample, stratified_sample
from .tableio import FormatError, Table, read_table, write_table

log = logging.getLogger("alsc")


class UsageError(Exception):
    """Bad arguments or inputs; exit status 2."""


# ------------------------------------------------------------------ helpers

def _read_radii(path: str) -> tuple[list[features.NeighborhoodSpec], str]:
    """INI file with a ``[radii]`` section (feature = meters) and optional
    ``[neighborhood] geometry`` and ``default`` radius."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(Path(path).read_text())
    except configparser.Error as e:
        raise UsageError(f"{path}: {e}") from e
    geometry = cp.get("neighborhood", "geometry", fallback="cylinder")
    default = cp.get("neighborhood", "default", fallback=None)
    radii = {k: float(v) for k, v in cp.items("radii")} if cp.has_section("radii") else {}
    unknown = sorted(set(radii) - set(features.NEIGHBORHOOD_FEATURES))
    if unknown:
        raise UsageError(f"{path}: unknown features {unknown}")
    if default is not None:
        for f in features.NEIGHBORHOOD_FEATURES:
            radii.setdefault(f, float(default))
    missing = [f for f in features.NEIGHBORHOOD_FEATURES if f not in radii]
    if missing:
        raise UsageError(f"{path}: no radius for {missing}")
    return features.specs_from_radii(radii, geometry), geometry


def _write_predictions(path: str, ids: np.ndarray, pred: np.ndarray) -> None:
    t = Table(["point_id", LABEL], {"point_id": ids.astype(np.float64),
                                    LABEL: pred.astype(np.float64)})
    write_table(path, t, binary=False)


def _read_predictions(path: str) -> tuple[np.ndarray, np.ndarray]:
    t = read_table(path)
    for c in ("point_id", LABEL):
        if c not in t.data:
            raise UsageError(f"{path}: missing column {c!r}")
    return t.data["point_id"].astype(np.int64), t.data[LABEL].astype(np.int64)


def _ids_to_rows(fm: features.FeatureMatrix, ids: np.ndarray) -> np.ndarray:
    order = np.argsort(fm.point_ids, kind="stable")
    pos = np.searchsorted(fm.point_ids[order], ids)
    pos = np.clip(pos, 0, len(order) - 1)
    if not np.array_equal(fm.point_ids[order][pos], ids):
        raise UsageError("point ids not present in the feature file")
    return order[pos]


# ------------------------------------------------------------------ commands

def cmd_synth(a) -> int:
    try:
        spec = synth.SceneSpec.read(a.spec)
        spec.validate()
    except (synth.SpecError, OSError) as e:
        raise UsageError(str(e)) from e
    if a.seed is not None:
        spec.seed = a.seed
    cloud = synth.generate(spec)
    if a.border_strength:
        cloud = synth.inject_border_effect(cloud, a.border_strength)
    write_cloud(a.out, cloud, binary=a.binary or None)
    print(format_breakdown(class_breakdown(cloud), cloud.classes))
    print(f"wrote {len(cloud)} points to {a.out}")
    return 0


def cmd_features(a) -> int:
    if a.radii:
        specs, _ = _read_radii(a.radii)
    else:
        specs = features.uniform_specs(a.radius, a.geometry)
    cloud = ingest(a.cloud)
    missing = [c for c in features.required_columns(a.border_mode) if c not in cloud.schema]
    if missing:
        raise UsageError(f"border mode {a.border_mode!r} needs columns {missing}")
    index = features.build_index(cloud, specs)
    fm = features.feature_table(cloud, index, specs, border_mode=a.border_mode)
    features.write_features(a.out, fm, binary=a.binary or None)
    bad = {k: v for k, v in fm.invalid_counts().items() if v}
    print(f"wrote {len(fm)} rows x {len(fm.names)} features to {a.out}")
    print("invalid values: " + (", ".join(f"{k} {v}" for k, v in bad.items()) or "none"))
    return 0


def cmd_train(a) -> int:
    fm = features.read_features(a.features)
    if fm.labels is None:
        raise UsageError(f"{a.features}: no {LABEL} column to train on")
    names = a.columns.split(",") if a.columns else list(fm.names)
    absent = [c for c in names if c not in fm.names]
    if absent:
        raise UsageError(f"columns not in feature file: {absent}")
    k = min(a.size, len(fm))
    plan = stratified_sample(fm.labels, k, a.seed, ids=fm.point_ids)
    rows = _ids_to_rows(fm, plan.train_ids)
    X = fm.values[rows][:, [fm.names.index(c) for c in names]]
    y = fm.labels[rows]
    w = plan.case_weights(y) if not a.unweighted else None
    controls = cart.Controls(min_node_size=a.min_node_size, min_rel_gain=a.cp)
    tree = cart.fit(X, y, w, names, controls, seed=a.seed, pruned=not a.unpruned)
    tree.write(a.tree)
    plan_path = a.plan or str(Path(a.tree).with_suffix(".plan"))
    plan.write(plan_path)
    print(f"trained on {len(rows)} points ({', '.join(f'{c}:{n}' for c, n in plan.sampled.items())})")
    if plan.promoted:
        print(f"classes raised to one training point: {plan.promoted}")
    print(f"tree: {tree.n_leaves} leaves, depth {tree.depth}; wrote {a.tree} and {plan_path}")
    return 0


def cmd_classify(a) -> int:
    fm = features.read_features(a.features)
    tree = cart.ClassificationTree.read(a.tree)
    try:
        pred = tree.predict(fm.values, fm.names)
    except cart.SchemaError as e:
        raise UsageError(str(e)) from e
    _write_predictions(a.out, fm.point_ids, pred)
    print(f"wrote {len(pred)} predictions to {a.out}")
    return 0


def cmd_evaluate(a) -> int:
    fm = features.read_features(a.features)
    if fm.labels is None:
        raise UsageError(f"{a.features}: no reference labels")
    ids, pred = _read_predictions(a.predictions)
    if a.plan:
        keep = np.isin(ids, SplitPlan.read(a.plan).test_ids)
        ids, pred = ids[keep], pred[keep]
    true = fm.labels[_ids_to_rows(fm, ids)]
    M = evaluation.ConfusionMatrix.from_labels(true, pred)
    rows = evaluation.confusion_report(M)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "confusion.csv").write_text(M.to_text())
    (out / "report.csv").write_text(evaluation.report_to_text(rows))
    line = evaluation.format_mcr(evaluation.mcr(M))
    (out / "mcr.txt").write_text(line + "\n")
    print(M.aligned())
    print(evaluation.format_report(rows))
    print(line)
    return 0


def cmd_optimize(a) -> int:
    params = ga.GAParams()
    if a.params:
        try:
            params = ga.GAParams.from_ini(Path(a.params).read_text())
        except (configparser.Error, ValueError, KeyError) as e:
            raise UsageError(f"{a.params}: {e}") from e
    if a.generations is not None:
        params = dataclasses.replace(params, generations=a.generations)
    try:
        params.validate()
    except ValueError as e:
        raise UsageError(str(e)) from e
    if a.replications < 1:
        raise UsageError("replications must be at least 1")
    cloud = ingest(a.cloud)
    if not cloud.is_labeled:
        raise UsageError(f"{a.cloud}: GA fitness needs labels")
    n = min(a.sample, len(cloud))
    sample = simple_random_sample(cloud, n, a.seed)
    ctx = ga.FitnessContext.build(cloud, sample, train_size=min(a.train_size, n // 2),
                                  seed=a.seed, border_mode=a.border_mode)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    genomes, fits = [], []
    for r in range(a.replications):
        p = dataclasses.replace(params, seed=params.seed + a.seed + r)
        res = ga.evolve(p, ctx, workers=a.threads)
        (out / f"history_{r}.csv").write_text(res.history_text())
        genomes.append(res.best_genome)
        fits.append(res.best_fitness)
        print(f"replication {r}: fitness {res.best_fitness:.4f} genome "
              + " ".join(map(str, res.best_genome.tolist())))
    lines = ["replication,fitness," + ",".join(ctx.features)]
    lines += [f"{r},{f!r}," + ",".join(map(str, g.tolist()))
              for r, (g, f) in enumerate(zip(genomes, fits))]
    (out / "best.csv").write_text("\n".join(lines) + "\n")
    if a.replications == 1:
        log.warning("one replication: no stability grid written")
        return 0
    rep = ga.stability_report(genomes, fits, ctx.features)
    (out / "stability_grid.csv").write_text(rep.grid_text())
    (out / "stability.csv").write_text(rep.table_text())
    stable = [f for f, s in zip(rep.features, rep.stable) if s]
    print(f"{int(rep.optimal.sum())} of {len(genomes)} replications reached the best fitness")
    print("stable features: " + (", ".join(stable) or "none"))
    return 0


def cmd_hillshade(a) -> int:
    if not a.cell > 0:
        raise UsageError("cell size must be positive")
    cloud = ingest(a.cloud)
    try:
        surface, shade = raster.cloud_hillshade(cloud, a.filter, a.cell, a.azimuth, a.elevation)
    except ValueError as e:
        raise UsageError(str(e)) from e
    shade.write(a.out)
    if a.surface:
        surface.write(a.surface)
    print(f"wrote {shade.shape[1]} x {shade.shape[0]} hillshade to {a.out}")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alsc", description=__doc__)
    p.add_argument("--version", action="version", version=f"alsc {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    p.add_argument("--threads", type=int, default=1, help="worker thread cap")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a labeled synthetic cloud")
    s.add_argument("spec", help="scene INI file")
    s.add_argument("out")
    s.add_argument("--seed", type=int, help="override the scene seed")
    s.add_argument("--border-strength", type=float, default=0.0)
    s.add_argument("--binary", action="store_true")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("features", help="compute the feature matrix")
    s.add_argument("cloud")
    s.add_argument("out")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--radius", type=float, default=2.0, help="one radius for every feature")
    g.add_argument("--radii", help="INI file with per-feature radii")
    s.add_argument("--geometry", choices=features.GEOMETRIES, default="cylinder")
    s.add_argument("--border-mode", choices=sorted(features.BORDER_MODES), default="none")
    s.add_argument("--binary", action="store_true")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("train", help="fit a classification tree")
    s.add_argument("features")
    s.add_argument("tree")
    s.add_argument("--plan", help="split plan output (default: tree path with .plan)")
    s.add_argument("--size", type=int, default=50000, help="training size k")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--columns", help="comma separated subset of feature columns")
    s.add_argument("--unpruned", action="store_true")
    s.add_argument("--unweighted", action="store_true")
    s.add_argument("--min-node-size", type=int, default=cart.Controls.min_node_size)
    s.add_argument("--cp", type=float, default=cart.Controls.min_rel_gain)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("classify", help="predict class codes")
    s.add_argument("features")
    s.add_argument("tree")
    s.add_argument("out")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("evaluate", help="confusion matrix and MCR")
    s.add_argument("features", help="feature file with reference labels")
    s.add_argument("predictions")
    s.add_argument("out", help="output directory")
    s.add_argument("--plan", help="score only the test ids of this split plan")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("optimize-radii", help="genetic search over per-feature radii")
    s.add_argument("cloud")
    s.add_argument("out", help="output directory")
    s.add_argument("--params", help="INI file with a [ga] section")
    s.add_argument("--replications", type=int, default=1)
    s.add_argument("--generations", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--sample", type=int, default=100000)
    s.add_argument("--train-size", type=int, default=5137)
    s.add_argument("--border-mode", choices=sorted(features.BORDER_MODES), default="none")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("hillshade", help="terrain or surface model with shaded relief")
    s.add_argument("cloud")
    s.add_argument("out", help="hillshade raster (ESRI ASCII grid)")
    s.add_argument("--filter", default="ground", help="'ground', 'all' or comma separated codes")
    s.add_argument("--cell", type=float, default=1.0)
    s.add_argument("--azimuth", type=float, default=315.0)
    s.add_argument("--elevation", type=float, default=45.0)
    s.add_argument("--surface", help="also write the filled elevation grid")
    s.set_defaults(func=cmd_hillshade)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if a.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return a.func(a)
    except (UsageError, FormatError, cart.SchemaError, FileNotFoundError) as e:
        print(f"alsc {a.command}: {e}", file=sys.stderr)
        return 2
    except Exception as e:                                   # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"alsc {a.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
