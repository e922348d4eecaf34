"""Compiled against pure-Python kernels on the hot paths.

    python3 benchmarks/bench_kernels.py [--points 100000] [--radius 2.0]

Times neighborhood feature extraction and tree growing with each backend
and checks that both give the same numbers.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from alsc import cart, features, kernels, synth
from alsc.sampling import stratified_sample


def _clock(fn, repeat: int = 1):
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=100_000)
    ap.add_argument("--radius", type=float, default=2.0)
    ap.add_argument("--train", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=1)
    a = ap.parse_args(argv)

    cloud = synth.generate(synth.five_class_scene(seed=0))
    rows = np.sort(np.random.default_rng(0).choice(len(cloud), min(a.points, len(cloud)),
                                                   replace=False))
    index = features.build_index(cloud)
    specs = features.uniform_specs(a.radius)
    print(f"scene {len(cloud)} points; features for {len(rows)} at r={a.radius}; "
          f"backends: {', '.join(kernels.available())}")

    results = {}
    train = None
    for name in kernels.available():
        kernels.use(name)
        tf, fm = _clock(lambda: features.feature_table(cloud, index, specs, rows=rows), a.repeat)
        if train is None:
            # both backends grow on the same rows so the trees are comparable
            plan = stratified_sample(fm.labels, a.train, 0)
            y = fm.labels[plan.train_ids]
            train = (fm.values[plan.train_ids], y, plan.case_weights(y))
        X, y, w = train
        tg, tree = _clock(lambda: cart.grow(X, y, w, fm.names), a.repeat)
        results[name] = (tf, tg, fm, tree)
        print(f"{name:>9}: features {tf:7.2f} s   grow {tg:6.2f} s "
              f"({tree.n_leaves} leaves)")
    kernels.use("compiled" if "compiled" in results else "python")

    if len(results) == 2:
        (cf, cg, cfm, ct), (pf, pg, pfm, pt) = results["compiled"], results["python"]
        diff = np.nanmax(np.abs(cfm.values - pfm.values))
        same_tree = ct.to_text() == pt.to_text()
        print(f" speed-up: features x{pf / cf:.1f}, grow x{pg / cg:.1f}")
        print(f"agreement: max feature difference {diff:.2e}, identical trees {same_tree}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
