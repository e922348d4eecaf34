"""Training/test splits: stratified quotas, simple random samples, class weights."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .cloud import LABEL, PointCloud


def make_rng(seed: int) -> np.random.Generator:
    """The package-wide generator: Mersenne Twister (MT19937) seeded with ``seed``."""
    return np.random.Generator(np.random.MT19937(int(seed)))


def quota(class_size: int, k: int, n_classes: int) -> int:
    """Per-class sample size ``min(floor(S/2), floor(k/|A|))``, at least 1 if ``S >= 1``."""
    if class_size < 0 or n_classes < 1:
        raise ValueError("invalid class size or class count")
    s = min(class_size // 2, k // n_classes)
    if class_size >= 1 and s < 1:
        s = 1
    return s


@dataclass
class SplitPlan:
    seed: int
    train_ids: np.ndarray
    test_ids: np.ndarray
    sampled: dict[int, int]            # s_c
    population: dict[int, int]         # S_c
    weights: dict[int, float]          # w_c
    promoted: list[int] = field(default_factory=list)
    k: int = 0

    def case_weights(self, labels) -> np.ndarray:
        """One weight per row of ``labels`` (class codes)."""
        labels = np.asarray(labels)
        codes = np.array(sorted(self.weights))
        wv = np.array([self.weights[c] for c in codes])
        pos = np.searchsorted(codes, labels)
        pos = np.clip(pos, 0, len(codes) - 1)
        if not np.array_equal(codes[pos], labels):
            raise ValueError("labels contain classes without a weight")
        return wv[pos]

    def to_text(self) -> str:
        lines = ["# split plan", f"seed {self.seed}", f"k {self.k}"]
        for c in sorted(self.population):
            lines.append(f"class {c} population {self.population[c]} "
                         f"sampled {self.sampled[c]} weight {self.weights[c]!r}")
        if self.promoted:
            lines.append("promoted " + " ".join(map(str, self.promoted)))
        lines.append("train " + " ".join(map(str, self.train_ids.tolist())))
        lines.append("test " + " ".join(map(str, self.test_ids.tolist())))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SplitPlan":
        seed = k = 0
        sampled: dict[int, int] = {}
        pop: dict[int, int] = {}
        weights: dict[int, float] = {}
        promoted: list[int] = []
        train = test = np.empty(0, dtype=np.int64)
        for line in text.splitlines():
            if not line or line.startswith("#"):
                continue
            key, _, rest = line.partition(" ")
            parts = rest.split()
            if key == "seed":
                seed = int(parts[0])
            elif key == "k":
                k = int(parts[0])
            elif key == "class":
                c = int(parts[0])
                pop[c], sampled[c], weights[c] = int(parts[2]), int(parts[4]), float(parts[6])
            elif key == "promoted":
                promoted = [int(p) for p in parts]
            elif key == "train":
                train = np.array(parts, dtype=np.int64)
            elif key == "test":
                test = np.array(parts, dtype=np.int64)
            else:
                raise ValueError(f"unknown split plan line {key!r}")
        return cls(seed, train, test, sampled, pop, weights, promoted, k)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def read(cls, path: str | Path) -> "SplitPlan":
        return cls.from_text(Path(path).read_text())


def _labels_of(data) -> np.ndarray:
    if isinstance(data, PointCloud):
        if not data.is_labeled:
            raise ValueError("cloud carries no class labels")
        return data.labels
    return np.asarray(data)


def class_weights(population_fractions: Mapping[int, float],
                  sample_fractions: Mapping[int, float]) -> dict[int, float]:
    """``w_c = pi_c / q_c``; reweighted sample mass then equals population mass."""
    for name, fr in (("population", population_fractions), ("sample", sample_fractions)):
        if abs(math.fsum(fr.values()) - 1.0) > 1e-9:
            raise ValueError(f"{name} fractions do not sum to 1")
    out = {}
    for c, q in sample_fractions.items():
        if c not in population_fractions:
            raise ValueError(f"class {c} is in the sample but not the population")
        if not q > 0:
            raise ValueError(f"class {c} has zero sample fraction")
        out[c] = population_fractions[c] / q
    return out


def stratified_sample(data, k: int, seed: int, ids=None) -> SplitPlan:
    """Per-class quota sample; all other labeled points form the test pool.

    ``data`` is a labeled cloud or an array of class codes.  ``ids`` maps
    label positions to point ids (default: positions themselves).
    """
    labels = _labels_of(data)
    if labels.size == 0:
        raise ValueError("no labeled points")
    ids = np.arange(len(labels), dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
    codes, sizes = np.unique(labels, return_counts=True)
    if k < len(codes):
        raise ValueError(f"k={k} is smaller than the number of classes {len(codes)}")
    rng = make_rng(seed)
    chosen = []
    sampled, pop, promoted = {}, {}, []
    for c, S in zip(codes.tolist(), sizes.tolist()):
        s = quota(S, k, len(codes))
        if min(S // 2, k // len(codes)) < s:
            promoted.append(c)
        members = np.flatnonzero(labels == c)
        chosen.append(members[rng.choice(S, size=s, replace=False)])
        sampled[c], pop[c] = s, S
    train_pos = np.sort(np.concatenate(chosen))
    mask = np.ones(len(labels), dtype=bool)
    mask[train_pos] = False
    total_s = sum(sampled.values())
    n = len(labels)
    weights = class_weights({c: pop[c] / n for c in pop},
                            {c: sampled[c] / total_s for c in sampled})
    return SplitPlan(int(seed), ids[train_pos], ids[mask], sampled, pop, weights,
                     promoted, int(k))


def simple_random_sample(data, n: int, seed: int) -> np.ndarray:
    """``n`` distinct ids drawn uniformly; sorted ascending.

    ``data`` is a cloud or a population size.
    """
    size = len(data) if isinstance(data, PointCloud) else int(data)
    if n < 0 or n > size:
        raise ValueError(f"cannot draw {n} of {size} points")
    return np.sort(make_rng(seed).choice(size, size=n, replace=False)).astype(np.int64)
