"""Genetic search over per-feature neighborhood radii.

A genome holds one allele in ``1..11`` per neighborhood feature; allele
``a`` selects radius ``1.0 + 0.5 * (a - 1)`` meters.  Fitness is the
misclassification rate of a tree grown on a fixed training split, with the
features of every radius precomputed so that evaluating a genome is column
selection plus tree training.
"""

from __future__ import annotations

import hashlib
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import cart
from .cloud import PointCloud
from .features import NEIGHBORHOOD_FEATURES, PASSTHROUGH, radius_stack, scan_angle
from .index import SpatialIndex
from .sampling import SplitPlan, make_rng, stratified_sample

N_ALLELES = 11
RADII = tuple(1.0 + 0.5 * i for i in range(N_ALLELES))


def decode(genome: Sequence[int], features: Sequence[str] = NEIGHBORHOOD_FEATURES) -> dict[str, float]:
    """Feature name -> radius in meters."""
    g = [int(a) for a in genome]
    if len(g) != len(features):
        raise ValueError(f"genome length {len(g)} differs from {len(features)} features")
    bad = [a for a in g if not 1 <= a <= N_ALLELES]
    if bad:
        raise ValueError(f"alleles out of range 1..{N_ALLELES}: {bad}")
    return {f: 1.0 + 0.5 * (a - 1) for f, a in zip(features, g)}


@dataclass(frozen=True)
class GAParams:
    population: int = 100
    tournament: int = 5
    mutation: float = 0.05
    elite: float = 0.1
    reseed: float = 0.1
    generations: int = 500
    seed: int = 0
    genome_length: int = len(NEIGHBORHOOD_FEATURES)
    alleles: int = N_ALLELES

    def validate(self) -> None:
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if not 1 <= self.tournament <= self.population:
            raise ValueError("tournament size must be in 1..population")
        if not 0 <= self.mutation <= 1:
            raise ValueError("mutation probability must be in [0, 1]")
        if self.elite < 0 or self.reseed < 0 or self.elite + self.reseed >= 1:
            raise ValueError("elite and reseed proportions must be nonnegative and sum below 1")
        if self.n_elite + self.n_reseed >= self.population:
            raise ValueError("elites and reseeds leave no room for offspring")
        if self.generations < 1:
            raise ValueError("need at least one generation")
        if self.genome_length < 2 or self.alleles < 2:
            raise ValueError("genome needs at least 2 genes and 2 alleles")

    @property
    def n_elite(self) -> int:
        return math.ceil(self.elite * self.population - 1e-9)

    @property
    def n_reseed(self) -> int:
        return math.ceil(self.reseed * self.population - 1e-9)

    def to_ini(self) -> str:
        keys = ("population", "tournament", "mutation", "elite", "reseed", "generations",
                "seed", "genome_length", "alleles")
        return "[ga]\n" + "".join(f"{k} = {getattr(self, k)!r}\n" for k in keys)

    @classmethod
    def from_ini(cls, text: str) -> "GAParams":
        import configparser
        cp = configparser.ConfigParser()
        cp.read_string(text)
        sec = cp["ga"] if cp.has_section("ga") else {}
        kw = {}
        types = {"population": int, "tournament": int, "mutation": float, "elite": float,
                 "reseed": float, "generations": int, "seed": int, "genome_length": int,
                 "alleles": int}
        for k in sec:
            if k not in types:
                raise ValueError(f"unknown GA parameter {k!r}")
            kw[k] = types[k](sec[k])
        p = cls(**kw)
        p.validate()
        return p


class FitnessCache:
    """Genome -> fitness map; safe to share between threads."""

    def __init__(self):
        self._data: dict[tuple[int, ...], float] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._data)

    def __contains__(self, genome) -> bool:
        return tuple(int(a) for a in genome) in self._data

    def lookup(self, genome) -> float | None:
        key = tuple(int(a) for a in genome)
        with self._lock:
            v = self._data.get(key)
            if v is None:
                self.misses += 1
            else:
                self.hits += 1
            return v

    def store(self, genome, value: float) -> None:
        with self._lock:
            self._data.setdefault(tuple(int(a) for a in genome), float(value))


# ------------------------------------------------------------------ fitness context

@dataclass
class FitnessContext:
    """Precomputed feature stacks plus a fixed split.

    ``stacks`` has shape (radii, rows, features); ``extra`` holds the
    radius-independent columns.  Split ids are row positions.
    """

    stacks: np.ndarray
    extra: np.ndarray
    extra_names: list[str]
    labels: np.ndarray
    plan: SplitPlan
    features: tuple[str, ...] = NEIGHBORHOOD_FEATURES
    controls: cart.Controls = field(default_factory=cart.Controls)
    weighted: bool = True

    def __post_init__(self):
        R, n, F = self.stacks.shape
        if R != N_ALLELES or F != len(self.features):
            raise ValueError("stacks must be (11 radii, rows, features)")
        if len(self.labels) != n or len(self.extra) != n:
            raise ValueError("stack, extra columns and labels disagree on row count")
        tr = self.plan.train_ids
        self._ytr = self.labels[tr]
        self._yte = self.labels[self.plan.test_ids]
        self._w = self.plan.case_weights(self._ytr) if self.weighted else None
        self._cols = np.arange(F)

    @property
    def names(self) -> list[str]:
        return list(self.features) + list(self.extra_names)

    def matrix(self, genome, rows) -> np.ndarray:
        g = np.asarray(genome, dtype=np.int64) - 1
        return np.hstack([self.stacks[g[None, :], rows[:, None], self._cols[None, :]],
                          self.extra[rows]])

    def evaluate(self, genome) -> float:
        decode(genome, self.features)
        tr, te = self.plan.train_ids, self.plan.test_ids
        tree = cart.grow(self.matrix(genome, tr), self._ytr, self._w, self.names, self.controls)
        return float(np.mean(tree.predict(self.matrix(genome, te)) != self._yte))

    def digest(self) -> str:
        h = hashlib.sha256()
        for a in (self.stacks, self.extra, self.labels, self.plan.train_ids, self.plan.test_ids):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()

    @classmethod
    def build(cls, cloud: PointCloud, sample_ids=None, train_size: int = 5137, seed: int = 0,
              border_mode: str = "none", index: SpatialIndex | None = None,
              controls: cart.Controls | None = None) -> "FitnessContext":
        """Stacks for ``sample_ids`` (neighborhoods drawn from the whole cloud)."""
        rows = (np.arange(len(cloud), dtype=np.int64) if sample_ids is None
                else np.asarray(sample_ids, dtype=np.int64))
        index = index or SpatialIndex(cloud.xyz, max_radius=RADII[-1])
        stacks = radius_stack(cloud, RADII, index, rows)
        names, cols = [], []
        for c in PASSTHROUGH:
            if c in cloud.schema:
                names.append(c)
                cols.append(cloud.masked(c)[rows])
        if border_mode in ("beam", "both"):
            for c in ("vx", "vy", "vz"):
                names.append(c)
                cols.append(cloud.masked(c)[rows])
        if border_mode in ("angle", "both"):
            names.append("ScanAngle")
            cols.append(np.asarray(scan_angle(*(cloud.masked(c)[rows] for c in ("vx", "vy", "vz")))))
        extra = np.column_stack(cols) if cols else np.empty((len(rows), 0))
        labels = cloud.labels[rows]
        plan = stratified_sample(labels, train_size, seed)
        return cls(stacks, extra, names, labels, plan, controls=controls or cart.Controls())


# ------------------------------------------------------------------ operators

def random_genomes(rng: np.random.Generator, count: int, length: int,
                   alleles: int = N_ALLELES) -> np.ndarray:
    return rng.integers(1, alleles + 1, size=(count, length), dtype=np.int64)


def tournament(rng: np.random.Generator, fitness: np.ndarray, size: int) -> int:
    """Index of the fittest of ``size`` draws with replacement (ties: lower index)."""
    idx = rng.integers(0, len(fitness), size=size)
    f = fitness[idx]
    best = f.min()
    return int(idx[f == best].min())


def crossover(rng: np.random.Generator, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Head of ``a`` up to a uniform cut in 1..L-1, tail of ``b``."""
    cut = int(rng.integers(1, len(a)))
    return np.concatenate([a[:cut], b[cut:]])


def mutate(rng: np.random.Generator, g: np.ndarray, p: float, alleles: int = N_ALLELES) -> np.ndarray:
    """Each gene switches with probability ``p`` to a uniform different allele."""
    g = g.copy()
    hit = rng.random(len(g)) < p
    k = int(hit.sum())
    if k:
        new = rng.integers(1, alleles, size=k)          # 1..alleles-1
        old = g[hit]
        g[hit] = np.where(new >= old, new + 1, new)
    return g


def step(population: np.ndarray, fitness: np.ndarray, params: GAParams,
         rng: np.random.Generator) -> np.ndarray:
    """Elites, then fresh random genomes, then tournament offspring."""
    population = np.asarray(population, dtype=np.int64)
    fitness = np.asarray(fitness, dtype=np.float64)
    N = len(population)
    if N == 0:
        raise ValueError("empty population")
    ranking = np.lexsort((np.arange(N), fitness))
    out = [population[ranking[:params.n_elite]]]
    out.append(random_genomes(rng, params.n_reseed, population.shape[1], params.alleles))
    kids = np.empty((N - params.n_elite - params.n_reseed, population.shape[1]), dtype=np.int64)
    for i in range(len(kids)):
        a = population[tournament(rng, fitness, params.tournament)]
        b = population[tournament(rng, fitness, params.tournament)]
        kids[i] = mutate(rng, crossover(rng, a, b), params.mutation, params.alleles)
    out.append(kids)
    return np.vstack(out)


# ------------------------------------------------------------------ evolution

@dataclass
class GenerationStats:
    generation: int
    best: float
    mean: float
    best_so_far: float


@dataclass
class EvolveResult:
    best_genome: np.ndarray
    best_fitness: float
    history: list[GenerationStats]
    population: np.ndarray
    fitness: np.ndarray
    evaluations: int

    def history_text(self) -> str:
        lines = ["generation,best,mean,best_so_far"]
        lines += [f"{h.generation},{h.best!r},{h.mean!r},{h.best_so_far!r}" for h in self.history]
        return "\n".join(lines) + "\n"


FitnessFn = Callable[[np.ndarray], float]


def evolve(params: GAParams, fitness: FitnessFn | FitnessContext,
           cache: FitnessCache | None | bool = True, workers: int = 1,
           on_generation: Callable[[GenerationStats], None] | None = None) -> EvolveResult:
    """Run ``params.generations`` evaluated populations (the first is random).

    With a cache, a genome's fitness is computed once per run; without one
    (``cache=False``) repeats are recomputed.  Both give the same history.
    """
    params.validate()
    fn = fitness.evaluate if isinstance(fitness, FitnessContext) else fitness
    if cache is True:
        cache = FitnessCache()
    elif cache is False:
        cache = None
    rng = make_rng(params.seed)
    pop = random_genomes(rng, params.population, params.genome_length, params.alleles)
    history: list[GenerationStats] = []
    best_g, best_f = None, math.inf
    evaluations = 0
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for gen in range(params.generations):
            if gen:
                pop = step(pop, fit, params, rng)
            fit, n_eval = _evaluate_all(pop, fn, cache, pool)
            evaluations += n_eval
            j = int(np.argmin(fit))
            if fit[j] < best_f:
                best_f, best_g = float(fit[j]), pop[j].copy()
            stats = GenerationStats(gen, float(fit[j]), float(fit.mean()), best_f)
            history.append(stats)
            if on_generation:
                on_generation(stats)
    finally:
        if pool:
            pool.shutdown()
    return EvolveResult(best_g, best_f, history, pop, fit, evaluations)


def _evaluate_all(pop, fn, cache, pool):
    fit = np.empty(len(pop))
    if cache is None:
        vals = list(pool.map(fn, pop)) if pool else [fn(g) for g in pop]
        return np.asarray(vals, dtype=np.float64), len(pop)
    todo: dict[tuple, list[int]] = {}
    for i, g in enumerate(pop):
        v = cache.lookup(g)
        if v is None:
            todo.setdefault(tuple(g.tolist()), []).append(i)
        else:
            fit[i] = v
    keys = list(todo)
    arrays = [np.array(k, dtype=np.int64) for k in keys]
    vals = list(pool.map(fn, arrays)) if pool else [fn(a) for a in arrays]
    for k, v in zip(keys, vals):
        cache.store(k, v)
        fit[todo[k]] = v
    return fit, len(keys)


# ------------------------------------------------------------------ stability

@dataclass
class StabilityReport:
    features: list[str]
    genomes: np.ndarray              # replications x features
    fitness: np.ndarray
    optimal: np.ndarray              # mask of replications at the best fitness
    frequencies: np.ndarray          # features x alleles, among optimal runs
    stable: list[bool]
    threshold: float

    def modal_radius(self) -> dict[str, float]:
        return {f: RADII[int(np.argmax(self.frequencies[i]))] for i, f in enumerate(self.features)}

    def grid_text(self) -> str:
        """Radius per feature (rows) and replication (columns)."""
        head = "feature," + ",".join(f"rep{r}" for r in range(len(self.genomes)))
        lines = [head]
        for j, f in enumerate(self.features):
            lines.append(f + "," + ",".join(repr(RADII[a - 1]) for a in self.genomes[:, j]))
        lines.append("fitness," + ",".join(repr(float(v)) for v in self.fitness))
        return "\n".join(lines) + "\n"

    def table_text(self) -> str:
        head = "feature," + ",".join(repr(r) for r in RADII) + ",stable"
        lines = [head]
        for j, f in enumerate(self.features):
            lines.append(f + "," + ",".join(repr(float(v)) for v in self.frequencies[j])
                         + f",{int(self.stable[j])}")
        return "\n".join(lines) + "\n"


def stability_report(genomes, fitness, features: Sequence[str] = NEIGHBORHOOD_FEATURES,
                     threshold: float = 0.9, tol: float = 1e-12) -> StabilityReport:
    """Per-feature allele shares among replications that reached the best fitness."""
    G = np.asarray(genomes, dtype=np.int64)
    f = np.asarray(fitness, dtype=np.float64)
    if G.ndim != 2 or len(G) < 2:
        raise ValueError("need at least 2 replications")
    if G.shape[1] != len(features) or len(f) != len(G):
        raise ValueError("genome, fitness and feature counts disagree")
    opt = f <= f.min() + tol
    freq = np.zeros((len(features), N_ALLELES))
    for j in range(len(features)):
        freq[j] = np.bincount(G[opt, j] - 1, minlength=N_ALLELES)[:N_ALLELES] / opt.sum()
    stable = [bool(freq[j].max() >= threshold) for j in range(len(features))]
    return StabilityReport(list(features), G, f, opt, freq, stable, threshold)


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text)
