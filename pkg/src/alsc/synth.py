"""Deterministic labeled synthetic scenes.

A scene is a terrain surface plus components (patches, tree groups,
buildings, power lines, water bodies, small objects, tile mosaics), each
mapped to a class code.  Points are sampled uniformly per footprint with a
Poisson count, echo attributes are drawn from per-class normal models, and
beam vectors come from parallel flight strips flown along +y.

Scenes are configured with INI text: a ``[scene]`` section, an optional
``[strips]`` section, one ``[<kind>:<name>]`` section per component and
optional ``[attributes:<code>]`` overrides.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .classes import DEFAULT_CLASSES, ClassTable
from .cloud import LABEL, PointCloud, from_arrays
from .sampling import make_rng


class SpecError(ValueError):
    """Invalid scene specification."""


# ------------------------------------------------------------------ attributes

@dataclass(frozen=True)
class AttributeModel:
    """Normal models (mean, sd) for the three measured echo attributes."""

    amplitude: tuple[float, float] = (120.0, 40.0)
    echo_width: tuple[float, float] = (4.6, 0.4)
    reflectance: tuple[float, float] = (0.30, 0.10)

    def __post_init__(self):
        for f in ("amplitude", "echo_width", "reflectance"):
            object.__setattr__(self, f, tuple(float(v) for v in getattr(self, f)))


# Per-class attribute statistics.  The values are invented but ordered the
# way real surveys tend to be: vegetation returns are weak and widened,
# water is dark, sealed and mineral surfaces are bright and narrow.
_ATTRIBUTES = {
    2: AttributeModel((150, 30), (4.5, 0.3), (0.35, 0.05)),
    3: AttributeModel((170, 30), (4.6, 0.3), (0.45, 0.05)),
    4: AttributeModel((180, 30), (4.4, 0.3), (0.50, 0.06)),
    18: AttributeModel((200, 30), (4.4, 0.3), (0.60, 0.05)),
    21: AttributeModel((210, 30), (4.3, 0.2), (0.65, 0.05)),
    22: AttributeModel((90, 25), (4.3, 0.2), (0.15, 0.04)),
    28: AttributeModel((160, 30), (4.5, 0.3), (0.40, 0.06)),
    5: AttributeModel((80, 30), (6.5, 0.8), (0.20, 0.08)),
    6: AttributeModel((70, 30), (6.8, 0.8), (0.18, 0.08)),
    7: AttributeModel((75, 30), (6.6, 0.8), (0.19, 0.08)),
    8: AttributeModel((170, 40), (4.3, 0.2), (0.40, 0.10)),
    24: AttributeModel((60, 20), (5.5, 0.5), (0.15, 0.05)),
    9: AttributeModel((30, 15), (4.8, 0.4), (0.05, 0.03)),
    10: AttributeModel((130, 50), (4.5, 0.3), (0.30, 0.15)),
    11: AttributeModel((130, 50), (4.5, 0.3), (0.30, 0.15)),
    13: AttributeModel((40, 15), (5.0, 0.5), (0.10, 0.05)),
    14: AttributeModel((120, 40), (5.0, 0.5), (0.30, 0.10)),
    15: AttributeModel((40, 15), (5.0, 0.5), (0.10, 0.05)),
}


def attribute_model(code: int, overrides: dict[int, AttributeModel] | None = None) -> AttributeModel:
    if overrides and code in overrides:
        return overrides[code]
    return _ATTRIBUTES.get(code, AttributeModel())


# ------------------------------------------------------------------ spec

def _floats(n: int) -> Callable[[str], tuple[float, ...]]:
    def parse(text: str) -> tuple[float, ...]:
        vals = tuple(float(v) for v in text.replace(",", " ").split())
        if len(vals) != n:
            raise ValueError(f"expected {n} numbers, got {text!r}")
        return vals
    return parse


def _weights(text: str) -> dict[int, float]:
    out = {}
    for item in text.replace(",", " ").split():
        code, _, w = item.partition(":")
        out[int(code)] = float(w)
    return out


def _styles(text: str) -> dict[int, str]:
    out = {}
    for item in text.replace(",", " ").split():
        code, _, style = item.partition(":")
        out[int(code)] = style
    return out


def _optional_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "none") else int(text)


REQUIRED = object()
_RECT = _floats(4)
_PAIR = _floats(2)

# kind -> {parameter: (parser, default)}
KINDS: dict[str, dict[str, tuple[Callable[[str], Any], Any]]] = {
    "ground": {"class": (int, 2), "noise": (float, None)},
    "patch": {"class": (int, REQUIRED), "rect": (_RECT, REQUIRED),
              "roughness": (float, 0.0), "density_factor": (float, 1.0),
              "noise": (float, None)},
    "trees": {"class": (int, 5), "rect": (_RECT, REQUIRED), "count": (int, 20),
              "crown_radius": (_PAIR, (2.0, 4.0)), "height": (_PAIR, (8.0, 16.0)),
              "crown_fraction": (float, 0.6), "shape": (str, "ellipsoid"),
              "canopy_density": (float, 1.5), "ground_fraction": (float, 0.5)},
    "building": {"class": (int, 8), "wall_class": (_optional_int, None),
                 "rect": (_RECT, REQUIRED), "height": (float, 8.0),
                 "roof": (str, "gable"), "pitch": (float, 30.0),
                 "wall_density": (float, 0.3), "noise": (float, None)},
    "powerline": {"class": (int, 13), "from": (_PAIR, REQUIRED), "to": (_PAIR, REQUIRED),
                  "height": (float, 20.0), "wires": (int, 1), "wire_spacing": (float, 5.0),
                  "points_per_m": (float, 4.0), "sag": (float, 2.0)},
    "water": {"class": (int, 9), "rect": (_RECT, REQUIRED), "dropout": (float, 0.5),
              "depth": (float, 0.5)},
    "objects": {"class": (int, 11), "rect": (_RECT, REQUIRED), "count": (int, 10),
                "size": (_floats(3), (4.0, 2.0, 1.5))},
    "mosaic": {"rect": (_RECT, REQUIRED), "tile": (float, 4.0),
               "classes": (_weights, REQUIRED), "styles": (_styles, {}),
               "dense_factor": (float, 4.0), "tilt": (float, 12.0),
               "layer_gap": (float, 0.4), "layer_class": (int, 2), "noise": (float, None),
               "density_jitter": (float, 0.0)},
}
STYLES = ("flat", "dense", "tilted", "layered")


@dataclass
class Component:
    kind: str
    name: str
    params: dict[str, Any]

    def __getitem__(self, key: str) -> Any:
        return self.params[key]


@dataclass
class Terrain:
    slope: tuple[float, float] = (0.0, 0.0)
    amplitude: float = 0.0
    wavelength: float = 50.0
    base: float = 100.0

    def height(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        z = self.base + self.slope[0] * x + self.slope[1] * y
        if self.amplitude:
            k = 2.0 * math.pi / self.wavelength
            z = z + self.amplitude * np.sin(k * x) * np.sin(k * y)
        return z


@dataclass
class Strips:
    altitude: float = 600.0      # above the terrain base
    max_angle: float = 30.0      # degrees off nadir at the swath edge
    overlap: float = 0.3
    pitch_sd: float = 0.5        # degrees of along-track beam jitter

    @property
    def half_swath(self) -> float:
        return self.altitude * math.tan(math.radians(self.max_angle))


@dataclass
class SceneSpec:
    extent: tuple[float, float] = (100.0, 100.0)
    origin: tuple[float, float] = (0.0, 0.0)
    density: float = 6.0
    noise: float = 0.02
    seed: int = 0
    terrain: Terrain = field(default_factory=Terrain)
    strips: Strips = field(default_factory=Strips)
    components: list[Component] = field(default_factory=list)
    attributes: dict[int, AttributeModel] = field(default_factory=dict)

    # ---- validation
    def validate(self, classes: ClassTable = DEFAULT_CLASSES) -> None:
        ex, ey = self.extent
        if not (ex > 0 and ey > 0):
            raise SpecError("scene extent must be positive")
        if not self.density > 0:
            raise SpecError("density must be positive")
        if self.noise < 0:
            raise SpecError("noise must be nonnegative")
        if not self.terrain.wavelength > 0:
            raise SpecError("terrain wavelength must be positive")
        st = self.strips
        if not (st.altitude > 0 and 0 < st.max_angle < 90 and 0 <= st.overlap < 1):
            raise SpecError("invalid strip geometry")
        x0, y0 = self.origin
        for c in self.components:
            where = f"component {c.kind}:{c.name}"
            for key in ("class", "wall_class", "layer_class"):
                code = c.params.get(key)
                if code is not None and code not in classes:
                    raise SpecError(f"{where}: class {code} is not in the class table")
            if c.kind == "mosaic":
                for code in c["classes"]:
                    if code not in classes:
                        raise SpecError(f"{where}: class {code} is not in the class table")
                for code, style in c["styles"].items():
                    if style not in STYLES:
                        raise SpecError(f"{where}: unknown tile style {style!r}")
                if not c["tile"] > 0 or not c["classes"] or min(c["classes"].values()) < 0:
                    raise SpecError(f"{where}: invalid tiles")
            rects = []
            if "rect" in c.params:
                rects.append(c["rect"])
            if c.kind == "powerline":
                (ax, ay), (bx, by) = c["from"], c["to"]
                rects.append((min(ax, bx), min(ay, by), max(ax, bx), max(ay, by)))
            for r in rects:
                if c.kind != "powerline" and not (r[0] < r[2] and r[1] < r[3]):
                    raise SpecError(f"{where}: empty footprint")
                if r[0] < x0 or r[1] < y0 or r[2] > x0 + ex or r[3] > y0 + ey:
                    raise SpecError(f"{where}: footprint leaves the scene extent")
            for key in ("count", "wires"):
                if key in c.params and c[key] < 0:
                    raise SpecError(f"{where}: negative {key}")
            if c.kind == "water" and not 0 <= c["dropout"] < 1:
                raise SpecError(f"{where}: dropout must be in [0, 1)")

    # ---- INI
    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["scene"] = {
            "extent": f"{self.extent[0]!r} {self.extent[1]!r}",
            "origin": f"{self.origin[0]!r} {self.origin[1]!r}",
            "density": repr(self.density), "noise": repr(self.noise), "seed": str(self.seed),
            "terrain_slope": f"{self.terrain.slope[0]!r} {self.terrain.slope[1]!r}",
            "terrain_amplitude": repr(self.terrain.amplitude),
            "terrain_wavelength": repr(self.terrain.wavelength),
            "terrain_base": repr(self.terrain.base),
        }
        s = self.strips
        cp["strips"] = {"altitude": repr(s.altitude), "max_angle": repr(s.max_angle),
                        "overlap": repr(s.overlap), "pitch_sd": repr(s.pitch_sd)}
        for c in self.components:
            cp[f"{c.kind}:{c.name}"] = {k: _fmt(v) for k, v in c.params.items() if v is not None}
        for code, m in sorted(self.attributes.items()):
            cp[f"attributes:{code}"] = {k: f"{getattr(m, k)[0]!r} {getattr(m, k)[1]!r}"
                                        for k in ("amplitude", "echo_width", "reflectance")}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "SceneSpec":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise SpecError(f"unreadable scene spec: {exc}") from None
        spec = cls()
        try:
            if cp.has_section("scene"):
                sc = cp["scene"]
                spec.extent = _PAIR(sc.get("extent", "100 100"))
                spec.origin = _PAIR(sc.get("origin", "0 0"))
                spec.density = float(sc.get("density", "6"))
                spec.noise = float(sc.get("noise", "0.02"))
                spec.seed = int(sc.get("seed", "0"))
                spec.terrain = Terrain(_PAIR(sc.get("terrain_slope", "0 0")),
                                       float(sc.get("terrain_amplitude", "0")),
                                       float(sc.get("terrain_wavelength", "50")),
                                       float(sc.get("terrain_base", "100")))
                unknown = set(sc) - {"extent", "origin", "density", "noise", "seed",
                                     "terrain_slope", "terrain_amplitude",
                                     "terrain_wavelength", "terrain_base"}
                if unknown:
                    raise SpecError(f"[scene]: unknown keys {sorted(unknown)}")
            if cp.has_section("strips"):
                st = cp["strips"]
                spec.strips = Strips(float(st.get("altitude", "600")),
                                     float(st.get("max_angle", "30")),
                                     float(st.get("overlap", "0.3")),
                                     float(st.get("pitch_sd", "0.5")))
            for sec in cp.sections():
                if sec in ("scene", "strips"):
                    continue
                kind, _, name = sec.partition(":")
                if kind == "attributes":
                    a = cp[sec]
                    spec.attributes[int(name)] = AttributeModel(
                        _PAIR(a.get("amplitude", "120 40")),
                        _PAIR(a.get("echo_width", "4.6 0.4")),
                        _PAIR(a.get("reflectance", "0.3 0.1")))
                    continue
                if kind not in KINDS:
                    raise SpecError(f"[{sec}]: unknown component kind {kind!r}")
                schema = KINDS[kind]
                unknown = set(cp[sec]) - set(schema)
                if unknown:
                    raise SpecError(f"[{sec}]: unknown keys {sorted(unknown)}")
                params = {}
                for key, (parse, default) in schema.items():
                    if key in cp[sec]:
                        params[key] = parse(cp[sec][key])
                    elif default is REQUIRED:
                        raise SpecError(f"[{sec}]: missing required key {key!r}")
                    else:
                        params[key] = default
                spec.components.append(Component(kind, name or kind, params))
        except SpecError:
            raise
        except (ValueError, KeyError) as exc:
            raise SpecError(f"invalid scene spec: {exc}") from None
        spec.validate()
        return spec

    @classmethod
    def read(cls, path: str | Path) -> "SceneSpec":
        return cls.from_ini(Path(path).read_text())

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_ini())


def _fmt(v: Any) -> str:
    if isinstance(v, dict):
        return " ".join(f"{k}:{x}" for k, x in v.items())
    if isinstance(v, tuple):
        return " ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def component(kind: str, name: str | None = None, **params: Any) -> Component:
    """Build a component, filling defaults and checking required keys."""
    if kind not in KINDS:
        raise SpecError(f"unknown component kind {kind!r}")
    schema = KINDS[kind]
    full = {}
    for key, (_, default) in schema.items():
        if key in params:
            full[key] = params.pop(key)
        elif key == "class" and "cls" in params:
            full[key] = params.pop("cls")
        elif default is REQUIRED:
            raise SpecError(f"{kind}: missing required parameter {key!r}")
        else:
            full[key] = default
    if params:
        raise SpecError(f"{kind}: unknown parameters {sorted(params)}")
    return Component(kind, name or kind, full)


# ------------------------------------------------------------------ generation

class _Parts:
    def __init__(self):
        self.chunks: list[dict[str, np.ndarray]] = []

    def add(self, x, y, z, code, echo_id=None, echo_count=None):
        n = len(x)
        if n == 0:
            return
        ones = np.ones(n)
        self.chunks.append({
            "x": np.asarray(x, dtype=np.float64), "y": np.asarray(y, dtype=np.float64),
            "z": np.asarray(z, dtype=np.float64),
            LABEL: np.broadcast_to(np.asarray(code, dtype=np.float64), (n,)).copy(),
            "echo_id": ones.copy() if echo_id is None else np.asarray(echo_id, dtype=np.float64),
            "echo_count": ones.copy() if echo_count is None else np.asarray(echo_count, dtype=np.float64),
        })

    def merged(self) -> dict[str, np.ndarray]:
        keys = ("x", "y", "z", "echo_id", "echo_count", LABEL)
        if not self.chunks:
            return {k: np.empty(0) for k in keys}
        return {k: np.concatenate([c[k] for c in self.chunks]) for k in keys}


def _uniform_rect(rng, rect, density):
    x0, y0, x1, y1 = rect
    n = int(rng.poisson(max((x1 - x0) * (y1 - y0), 0.0) * density))
    return rng.uniform(x0, x1, n), rng.uniform(y0, y1, n)


def _inside(x, y, rects):
    m = np.zeros(len(x), dtype=bool)
    for x0, y0, x1, y1 in rects:
        m |= (x >= x0) & (x < x1) & (y >= y0) & (y < y1)
    return m


def _noise(spec: SceneSpec, c: Component) -> float:
    v = c.params.get("noise")
    return spec.noise if v is None else v


def _object_boxes(rng, c: Component):
    x0, y0, x1, y1 = c["rect"]
    L, W, H = c["size"]
    boxes = []
    for _ in range(c["count"]):
        along_x = rng.random() < 0.5
        lx, ly = (L, W) if along_x else (W, L)
        cx = rng.uniform(x0 + lx / 2, max(x1 - lx / 2, x0 + lx / 2))
        cy = rng.uniform(y0 + ly / 2, max(y1 - ly / 2, y0 + ly / 2))
        boxes.append((cx - lx / 2, cy - ly / 2, cx + lx / 2, cy + ly / 2, H))
    return boxes


def _exclusions(spec: SceneSpec, boxes_by_component: dict[int, list]) -> list[tuple]:
    rects = []
    for i, c in enumerate(spec.components):
        if c.kind in ("patch", "building", "water", "mosaic"):
            rects.append(c["rect"])
        elif c.kind == "objects":
            rects += [b[:4] for b in boxes_by_component[i]]
    return rects


def generate(spec: SceneSpec, classes: ClassTable = DEFAULT_CLASSES) -> PointCloud:
    """Sample a labeled cloud from ``spec``; identical specs give identical clouds."""
    spec.validate(classes)
    rng = make_rng(spec.seed)
    parts = _Parts()
    terrain = spec.terrain
    d = spec.density
    ex0, ey0 = spec.origin
    extent_rect = (ex0, ey0, ex0 + spec.extent[0], ey0 + spec.extent[1])

    # object placement first, so every exclusion rectangle is known
    boxes = {i: _object_boxes(rng, c) for i, c in enumerate(spec.components) if c.kind == "objects"}
    excl = _exclusions(spec, boxes)
    crowns: list[tuple[float, float, float]] = []
    tree_parts: list[tuple] = []
    for i, c in enumerate(spec.components):
        if c.kind == "trees":
            tree_parts.append((i, _tree_layout(rng, c)))
            crowns += [(t[0], t[1], t[2]) for t in tree_parts[-1][1]]

    for i, c in enumerate(spec.components):
        k = c.kind
        sigma = _noise(spec, c)
        if k == "ground":
            x, y = _uniform_rect(rng, extent_rect, d)
            keep = ~_inside(x, y, excl)
            x, y = x[keep], y[keep]
            eid = np.ones(len(x))
            ecount = np.ones(len(x))
            if crowns:
                under = _under_crowns(x, y, crowns)
                frac = min(spec.components[j]["ground_fraction"] for j, _ in tree_parts)
                drop = under & (rng.random(len(x)) >= frac)
                x, y, under = x[~drop], y[~drop], under[~drop]
                eid = np.where(under, 2.0, 1.0)
                ecount = eid.copy()
            z = terrain.height(x, y) + rng.normal(0, sigma, len(x))
            parts.add(x, y, z, c["class"], eid, ecount)
        elif k == "patch":
            x, y = _uniform_rect(rng, c["rect"], d * c["density_factor"])
            z = terrain.height(x, y) + rng.normal(0, math.hypot(sigma, c["roughness"]), len(x))
            parts.add(x, y, z, c["class"])
        elif k == "trees":
            layout = dict(tree_parts)[i]
            _gen_trees(rng, spec, c, layout, parts)
        elif k == "building":
            _gen_building(rng, spec, c, parts, sigma)
        elif k == "powerline":
            _gen_powerline(rng, spec, c, parts)
        elif k == "water":
            x, y = _uniform_rect(rng, c["rect"], d)
            keep = rng.random(len(x)) >= c["dropout"]
            x, y = x[keep], y[keep]
            rx0, ry0, rx1, ry1 = c["rect"]
            level = float(terrain.height((rx0 + rx1) / 2, (ry0 + ry1) / 2)) - c["depth"]
            z = level + rng.normal(0, min(sigma, 0.01), len(x))
            parts.add(x, y, z, c["class"])
        elif k == "objects":
            for bx0, by0, bx1, by1, h in boxes[i]:
                x, y = _uniform_rect(rng, (bx0, by0, bx1, by1), d)
                base = float(terrain.height((bx0 + bx1) / 2, (by0 + by1) / 2))
                parts.add(x, y, base + h + rng.normal(0, spec.noise, len(x)), c["class"])
        elif k == "mosaic":
            _gen_mosaic(rng, spec, c, parts, sigma)

    cols = parts.merged()
    n = len(cols["x"])
    cols.update(_beams(rng, spec, cols["x"], cols["z"]))
    codes = cols[LABEL].astype(np.int64)
    amp, width, refl = (np.empty(n) for _ in range(3))
    for code in np.unique(codes):
        m = codes == code
        model = attribute_model(int(code), spec.attributes)
        k = int(m.sum())
        amp[m] = rng.normal(*model.amplitude, k)
        width[m] = rng.normal(*model.echo_width, k)
        refl[m] = rng.normal(*model.reflectance, k)
    # multi-echo returns split the pulse energy
    amp = np.where(cols["echo_count"] > 1, amp * 0.7, amp)
    cols["amplitude"] = np.maximum(amp, 0.0)
    cols["echo_width"] = np.maximum(width, 0.5)
    cols["reflectance"] = np.clip(refl, 0.0, 2.0)
    order = ("x", "y", "z", "echo_id", "echo_count", "amplitude", "echo_width",
             "reflectance", "vx", "vy", "vz", LABEL)
    return from_arrays(classes=classes, **{k: cols[k] for k in order})


def _under_crowns(x, y, crowns) -> np.ndarray:
    m = np.zeros(len(x), dtype=bool)
    for cx, cy, r in crowns:
        m |= (x - cx) ** 2 + (y - cy) ** 2 <= r * r
    return m


def _tree_layout(rng, c: Component) -> list[tuple[float, float, float, float]]:
    x0, y0, x1, y1 = c["rect"]
    rlo, rhi = c["crown_radius"]
    hlo, hhi = c["height"]
    out = []
    for _ in range(c["count"]):
        r = rng.uniform(rlo, rhi)
        cx = rng.uniform(x0 + r, max(x1 - r, x0 + r))
        cy = rng.uniform(y0 + r, max(y1 - r, y0 + r))
        out.append((cx, cy, r, rng.uniform(hlo, hhi)))
    return out


def _gen_trees(rng, spec: SceneSpec, c: Component, layout, parts: _Parts) -> None:
    for cx, cy, r, h in layout:
        n = int(rng.poisson(math.pi * r * r * spec.density * c["canopy_density"]))
        rho = r * np.sqrt(rng.random(n))
        phi = rng.uniform(0, 2 * math.pi, n)
        x = cx + rho * np.cos(phi)
        y = cy + rho * np.sin(phi)
        depth = h * c["crown_fraction"]
        s = rho / r
        if c["shape"] == "cone":
            top = h * (1 - s) + (h - depth) * s
        else:
            top = (h - depth / 2) + depth / 2 * np.sqrt(np.maximum(1 - s * s, 0.0))
        bottom = (h - depth / 2) - depth / 2 * np.sqrt(np.maximum(1 - s * s, 0.0))
        if c["shape"] == "cone":
            bottom = np.full(n, h - depth)
        zrel = rng.uniform(bottom, np.maximum(top, bottom))
        z = spec.terrain.height(x, y) + zrel
        ecount = rng.choice([1.0, 2.0, 3.0], size=n, p=[0.2, 0.5, 0.3])
        eid = np.where(ecount > 1, np.floor(rng.random(n) * (ecount - 1)) + 1, 1.0)
        parts.add(x, y, z, c["class"], eid, ecount)


def _gen_building(rng, spec: SceneSpec, c: Component, parts: _Parts, sigma: float) -> None:
    x0, y0, x1, y1 = c["rect"]
    base = float(spec.terrain.height((x0 + x1) / 2, (y0 + y1) / 2))
    h = c["height"]
    x, y = _uniform_rect(rng, c["rect"], spec.density)
    z = np.full(len(x), base + h)
    if c["roof"] == "gable":
        t = math.tan(math.radians(c["pitch"]))
        if (x1 - x0) >= (y1 - y0):     # ridge along x
            half = (y1 - y0) / 2
            z += t * (half - np.abs(y - (y0 + y1) / 2))
        else:
            half = (x1 - x0) / 2
            z += t * (half - np.abs(x - (x0 + x1) / 2))
    elif c["roof"] != "flat":
        raise SpecError(f"building {c.name}: roof must be flat or gable")
    parts.add(x, y, z + rng.normal(0, sigma, len(x)), c["class"])
    if c["wall_class"] is None or c["wall_density"] <= 0:
        return
    wd = spec.density * c["wall_density"]
    for (ax, ay), (bx, by) in (((x0, y0), (x1, y0)), ((x1, y0), (x1, y1)),
                               ((x1, y1), (x0, y1)), ((x0, y1), (x0, y0))):
        length = math.hypot(bx - ax, by - ay)
        n = int(rng.poisson(length * h * wd))
        t = rng.random(n)
        wx = ax + t * (bx - ax)
        wy = ay + t * (by - ay)
        wz = base + rng.uniform(0.2, h, n)
        parts.add(wx, wy, wz, c["wall_class"])


def _gen_powerline(rng, spec: SceneSpec, c: Component, parts: _Parts) -> None:
    (ax, ay), (bx, by) = c["from"], c["to"]
    length = math.hypot(bx - ax, by - ay)
    if length == 0:
        return
    ux, uy = (bx - ax) / length, (by - ay) / length
    px, py = -uy, ux
    za = float(spec.terrain.height(ax, ay)) + c["height"]
    zb = float(spec.terrain.height(bx, by)) + c["height"]
    for k in range(c["wires"]):
        off = (k - (c["wires"] - 1) / 2) * c["wire_spacing"]
        n = int(rng.poisson(length * c["points_per_m"]))
        t = rng.random(n)
        x = ax + t * (bx - ax) + off * px
        y = ay + t * (by - ay) + off * py
        z = za + t * (zb - za) - 4 * c["sag"] * t * (1 - t)
        jitter = 0.03
        parts.add(x + rng.normal(0, jitter, n), y + rng.normal(0, jitter, n),
                  z + rng.normal(0, jitter, n), c["class"])


def _gen_mosaic(rng, spec: SceneSpec, c: Component, parts: _Parts, sigma: float) -> None:
    x0, y0, x1, y1 = c["rect"]
    T = c["tile"]
    codes = sorted(c["classes"])
    p = np.array([c["classes"][k] for k in codes], dtype=np.float64)
    p /= p.sum()
    nx = int(math.floor((x1 - x0) / T + 1e-9))
    ny = int(math.floor((y1 - y0) / T + 1e-9))
    for j in range(ny):
        for i in range(nx):
            code = codes[int(rng.choice(len(codes), p=p))]
            d = spec.density
            if c["density_jitter"] > 0:
                d *= math.exp(rng.uniform(-c["density_jitter"], c["density_jitter"]))
            style = c["styles"].get(code, "flat")
            rect = (x0 + i * T, y0 + j * T, x0 + (i + 1) * T, y0 + (j + 1) * T)
            if style == "dense":
                step = 1.0 / math.sqrt(d * c["dense_factor"])
                g = np.arange(step / 2, T, step)
                gx, gy = np.meshgrid(rect[0] + g, rect[1] + g)
                x = gx.ravel() + rng.uniform(-0.25, 0.25, gx.size) * step
                y = gy.ravel() + rng.uniform(-0.25, 0.25, gy.size) * step
                z = spec.terrain.height(x, y) + rng.normal(0, sigma, x.size)
                parts.add(x, y, z, code)
            elif style == "tilted":
                x, y = _uniform_rect(rng, rect, d)
                az = rng.uniform(0, 2 * math.pi)
                t = math.tan(math.radians(c["tilt"]))
                cx, cy = rect[0] + T / 2, rect[1] + T / 2
                z = (spec.terrain.height(x, y) + t * ((x - cx) * math.cos(az) + (y - cy) * math.sin(az))
                     + rng.normal(0, sigma, len(x)))
                parts.add(x, y, z, code)
            elif style == "layered":
                x, y = _uniform_rect(rng, rect, d / 2)
                parts.add(x, y, spec.terrain.height(x, y) + rng.normal(0, sigma, len(x)),
                          c["layer_class"])
                x, y = _uniform_rect(rng, rect, d / 2)
                parts.add(x, y, spec.terrain.height(x, y) + c["layer_gap"]
                          + rng.normal(0, sigma, len(x)), code)
            else:
                x, y = _uniform_rect(rng, rect, d)
                parts.add(x, y, spec.terrain.height(x, y) + rng.normal(0, sigma, len(x)), code)


def strip_centers(spec: SceneSpec) -> np.ndarray:
    """Across-track (x) positions of the flight lines covering the scene."""
    w = spec.strips.half_swath
    step = 2.0 * w * (1.0 - spec.strips.overlap)
    x0 = spec.origin[0]
    x1 = x0 + spec.extent[0]
    centers = [x0 + w * (1.0 - spec.strips.overlap)]
    while centers[-1] + w < x1:
        centers.append(centers[-1] + step)
    return np.array(centers)


def _beams(rng, spec: SceneSpec, x: np.ndarray, z: np.ndarray) -> dict[str, np.ndarray]:
    """Unit beam vectors from a randomly chosen covering strip per point."""
    centers = strip_centers(spec)
    w = spec.strips.half_swath
    n = len(x)
    cover = np.abs(x[:, None] - centers[None, :]) <= w
    # every point lies under at least one swath by construction
    ncov = cover.sum(axis=1)
    pick = np.floor(rng.random(n) * ncov).astype(np.int64)
    rank = np.cumsum(cover, axis=1) - 1
    which = np.argmax(cover & (rank == pick[:, None]), axis=1)
    dx = x - centers[which]
    dz = -(spec.terrain.base + spec.strips.altitude - z)
    dy = -dz * np.tan(np.radians(rng.normal(0.0, spec.strips.pitch_sd, n)))
    norm = np.sqrt(dx * dx + dy * dy + dz * dz)
    return {"vx": dx / norm, "vy": dy / norm, "vz": dz / norm}


# ------------------------------------------------------------------ border effect

@dataclass(frozen=True)
class BorderModel:
    """Scan-angle dependent attribute distortion.

    For a beam ``v`` let ``s = vx / |vz|`` (signed across-track tangent) and
    ``q = (vx^2 + vy^2) / vz^2`` (squared tangent of the scan angle).  Each
    affected column ``a`` with global sd ``S`` becomes

        a + strength * S * (signed * k_c * s + unsigned * q) + noise term

    where ``k_c`` is +1 or -1 alternating over the sorted class codes, and
    the noise term is normal with sd ``strength * S * noise * q``.  The
    signed part can be undone only from the beam components, the unsigned
    part from the scan angle alone.
    """

    columns: tuple[str, ...] = ("amplitude", "echo_width", "reflectance")
    signed: float = 3.0
    unsigned: float = 6.0
    noise: float = 0.5
    seed: int = 0


def inject_border_effect(cloud: PointCloud, strength: float,
                         model: BorderModel = BorderModel()) -> PointCloud:
    """Distort attributes as a function of beam geometry; 0 leaves the cloud as is."""
    missing = [c for c in ("vx", "vy", "vz") if c not in cloud.schema]
    if missing:
        raise ValueError(f"border effect needs beam columns {missing}")
    if strength < 0:
        raise ValueError("strength must be nonnegative")
    if strength == 0:
        return cloud
    vx, vy, vz = (cloud.masked(c) for c in ("vx", "vy", "vz"))
    ok = ~(np.isnan(vx) | np.isnan(vy) | np.isnan(vz))
    s = np.where(ok, vx / np.abs(np.where(ok, vz, -1.0)), 0.0)
    q = np.where(ok, (vx * vx + vy * vy) / np.where(ok, vz * vz, 1.0), 0.0)
    if cloud.is_labeled:
        codes = cloud.labels
        uniq = np.unique(codes)
        kappa = np.where(np.searchsorted(uniq, codes) % 2 == 0, 1.0, -1.0)
    else:
        kappa = np.ones(len(cloud))
    rng = make_rng(model.seed)
    out = {}
    for col in model.columns:
        if col not in cloud.schema:
            continue
        a = cloud.masked(col)
        S = float(np.nanstd(a)) or 1.0
        e = rng.standard_normal(len(a))
        shift = strength * S * (model.signed * kappa * s + model.unsigned * q
                                + model.noise * q * e)
        b = a + shift
        # keep values inside their valid ranges without moving nadir points
        if col == "amplitude":
            b = np.maximum(b, 0.0)
        elif col == "echo_width":
            b = np.maximum(b, 1e-3)
        elif col == "reflectance":
            b = np.clip(b, 0.0, 2.0)
        out[col] = np.where(q > 0, b, a)
    return cloud.with_columns(**out)


# ------------------------------------------------------------------ stock scenes

def flat_scene(extent=(100.0, 100.0), density: float = 6.0, seed: int = 0) -> SceneSpec:
    return SceneSpec(extent=tuple(extent), density=density, seed=seed,
                     components=[component("ground")])


def five_class_scene(seed: int = 0, size: float = 200.0) -> SceneSpec:
    """Ground, deciduous trees, flat and gabled roofs, water, one power line."""
    s = size / 200.0
    comps = [
        component("ground"),
        component("trees", "grove", rect=(10 * s, 110 * s, 90 * s, 190 * s), count=int(60 * s * s),
                  crown_radius=(2.0, 4.0), height=(8.0, 18.0)),
        component("trees", "row", rect=(110 * s, 10 * s, 190 * s, 30 * s), count=int(12 * s * s)),
        component("building", "hall", rect=(110 * s, 120 * s, 160 * s, 150 * s), height=7.0,
                  roof="flat"),
        component("building", "house1", rect=(120 * s, 50 * s, 140 * s, 62 * s), height=6.0,
                  pitch=35.0),
        component("building", "house2", rect=(160 * s, 50 * s, 180 * s, 66 * s), height=6.5,
                  pitch=30.0),
        component("building", "house3", rect=(165 * s, 160 * s, 185 * s, 175 * s), height=6.0,
                  pitch=40.0),
        component("water", "pond", rect=(20 * s, 20 * s, 80 * s, 70 * s), dropout=0.4),
        component("powerline", "line", **{"from": (2 * s, 95 * s), "to": (198 * s, 100 * s)},
                  height=22.0, wires=2, wire_spacing=6.0, points_per_m=4.0),
    ]
    return SceneSpec(extent=(size, size), density=6.0, noise=0.02, seed=seed,
                     terrain=Terrain(slope=(0.01, 0.005), amplitude=1.0, wavelength=120.0),
                     components=comps)


def default_scene(seed: int = 0) -> SceneSpec:
    """A mixed landscape touching most classes of the default table."""
    comps = [
        component("ground"),
        component("patch", "gravel", cls=3, rect=(10, 10, 40, 40), roughness=0.05),
        component("patch", "asphalt", cls=22, rect=(0, 45, 150, 52)),
        component("patch", "sand", cls=18, rect=(110, 10, 140, 40), roughness=0.02),
        component("trees", "deciduous", cls=5, rect=(10, 60, 70, 140), count=40),
        component("trees", "conifers", cls=6, rect=(80, 100, 140, 145), count=35,
                  shape="cone", crown_radius=(1.5, 2.5), height=(12.0, 22.0)),
        component("building", "house", cls=8, wall_class=24, rect=(60, 12, 90, 30),
                  height=7.0, pitch=35.0),
        component("building", "shed", cls=8, wall_class=24, rect=(95, 60, 120, 80),
                  height=5.0, roof="flat"),
        component("water", "river", rect=(0, 146, 150, 150), dropout=0.6),
        component("objects", "cars", cls=10, rect=(20, 45.5, 140, 51.5), count=8),
        component("powerline", "line", **{"from": (1, 55), "to": (149, 58)}, height=20.0),
    ]
    return SceneSpec(extent=(150.0, 150.0), density=6.0, seed=seed,
                     terrain=Terrain(slope=(0.01, 0.0), amplitude=0.8, wavelength=90.0),
                     components=comps)


def border_scene(seed: int = 0, size: float = 150.0) -> SceneSpec:
    """Flat tiles of four surface classes told apart by echo attributes only."""
    comps = [component("mosaic", "tiles", rect=(0.0, 0.0, size, size), tile=10.0,
                       classes={2: 1.0, 18: 1.0, 21: 1.0, 22: 1.0})]
    attrs = {
        2: AttributeModel((140, 12), (4.6, 0.10), (0.30, 0.03)),
        18: AttributeModel((160, 12), (4.4, 0.10), (0.45, 0.03)),
        21: AttributeModel((180, 12), (4.2, 0.10), (0.60, 0.03)),
        22: AttributeModel((200, 12), (4.0, 0.10), (0.75, 0.03)),
    }
    return SceneSpec(extent=(size, size), density=6.0, noise=0.02, seed=seed,
                     strips=Strips(altitude=300.0, max_angle=30.0, overlap=0.5),
                     components=comps, attributes=attrs)


GA_FEATURES = ("PointDensity", "NormalZ", "NormalizedZ")


def ga_scene(seed: int = 0, size: float = 80.0, tile: float = 4.0, tilt: float = 25.0,
             layer_gap: float = 0.5, amplitude: float = 0.3, wavelength: float = 20.0,
             dense_factor: float = 6.0, noise: float = 0.02,
             density_jitter: float = 0.5) -> SceneSpec:
    """Tile mosaic whose classes separate mainly on fine-scale features.

    Gravel tiles are a jittered grid at several times the ground density
    (same nearest-neighbour spacing as the sparser random ground), stone
    tiles are tilted planes, and ground/vegetation tiles carry a thin upper
    layer over ground points.  Tile densities vary so raw point counts are
    a poor proxy for density, and small tiles on rolling terrain make coarse
    radii blur all three signals.
    """
    comps = [component("mosaic", "tiles", rect=(0.0, 0.0, size, size), tile=tile,
                       classes={2: 0.4, 3: 0.2, 4: 0.2, 20: 0.2},
                       styles={3: "dense", 4: "tilted", 20: "layered"},
                       dense_factor=dense_factor, tilt=tilt, layer_gap=layer_gap, layer_class=2,
                       density_jitter=density_jitter)]
    neutral = AttributeModel((150, 30), (4.5, 0.3), (0.35, 0.05))
    return SceneSpec(extent=(size, size), density=6.0, noise=noise, seed=seed,
                     terrain=Terrain(amplitude=amplitude, wavelength=wavelength),
                     components=comps, attributes={c: neutral for c in (2, 3, 4, 20)})
