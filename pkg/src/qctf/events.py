"""Synthetic events: helices drawn from a box in parameter space, crossed with
cylindrical layers, smeared on the surface and thinned by layer inefficiency."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

from . import helix
from .errors import ConfigError, DataError
from .geometry import DetectorGeometry

PARAM_NAMES = ("d0", "z0", "phi0", "cot_theta", "kappa")

DEFAULT_BOUNDS = (
    (-0.05, 0.05),
    (-5.0, 5.0),
    (-math.pi, math.pi),
    (-1.0, 1.0),
    (-0.01, 0.01),
)


@dataclass(frozen=True)
class GeneratorConfig:
    n: int = 50
    param_bounds: tuple = DEFAULT_BOUNDS
    distribution: str = "uniform"          # or "mixture"
    hit_sigma: float = 0.005
    efficiency: float = 1.0
    rng_seed: int = 0
    adversarial: bool = False
    # mixture mode: clusters of truncated Gaussians on top of a uniform floor
    n_clusters: int = 4
    cluster_width: float = 0.05            # fraction of each bound's width
    uniform_weight: float = 0.2

    def __post_init__(self):
        if self.n < 0:
            raise ConfigError("n must be non-negative")
        if len(self.param_bounds) != 5:
            raise ConfigError("param_bounds needs five (lo, hi) pairs")
        for name, (lo, hi) in zip(PARAM_NAMES, self.param_bounds):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ConfigError(f"invalid bound for {name}: ({lo}, {hi})")
        lo, hi = self.param_bounds[2]
        if lo < -math.pi or hi > math.pi:
            raise ConfigError("phi0 bounds must lie in [-pi, pi]")
        if not 0 < self.efficiency <= 1:
            raise ConfigError("efficiency must be in (0, 1]")
        if self.hit_sigma < 0:
            raise ConfigError("hit_sigma must be non-negative")
        if self.distribution not in ("uniform", "mixture"):
            raise ConfigError(f"unknown distribution {self.distribution!r}")
        if self.distribution == "mixture" and not 0 < self.uniform_weight <= 1:
            raise ConfigError("mixture needs a positive uniform weight to keep the density positive")

    def effective_bounds(self, geometry: DetectorGeometry) -> np.ndarray:
        b = np.array(self.param_bounds, dtype=float)
        if not self.adversarial:
            return b
        # every helix inside a few noise widths of the box centre, so that all
        # hits on a layer sit in one patch of fixed size
        sigma = max(self.hit_sigma, 1e-3)
        r_out = geometry.layer_radii[-1]
        centre = b.mean(axis=1)
        half = np.array([sigma / 2, sigma, sigma / r_out, sigma / r_out, sigma / r_out ** 2])
        return np.stack([centre - half, centre + half], axis=1)


@dataclass
class EventRecord:
    geometry: DetectorGeometry
    layers: list[np.ndarray]                   # per layer (count, 3)
    hit_particle: list[np.ndarray] | None = None   # per layer (count,) particle ids
    particles: np.ndarray | None = None        # (n, 5) perigee parameters by particle id

    def __post_init__(self):
        self.layers = [np.asarray(a, dtype=float).reshape(-1, 3) for a in self.layers]
        if len(self.layers) != self.geometry.n_layers:
            raise DataError(f"{len(self.layers)} hit layers for a {self.geometry.n_layers}-layer detector")
        if self.hit_particle is not None:
            self.hit_particle = [np.asarray(a, dtype=np.int64) for a in self.hit_particle]

    @property
    def has_truth(self) -> bool:
        return self.hit_particle is not None

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def count(self, layer: int) -> int:
        return len(self.layers[layer])

    @property
    def n_star(self) -> int:
        """Largest per-layer hit count."""
        return max((len(a) for a in self.layers), default=0)

    def point(self, layer: int, j: int) -> np.ndarray:
        return self.layers[layer][j]

    @cached_property
    def uv(self) -> list[np.ndarray]:
        out = []
        for r, pts in zip(self.geometry.layer_radii, self.layers):
            out.append(np.stack([r * np.arctan2(pts[:, 1], pts[:, 0]), pts[:, 2]], axis=-1)
                       if len(pts) else np.zeros((0, 2)))
        return out

    def particle_hits(self, pid: int) -> list[tuple[int, int]]:
        """(layer, j) of every surviving hit of one particle."""
        if not self.has_truth:
            return []
        out = []
        for l, ids in enumerate(self.hit_particle):
            for j in np.flatnonzero(ids == pid):
                out.append((l, int(j)))
        return out


def _sample_params(cfg: GeneratorConfig, bounds: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    lo, hi = bounds[:, 0], bounds[:, 1]
    if cfg.distribution == "uniform" or cfg.adversarial:
        return lo + (hi - lo) * rng.random((cfg.n, 5))
    centres = lo + (hi - lo) * rng.random((cfg.n_clusters, 5))
    width = cfg.cluster_width * (hi - lo)
    out = np.empty((cfg.n, 5))
    for i in range(cfg.n):
        if rng.random() < cfg.uniform_weight:
            out[i] = lo + (hi - lo) * rng.random(5)
            continue
        c = centres[rng.integers(cfg.n_clusters)]
        while True:
            x = c + width * rng.standard_normal(5)
            if np.all((x >= lo) & (x <= hi)):
                out[i] = x
                break
    return out


def generate_event(config: GeneratorConfig, geometry: DetectorGeometry) -> EventRecord:
    """Draw one event.  Deterministic in ``config.rng_seed``."""
    rng = np.random.default_rng(config.rng_seed)
    bounds = config.effective_bounds(geometry)
    params = _sample_params(config, bounds, rng)
    layers, owners = [], []
    for r in geometry.layer_radii:
        pts, s = helix.intersect_many(params, r)
        hit = np.isfinite(s)
        # surface smearing in (r*phi, z)
        du = config.hit_sigma * rng.standard_normal(config.n)
        dv = config.hit_sigma * rng.standard_normal(config.n)
        keep = hit & (rng.random(config.n) < config.efficiency)
        phi = np.arctan2(pts[:, 1], pts[:, 0]) + du / r
        z = pts[:, 2] + dv
        ids = np.flatnonzero(keep)
        order = rng.permutation(len(ids))
        ids = ids[order]
        layer_pts = np.stack([r * np.cos(phi[ids]), r * np.sin(phi[ids]), z[ids]], axis=-1)
        layers.append(layer_pts.reshape(-1, 3))
        owners.append(ids.astype(np.int64))
    return EventRecord(geometry, layers, owners, params)


def grouped_event(n_groups: int, group_size: int, geometry: DetectorGeometry, rng_seed: int = 0,
                  decoys: int = 0, spread: float = 1e-4) -> EventRecord:
    """Noiseless prompt straight tracks in tight bundles, plus optional displaced decoys.

    Bundles are spread evenly over half a turn in azimuth (a full turn would
    let antipodal bundles line up through the origin), so under tight prompt
    seeding cuts a triplet is good exactly when its three hits share a bundle,
    giving
    ``n_groups * group_size**3`` good seeds.  Decoys have a large impact
    parameter and never enter a good seed.
    """
    rng = np.random.default_rng(rng_seed)
    rows = []
    offset = rng.random() * 2 * math.pi
    for g in range(n_groups):
        phi_g = offset + math.pi * g / n_groups
        cot_g = rng.uniform(-0.5, 0.5)
        for _ in range(group_size):
            phi = helix.wrap_angle(phi_g + spread * rng.uniform(-1, 1))
            rows.append((0.0, 0.0, float(phi), cot_g + spread * rng.uniform(-1, 1), 0.0))
    for _ in range(decoys):
        rows.append((rng.choice([-1, 1]) * rng.uniform(0.3, 0.6), rng.uniform(-5, 5), rng.uniform(-math.pi, math.pi),
                     rng.uniform(-1, 1), rng.uniform(-0.01, 0.01)))
    params = np.array(rows, dtype=float).reshape(-1, 5)
    layers, owners = [], []
    for r in geometry.layer_radii:
        pts, s = helix.intersect_many(params, r)
        ids = rng.permutation(np.flatnonzero(np.isfinite(s)))
        layers.append(pts[ids])
        owners.append(ids.astype(np.int64))
    return EventRecord(geometry, layers, owners, params)


def constructed_event(n: int, a: int, geometry: DetectorGeometry, rng_seed: int = 0) -> EventRecord:
    """``n`` hits per layer with ``n**a`` good prompt seeds.

    ``a = 1`` puts every track in its own bundle; ``a = 2`` uses ``sqrt(n)``
    bundles of ``sqrt(n)`` tracks, so ``n`` must be a perfect square.
    """
    if a == 1:
        return grouped_event(n, 1, geometry, rng_seed)
    if a == 2:
        s = math.isqrt(n)
        if s * s != n:
            raise ConfigError("a = 2 needs a perfect-square n")
        return grouped_event(s, s, geometry, rng_seed)
    raise ConfigError("a must be 1 or 2")


def hits_in_patch(event: EventRecord, layer: int, phi_range, z_range) -> int:
    """Hits with phi in [lo, hi) and z in [lo, hi) on one layer."""
    pts = event.layers[layer]
    if not len(pts):
        return 0
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    z = pts[:, 2]
    inside = ((phi >= phi_range[0]) & (phi < phi_range[1])
              & (z >= z_range[0]) & (z < z_range[1]))
    return int(np.count_nonzero(inside))


# -- file formats -----------------------------------------------------------------

def event_to_dict(event: EventRecord) -> dict:
    d = {
        "geometry": event.geometry.to_dict(),
        "layers": [[{"j": j, "x": float(p[0]), "y": float(p[1]), "z": float(p[2])}
                    for j, p in enumerate(pts)] for pts in event.layers],
    }
    if event.has_truth:
        d["truth"] = {
            "hit_particle": [[int(i) for i in ids] for ids in event.hit_particle],
            "particles": {str(pid): [float(v) for v in row] for pid, row in enumerate(event.particles)},
        }
    return d


def event_from_dict(d: dict) -> EventRecord:
    try:
        geometry = DetectorGeometry.from_dict(d["geometry"])
        layers = []
        for hits in d["layers"]:
            hits = sorted(hits, key=lambda h: h["j"])
            if [h["j"] for h in hits] != list(range(len(hits))):
                raise DataError("hit indices must be 0..count-1 on every layer")
            layers.append(np.array([[h["x"], h["y"], h["z"]] for h in hits], dtype=float).reshape(-1, 3))
        truth = d.get("truth")
        if truth is None:
            return EventRecord(geometry, layers)
        parts = truth["particles"]
        n = max((int(k) for k in parts), default=-1) + 1
        particles = np.full((n, 5), np.nan)
        for k, row in parts.items():
            particles[int(k)] = row
        return EventRecord(geometry, layers, truth["hit_particle"], particles)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed event record: {exc}") from exc


def dumps_event(event: EventRecord) -> str:
    return json.dumps(event_to_dict(event))


def loads_event(text: str) -> EventRecord:
    try:
        return event_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise DataError(f"event is not valid JSON: {exc}") from exc


def _g17(x: float) -> str:
    return "%.17g" % x


def event_to_csv(event: EventRecord) -> str:
    """Flat CSV, one hit per row; geometry and particle parameters ride in '#' header lines."""
    buf = io.StringIO()
    buf.write("# geometry " + json.dumps(event.geometry.to_dict()) + "\n")
    if event.has_truth:
        for pid, row in enumerate(event.particles):
            buf.write("# particle %d %s\n" % (pid, " ".join(_g17(v) for v in row)))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["layer", "j", "x", "y", "z", "particle_id"])
    for l, pts in enumerate(event.layers):
        for j, p in enumerate(pts):
            pid = int(event.hit_particle[l][j]) if event.has_truth else -1
            w.writerow([l, j, _g17(p[0]), _g17(p[1]), _g17(p[2]), pid])
    return buf.getvalue()


def event_from_csv(text: str) -> EventRecord:
    geometry = None
    particles = {}
    rows = []
    for line in text.splitlines():
        if line.startswith("# geometry "):
            geometry = DetectorGeometry.from_dict(json.loads(line[len("# geometry "):]))
        elif line.startswith("# particle "):
            parts = line.split()[2:]
            particles[int(parts[0])] = [float(v) for v in parts[1:]]
        elif line.strip():
            rows.append(line)
    if geometry is None:
        raise DataError("CSV event lacks a '# geometry' header line")
    reader = csv.DictReader(rows)
    per_layer: list[list] = [[] for _ in range(geometry.n_layers)]
    for r in reader:
        per_layer[int(r["layer"])].append((int(r["j"]), float(r["x"]), float(r["y"]), float(r["z"]),
                                           int(r["particle_id"])))
    layers, owners = [], []
    for hits in per_layer:
        hits.sort()
        layers.append(np.array([h[1:4] for h in hits], dtype=float).reshape(-1, 3))
        owners.append(np.array([h[4] for h in hits], dtype=np.int64))
    if not particles:
        return EventRecord(geometry, layers)
    n = max(particles) + 1
    arr = np.full((n, 5), np.nan)
    for pid, row in particles.items():
        arr[pid] = row
    return EventRecord(geometry, layers, owners, arr)


def save_event(event: EventRecord, path) -> None:
    path = Path(path)
    text = event_to_csv(event) if path.suffix == ".csv" else dumps_event(event)
    path.write_text(text)


def load_event(path) -> EventRecord:
    path = Path(path)
    text = path.read_text()
    return event_from_csv(text) if path.suffix == ".csv" else loads_event(text)


def with_geometry(cfg: GeneratorConfig, **kw) -> GeneratorConfig:
    return replace(cfg, **kw)
