"""Scenario configuration, unit conversion, 3-D geometry, and UAV mobility.

All positions are full 3-D Cartesian (x, y, z) in meters.  The base station
is a ULA with M antennas, the ground reflecting surface is an N1 x N2
rectangular array on a building face, and the flying surface is an F1 x F2
rectangular array under the UAV.  The UAV flies at constant altitude inside
the playable rectangle [0, area_x] x [0, area_y].
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Raised on malformed configuration documents or invariant violations."""


JITTERED_LINKS = ("BU", "UR", "Uk")
RICIAN_LINKS = ("BU", "UR", "Rk", "Uk")


@dataclass(frozen=True)
class Position3:
    """A point in 3-D space, meters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for v in (self.x, self.y, self.z):
            if not math.isfinite(v):
                raise ConfigError(f"invariant violation: non-finite coordinate {v!r}")

    def as_tuple(self):
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class LinkAngles:
    """Azimuth/elevation pair describing one link's arrival-departure direction.

    Azimuth is measured from +x; elevation is the polar angle such that the
    two array-facing direction cosines are cos(az)*sin(el) along x and
    sin(az)*sin(el) along z.
    """

    azimuth: float
    elevation: float

    def dir_cos_x(self) -> float:
        return math.cos(self.azimuth) * math.sin(self.elevation)

    def dir_cos_z(self) -> float:
        return math.sin(self.azimuth) * math.sin(self.elevation)


def _pos(v) -> Position3:
    if isinstance(v, Position3):
        return v
    if isinstance(v, (list, tuple)) and len(v) == 3:
        return Position3(float(v[0]), float(v[1]), float(v[2]))
    raise ConfigError(f"expected 3-D position, got {v!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full physical and episode parameterization of the network."""

    area_x: float = 800.0
    area_y: float = 800.0
    bs_pos: Position3 = field(default_factory=lambda: Position3(0.0, 400.0, 25.0))
    ris_pos: Position3 = field(default_factory=lambda: Position3(360.0, 200.0, 80.0))
    uav_start: Position3 = field(default_factory=lambda: Position3(80.0, 80.0, 100.0))
    uav_end: Position3 = field(default_factory=lambda: Position3(80.0, 80.0, 100.0))
    node_pos: tuple = (
        Position3(600.0, 600.0, 0.0),
        Position3(650.0, 450.0, 0.0),
        Position3(450.0, 650.0, 0.0),
        Position3(700.0, 550.0, 0.0),
    )
    H_U: float = 100.0
    v_max: float = 20.0
    slot_dt: float = 1.0
    L: int = 250
    M: int = 4
    F1: int = 6
    F2: int = 6
    N1: int = 8
    N2: int = 8
    spacing_ratio: float = 0.25
    rician: dict = field(default_factory=lambda: {k: 5.0 for k in RICIAN_LINKS})
    beta_ref: float = 1e-3
    alpha_cascade: float = 3.7
    eps_direct: float = 2.7
    jitter_psi: dict = field(default_factory=lambda: {k: 0.0 for k in JITTERED_LINKS})
    jitter_ratio: float = 0.0
    P_dl: float = 10.0
    P_ul: float = 10.0
    sigma2: float = 1e-11
    dl_weight: float = 1.0
    penalty: float = -10.0
    seed: int = 0

    @property
    def K(self) -> int:
        return len(self.node_pos)

    @property
    def F(self) -> int:
        return self.F1 * self.F2

    @property
    def N(self) -> int:
        return self.N1 * self.N2

    @property
    def max_step_dist(self) -> float:
        """Largest horizontal distance coverable in one slot."""
        return self.slot_dt * self.v_max

    def __post_init__(self):
        def check(cond, key, value):
            if not cond:
                raise ConfigError(f"invariant violation: {key}={value!r}")

        check(self.v_max > 0, "v_max", self.v_max)
        check(self.slot_dt > 0, "slot_dt", self.slot_dt)
        check(self.L >= 1, "L", self.L)
        check(self.K >= 1, "node_pos", self.node_pos)
        check(self.M >= 1, "M", self.M)
        check(self.F1 >= 1 and self.F2 >= 1, "F1,F2", (self.F1, self.F2))
        check(self.N1 >= 1 and self.N2 >= 1, "N1,N2", (self.N1, self.N2))
        check(0.0 <= self.dl_weight <= 1.0, "dl_weight", self.dl_weight)
        check(self.sigma2 > 0, "sigma2", self.sigma2)
        check(self.beta_ref > 0, "beta_ref", self.beta_ref)
        check(self.spacing_ratio > 0, "spacing_ratio", self.spacing_ratio)
        check(self.penalty <= 0, "penalty", self.penalty)
        check(self.jitter_ratio >= 0, "jitter_ratio", self.jitter_ratio)
        for k in JITTERED_LINKS:
            check(k in self.jitter_psi and self.jitter_psi[k] >= 0,
                  f"jitter_psi[{k}]", self.jitter_psi.get(k))
        for k in RICIAN_LINKS:
            check(k in self.rician and self.rician[k] >= 0,
                  f"rician[{k}]", self.rician.get(k))
        for name, p in (("uav_start", self.uav_start), ("uav_end", self.uav_end)):
            inside = 0.0 <= p.x <= self.area_x and 0.0 <= p.y <= self.area_y
            check(inside, name, p.as_tuple())

    def in_bounds(self, pos: Position3) -> bool:
        return 0.0 <= pos.x <= self.area_x and 0.0 <= pos.y <= self.area_y

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Position3):
                out[f.name] = list(v.as_tuple())
            elif f.name == "node_pos":
                out[f.name] = [list(p.as_tuple()) for p in v]
            elif isinstance(v, dict):
                out[f.name] = dict(v)
            else:
                out[f.name] = v
        return out

    def replace(self, **overrides) -> "ScenarioConfig":
        d = self.to_dict()
        d.update(overrides)
        return config_from_dict(d)


def dbm_to_watts(p_dbm: float) -> float:
    """Convert a power in dBm to watts (10^((p-30)/10))."""
    if not math.isfinite(p_dbm):
        raise ConfigError(f"non-finite dBm value {p_dbm!r}")
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


# Keys that accept a "<key>_dbm" variant in configuration documents.
_DBM_KEYS = ("P_dl", "P_ul", "sigma2", "beta_ref")


def _expand_link_map(value, links, key) -> dict:
    """Accept a scalar (applied to every link) or a per-link mapping."""
    if isinstance(value, (int, float)):
        return {k: float(value) for k in links}
    if isinstance(value, dict):
        out = {k: float(value[k]) if k in value else None for k in links}
        for k, v in out.items():
            if v is None:
                raise ConfigError(f"invariant violation: {key} missing link {k!r}")
        return out
    raise ConfigError(f"invariant violation: {key}={value!r}")


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Build a validated ScenarioConfig from a plain mapping of overrides."""
    if not isinstance(doc, dict):
        raise ConfigError(f"configuration must be a mapping, got {type(doc).__name__}")
    doc = dict(doc)

    for key in _DBM_KEYS:
        dbm_key = key + "_dbm"
        if dbm_key in doc:
            if key in doc:
                raise ConfigError(f"both {key} and {dbm_key} given")
            doc[key] = dbm_to_watts(float(doc.pop(dbm_key)))

    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")

    kwargs = {}
    for key, value in doc.items():
        if key in ("bs_pos", "ris_pos", "uav_start", "uav_end"):
            kwargs[key] = _pos(value)
        elif key == "node_pos":
            if not isinstance(value, (list, tuple)) or len(value) == 0:
                raise ConfigError(f"invariant violation: node_pos={value!r}")
            kwargs[key] = tuple(_pos(p) for p in value)
        elif key == "rician":
            kwargs[key] = _expand_link_map(value, RICIAN_LINKS, "rician")
        elif key == "jitter_psi":
            kwargs[key] = _expand_link_map(value, JITTERED_LINKS, "jitter_psi")
        elif key in ("L", "M", "F1", "F2", "N1", "N2", "seed"):
            kwargs[key] = int(value)
        else:
            kwargs[key] = float(value)
    return ScenarioConfig(**kwargs)


def load_config(text: str) -> ScenarioConfig:
    """Parse a JSON configuration document into a validated ScenarioConfig.

    All keys are optional; omitted keys take the defaults above.  Power-like
    keys may be given as "<key>_dbm" and are converted at load.
    """
    try:
        doc = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration parse failure: {exc}") from exc
    return config_from_dict(doc)


def load_config_file(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return load_config(fh.read())


def link_distance(a: Position3, b: Position3) -> float:
    """Euclidean 3-D distance between two points."""
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


def link_angles(frm: Position3, to: Position3) -> LinkAngles:
    """Azimuth/elevation of the link from `frm` toward `to`.

    Chosen so that cos(az)*sin(el) = dx/d and sin(az)*sin(el) = dz/d, the two
    direction cosines that drive rectangular-array steering phases.
    """
    d = link_distance(frm, to)
    if d == 0.0:
        raise ValueError("link_angles undefined for zero-distance pair")
    dx = to.x - frm.x
    dz = to.z - frm.z
    azimuth = math.atan2(dz, dx)
    sin_el = math.sqrt(dx * dx + dz * dz) / d
    elevation = math.asin(min(1.0, sin_el))
    return LinkAngles(azimuth=azimuth, elevation=elevation)


def propose_move(pos: Position3, speed: float, heading: float,
                 cfg: ScenarioConfig) -> Position3:
    """Advance the UAV one slot: clamped speed along heading, altitude held.

    Never rejects: speed is clamped into [0, v_max], so the horizontal
    displacement can never exceed slot_dt * v_max.
    """
    v = min(max(speed, 0.0), cfg.v_max)
    step = v * cfg.slot_dt
    return Position3(pos.x + step * math.cos(heading),
                     pos.y + step * math.sin(heading),
                     pos.z)


@dataclass(frozen=True)
class MobilityViolation:
    kind: str          # "step" | "terminal" | "start"
    slot: int
    distance: float
    bound: float


def check_mobility(trajectory, cfg: ScenarioConfig):
    """Audit a full trajectory (L+1 points) against the movement limits.

    Reports per-slot horizontal hops above slot_dt*v_max, a terminal point
    farther than one hop from uav_end, and a start point that is not
    uav_start.  An empty list means the trajectory is feasible.
    """
    if len(trajectory) != cfg.L + 1:
        raise ValueError(
            f"trajectory length {len(trajectory)}, expected L+1 = {cfg.L + 1}")
    d_max = cfg.max_step_dist
    tol = 1e-9
    out = []

    start = trajectory[0]
    d0 = math.hypot(start.x - cfg.uav_start.x, start.y - cfg.uav_start.y)
    if d0 > tol:
        out.append(MobilityViolation("start", 0, d0, 0.0))

    for l in range(cfg.L):
        a, b = trajectory[l], trajectory[l + 1]
        hop = math.hypot(b.x - a.x, b.y - a.y)
        if hop > d_max + tol:
            out.append(MobilityViolation("step", l, hop, d_max))

    last = trajectory[-1]
    d_end = math.hypot(last.x - cfg.uav_end.x, last.y - cfg.uav_end.y)
    if d_end > d_max + tol:
        out.append(MobilityViolation("terminal", cfg.L, d_end, d_max))
    return out
