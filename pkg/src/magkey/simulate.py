"""Magnetometer trace synthesis for a magnet moving over the board.

Replaces phone hardware: a point-dipole magnet plus Earth/background field,
rigid-body rotation, optional hard/soft-iron distortion, and per-axis
Gaussian sensor noise. Unit convention: dipole moments in uT*cm^3 and
distances in cm give fields directly in uT.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .board import BoardSpec
from .errors import DomainError
from .trace import Trace

# Marker for "no magnet on the board" path entries.
ABSENT = None

MIN_DIPOLE_DISTANCE_CM = 0.5


@dataclass(frozen=True)
class MagnetSpec:
    """Point-dipole magnet: moment vector in board frame (uT*cm^3) and polarity sign."""

    moment: np.ndarray
    polarity: int = 1

    def __post_init__(self):
        m = np.asarray(self.moment, dtype=float).reshape(3).copy()
        if not np.isfinite(m).all() or np.linalg.norm(m) == 0.0:
            raise DomainError("magnet moment must be finite and non-zero")
        if self.polarity not in (1, -1):
            raise DomainError("polarity must be +1 or -1")
        m.setflags(write=False)
        object.__setattr__(self, "moment", m)

    def scaled(self, factor: float) -> "MagnetSpec":
        return MagnetSpec(self.moment * factor, self.polarity)

    def flipped(self) -> "MagnetSpec":
        return MagnetSpec(self.moment, -self.polarity)

    def as_dict(self) -> dict:
        return {"moment": [float(v) for v in self.moment], "polarity": self.polarity}

    @staticmethod
    def from_dict(d: dict) -> "MagnetSpec":
        return MagnetSpec(np.asarray(d["moment"], dtype=float), int(d.get("polarity", 1)))


@dataclass(frozen=True)
class EnvSpec:
    """Ambient field, sensor pose, and noise model.

    ``rotation`` holds (roll, pitch, yaw) in radians applied as Rx@Ry@Rz to the
    total board-frame field. ``soft_iron``/``hard_iron`` distort the rotated
    field as S @ B + H; both default to no-op. Background drift, when enabled,
    adds ``drift_amplitude * sin(2*pi*t/drift_period_s)`` per axis.
    """

    earth_field: np.ndarray = field(default_factory=lambda: np.array([30.0, 0.0, 40.0]))
    background_field: np.ndarray = field(default_factory=lambda: np.zeros(3))
    noise_sigma: float = 0.0
    rotation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    hard_iron: np.ndarray = field(default_factory=lambda: np.zeros(3))
    soft_iron: np.ndarray = field(default_factory=lambda: np.eye(3))
    drift_amplitude: np.ndarray = field(default_factory=lambda: np.zeros(3))
    drift_period_s: float = 60.0

    def __post_init__(self):
        for name, shape in (
            ("earth_field", 3), ("background_field", 3), ("rotation", 3),
            ("hard_iron", 3), ("drift_amplitude", 3),
        ):
            v = np.asarray(getattr(self, name), dtype=float).reshape(shape).copy()
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        s = np.asarray(self.soft_iron, dtype=float).reshape(3, 3).copy()
        if abs(np.linalg.det(s)) < 1e-12:
            raise DomainError("soft_iron matrix must be invertible")
        s.setflags(write=False)
        object.__setattr__(self, "soft_iron", s)
        if self.noise_sigma < 0:
            raise DomainError("noise_sigma must be >= 0")
        if self.drift_period_s <= 0:
            raise DomainError("drift_period_s must be positive")

    def with_noise(self, sigma: float) -> "EnvSpec":
        return EnvSpec(self.earth_field, self.background_field, sigma, self.rotation,
                       self.hard_iron, self.soft_iron, self.drift_amplitude, self.drift_period_s)

    def as_dict(self) -> dict:
        return {
            "earth_field": [float(v) for v in self.earth_field],
            "background_field": [float(v) for v in self.background_field],
            "noise_sigma": self.noise_sigma,
            "rotation": [float(v) for v in self.rotation],
            "hard_iron": [float(v) for v in self.hard_iron],
            "soft_iron": [[float(v) for v in row] for row in self.soft_iron],
            "drift_amplitude": [float(v) for v in self.drift_amplitude],
            "drift_period_s": self.drift_period_s,
        }

    @staticmethod
    def from_dict(d: dict) -> "EnvSpec":
        kw = {}
        for key in ("earth_field", "background_field", "rotation", "hard_iron",
                    "soft_iron", "drift_amplitude"):
            if key in d:
                kw[key] = np.asarray(d[key], dtype=float)
        if "noise_sigma" in d:
            kw["noise_sigma"] = float(d["noise_sigma"])
        if "drift_period_s" in d:
            kw["drift_period_s"] = float(d["drift_period_s"])
        return EnvSpec(**kw)


def rotation_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rx(roll) @ Ry(pitch) @ Rz(yaw)."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rx @ ry @ rz


def dipole_field(magnet: MagnetSpec, magnet_pos, sensor_pos) -> np.ndarray:
    """Field of a point dipole at the sensor, in uT.

    ``(3 (m.rhat) rhat - m) / |r|^3`` with m = polarity * moment and
    r = sensor_pos - magnet_pos (cm). Distances below 0.5 cm are rejected;
    the point model diverges there.
    """
    r = np.asarray(sensor_pos, dtype=float) - np.asarray(magnet_pos, dtype=float)
    dist = np.linalg.norm(r)
    if dist < MIN_DIPOLE_DISTANCE_CM:
        raise DomainError(
            f"magnet-sensor distance {dist:.3g} cm below {MIN_DIPOLE_DISTANCE_CM} cm guard"
        )
    m = magnet.polarity * magnet.moment
    rhat = r / dist
    return (3.0 * np.dot(m, rhat) * rhat - m) / dist**3


def _dipole_field_many(magnet: MagnetSpec, positions: np.ndarray, sensor_pos: np.ndarray) -> np.ndarray:
    """Vectorized dipole field for (n,3) magnet positions."""
    r = sensor_pos[None, :] - positions
    dist = np.linalg.norm(r, axis=1)
    if positions.shape[0] and dist.min() < MIN_DIPOLE_DISTANCE_CM:
        raise DomainError(
            f"magnet-sensor distance {dist.min():.3g} cm below {MIN_DIPOLE_DISTANCE_CM} cm guard"
        )
    m = magnet.polarity * magnet.moment
    rhat = r / dist[:, None]
    mdot = rhat @ m
    return (3.0 * mdot[:, None] * rhat - m[None, :]) / dist[:, None] ** 3


@dataclass(frozen=True)
class PathSegment:
    """One constant-velocity piece of the sampled magnet trajectory.

    ``entry`` is the index of the path entry this dwell realizes, or None for
    a transition. Positions are (x, y) board cm or None when the magnet is off
    the board for the whole segment. ``amp0``/``amp1`` ramp the dipole
    contribution for lift-off/put-down transitions.
    """

    start: int
    n: int
    pos0: tuple | None
    pos1: tuple | None
    amp0: float
    amp1: float
    entry: int | None


def plan_path(board: BoardSpec, path, rate_hz: float, transition_s: float) -> list[PathSegment]:
    """Turn (position-or-ABSENT, dwell seconds) entries into sample segments.

    Dwells are sampled at the entry position; between consecutive entries a
    transition of ``transition_s`` is inserted where the position interpolates
    linearly. Moves to or from ABSENT keep the on-board endpoint's position and
    ramp the dipole amplitude instead.
    """
    if rate_hz <= 0:
        raise DomainError("rate_hz must be positive")
    if transition_s < 0:
        raise DomainError("transition_s must be >= 0")
    entries = []
    for i, (pos, dwell) in enumerate(path):
        if dwell <= 0:
            raise DomainError(f"path entry {i}: dwell must be positive")
        if pos is not ABSENT:
            x, y = float(pos[0]), float(pos[1])
            if not board.contains(x, y):
                raise DomainError(f"path entry {i}: position ({x}, {y}) outside board")
            pos = (x, y)
        entries.append((pos, float(dwell)))

    segs: list[PathSegment] = []
    idx = 0
    n_trans = int(round(transition_s * rate_hz))
    for i, (pos, dwell) in enumerate(entries):
        if i > 0 and n_trans > 0:
            prev = entries[i - 1][0]
            if prev is ABSENT and pos is ABSENT:
                seg = PathSegment(idx, n_trans, None, None, 0.0, 0.0, None)
            elif prev is ABSENT:
                seg = PathSegment(idx, n_trans, pos, pos, 0.0, 1.0, None)
            elif pos is ABSENT:
                seg = PathSegment(idx, n_trans, prev, prev, 1.0, 0.0, None)
            else:
                seg = PathSegment(idx, n_trans, prev, pos, 1.0, 1.0, None)
            segs.append(seg)
            idx += n_trans
        n_dwell = int(round(dwell * rate_hz))
        if n_dwell < 1:
            raise DomainError(f"path entry {i}: dwell shorter than one sample period")
        amp = 0.0 if pos is ABSENT else 1.0
        segs.append(PathSegment(idx, n_dwell, pos, pos, amp, amp, i))
        idx += n_dwell
    return segs


def _sample_kinematics(board: BoardSpec, segs: list[PathSegment]) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample magnet position (n,3) and dipole amplitude (n,)."""
    n = segs[-1].start + segs[-1].n if segs else 0
    pos = np.zeros((n, 3))
    amp = np.zeros(n)
    for seg in segs:
        sl = slice(seg.start, seg.start + seg.n)
        if seg.entry is None:
            # interior fractions keep transition samples strictly between endpoints
            f = (np.arange(seg.n) + 1.0) / (seg.n + 1.0)
        else:
            f = np.zeros(seg.n)
        amp[sl] = seg.amp0 + (seg.amp1 - seg.amp0) * f
        if seg.pos0 is None:
            continue
        p0 = board.magnet_pos3(seg.pos0)
        p1 = board.magnet_pos3(seg.pos1)
        pos[sl] = p0[None, :] + (p1 - p0)[None, :] * f[:, None]
    return pos, amp


def synth_trace(
    board: BoardSpec,
    env: EnvSpec,
    magnet: MagnetSpec,
    path,
    rate_hz: float = 50.0,
    transition_s: float = 0.5,
    rng=None,
) -> Trace:
    """Synthesize a magnetometer trace for a magnet path over the board.

    ``path`` is a sequence of ``(position, dwell_s)`` with position either an
    (x, y) board-cm pair or ABSENT. Per sample the board-frame field is
    earth + background(t) + amplitude * dipole; the measured value applies the
    rigid-body rotation, soft/hard iron, then additive Gaussian noise.
    Passing the same seed reproduces the trace bit-exactly.
    """
    segs = plan_path(board, path, rate_hz, transition_s)
    positions, amp = _sample_kinematics(board, segs)
    n = positions.shape[0]
    t = np.arange(n) / rate_hz

    b_total = np.broadcast_to(env.earth_field + env.background_field, (n, 3)).copy()
    if np.any(env.drift_amplitude != 0.0):
        b_total += env.drift_amplitude[None, :] * np.sin(2 * np.pi * t / env.drift_period_s)[:, None]

    present = amp > 0.0
    if present.any():
        dip = _dipole_field_many(magnet, positions[present], board.sensor_pos)
        b_total[present] += amp[present, None] * dip

    rot = rotation_matrix(*env.rotation)
    measured = b_total @ rot.T @ env.soft_iron.T + env.hard_iron[None, :]

    if env.noise_sigma > 0.0:
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        measured = measured + gen.normal(0.0, env.noise_sigma, size=(n, 3))
    return Trace(t, measured)


def field_at(board: BoardSpec, env: EnvSpec, magnet: MagnetSpec, xy=None) -> np.ndarray:
    """Noise-free measured field with the magnet at board position ``xy`` (or absent)."""
    b = env.earth_field + env.background_field
    if xy is not None:
        b = b + dipole_field(magnet, board.magnet_pos3(xy), board.sensor_pos)
    rot = rotation_matrix(*env.rotation)
    return env.soft_iron @ (rot @ b) + env.hard_iron


def fields_at_positions(board: BoardSpec, env: EnvSpec, magnet: MagnetSpec,
                        xy_positions: np.ndarray, rng=None) -> np.ndarray:
    """Measured fields for (n, 2) magnet board positions, one sample each.

    Applies the full measurement chain (rotation, iron effects, noise when
    ``env.noise_sigma`` > 0 and an rng or seed is given or created).
    """
    xy = np.asarray(xy_positions, dtype=float).reshape(-1, 2)
    pos3 = np.concatenate([xy, np.full((xy.shape[0], 1), board.magnet_height)], axis=1)
    b = env.earth_field + env.background_field + _dipole_field_many(magnet, pos3, board.sensor_pos)
    rot = rotation_matrix(*env.rotation)
    measured = b @ rot.T @ env.soft_iron.T + env.hard_iron[None, :]
    if env.noise_sigma > 0.0:
        gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        measured = measured + gen.normal(0.0, env.noise_sigma, size=measured.shape)
    return measured
