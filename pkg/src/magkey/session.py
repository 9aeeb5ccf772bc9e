"""Live simulated typing sessions driving the full recognition loop.

A session owns a virtual 50 Hz magnetometer clock. Consumers move the
simulated magnet (or lift it off the board) and poll an append-only event
log; between calls the session lazily synthesizes the elapsed samples, runs
silence removal, polarity correction, streaming segmentation, and posterior
estimation, and emits one key event per detected keystroke.

The streaming segmenter fires as soon as a stationary run reaches the
minimum dwell (rather than at run end like the batch API), so a held magnet
produces its event without waiting for lift-off.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import dataclass

import numpy as np

from .config import (
    ANCHOR_S,
    ESTIMATE_WINDOW,
    SAMPLE_RATE_HZ,
    SILENCE_S,
    TRANSITION_S,
    SimScenario,
)
from .errors import DomainError, InsufficientDataError
from .estimate import estimate_key_cell, posterior
from .evaluate import capture_cell_window, jittered_cell_positions
from .fingerprint import Fingerprint
from .keymap import KeyLayout, map_key
from .offset import Polarity, SilenceStats, detect_polarity, estimate_silence
from .regen import fit_affine, regenerate
from .segment import SegmenterConfig
from .simulate import dipole_field, fields_at_positions, rotation_matrix

_session_counter = itertools.count(1)

SILENCE_VARIANCE_HEADROOM = 16.0  # warn when silence variance exceeds this x sigma^2


@dataclass
class _MagnetState:
    """Piecewise-linear magnet motion target in session time."""

    pos: np.ndarray | None = None        # current committed position, None = absent
    amp: float = 0.0
    target: np.ndarray | None = None
    target_amp: float = 0.0
    move_t0: float = 0.0
    move_t1: float = 0.0

    def at(self, t: float) -> tuple[np.ndarray | None, float]:
        if t >= self.move_t1 or self.move_t1 <= self.move_t0:
            return self.target, self.target_amp
        f = (t - self.move_t0) / (self.move_t1 - self.move_t0)
        amp = self.amp + (self.target_amp - self.amp) * f
        if self.target is None:
            return self.pos, amp
        if self.pos is None:
            return self.target, amp
        return self.pos + (self.target - self.pos) * f, amp


class LiveSession:
    """One simulated board + magnet with the recognition pipeline attached."""

    def __init__(self, scenario: SimScenario, factory_fp: Fingerprint,
                 layout: KeyLayout | None = None, seed: int = 0,
                 segmenter: SegmenterConfig = SegmenterConfig(),
                 window_len: int = ESTIMATE_WINDOW,
                 rate_hz: float = SAMPLE_RATE_HZ,
                 auto_silence: bool = True):
        self.id = f"s{next(_session_counter):06d}"
        self.scenario = scenario
        self.factory_fp = factory_fp
        self.active_fp = factory_fp
        self.layout = layout
        self.segmenter = segmenter
        self.window_len = window_len
        self.rate_hz = rate_hz
        self.rng = np.random.default_rng(seed)
        self.lock = threading.Lock()

        self.clock = 0.0
        self.sample_count = 0
        self.created_wall = time.monotonic()
        self.last_access_wall = self.created_wall
        self._wall_anchor = self.created_wall

        self.silence: SilenceStats | None = None
        self.polarity = Polarity.NORMAL
        self.affine: dict | None = None
        self.events: list[dict] = []
        self._seq = itertools.count(1)

        self.magnet_state = _MagnetState()
        self._buf = np.empty((0, 3))          # corrected offset-free tail
        self._buf_t = np.empty(0)
        self._cursor = segmenter.window - 1   # next window-end index to score
        self._run_len = 0
        self._fired = False

        if auto_silence:
            self.calibrate_silence(SILENCE_S)

    # -- time -------------------------------------------------------------

    def touch(self) -> None:
        self.last_access_wall = time.monotonic()

    def advance_wall(self) -> None:
        """Advance the virtual clock by wall time elapsed since the last call."""
        now = time.monotonic()
        dt = now - self._wall_anchor
        self._wall_anchor = now
        if dt > 0:
            self.advance(min(dt, 30.0))

    def advance(self, dt: float) -> None:
        n = int((self.clock + dt) * self.rate_hz) - self.sample_count
        if n <= 0:
            self.clock += dt
            return
        t = (np.arange(n) + self.sample_count) / self.rate_hz
        self._ingest(t, self._synth(t))
        self.sample_count += n
        self.clock += dt

    # -- simulation -------------------------------------------------------

    def _synth(self, t: np.ndarray) -> np.ndarray:
        board, env, magnet = (self.scenario.board, self.scenario.env,
                              self.scenario.magnet)
        n = t.shape[0]
        b = np.broadcast_to(env.earth_field + env.background_field, (n, 3)).copy()
        for i, ti in enumerate(t):
            pos, amp = self.magnet_state.at(ti)
            if pos is not None and amp > 0.0:
                b[i] += amp * dipole_field(magnet, board.magnet_pos3(pos),
                                           board.sensor_pos)
        rot = rotation_matrix(*env.rotation)
        measured = b @ rot.T @ env.soft_iron.T + env.hard_iron[None, :]
        if env.noise_sigma > 0:
            measured = measured + self.rng.normal(0.0, env.noise_sigma, size=(n, 3))
        return measured

    # -- pipeline ---------------------------------------------------------

    def _ingest(self, t: np.ndarray, raw: np.ndarray) -> None:
        if self.silence is None:
            return
        corrected = raw - self.silence.mean[None, :]
        if self.polarity is Polarity.FLIPPED:
            corrected = -corrected
        self._buf = np.concatenate([self._buf, corrected])
        self._buf_t = np.concatenate([self._buf_t, t])
        self._scan()
        self._trim()

    def _scan(self) -> None:
        w = self.segmenter.window
        while self._cursor < self._buf.shape[0]:
            window = self._buf[self._cursor - w + 1:self._cursor + 1]
            v = float(window.var(axis=0, ddof=1).sum())
            if v <= self.segmenter.var_threshold:
                self._run_len += 1
                if self._run_len == self.segmenter.min_dwell and not self._fired:
                    start = self._cursor - self.segmenter.min_dwell + 1
                    self._emit(start, self._cursor)
                    self._fired = True
            else:
                self._run_len = 0
                self._fired = False
            self._cursor += 1

    def _trim(self) -> None:
        # keep enough tail for the next variance window plus a pending emit span
        need = self.segmenter.window + self.segmenter.min_dwell + self.window_len
        drop = self._buf.shape[0] - 2 * need
        if drop > 0:
            self._buf = self._buf[drop:]
            self._buf_t = self._buf_t[drop:]
            self._cursor -= drop

    def _emit(self, start: int, end: int) -> None:
        samples = self._buf[start:end + 1][:self.window_len]
        # a lifted magnet leaves a silence-level stationary stream; don't type on it
        gate = max(6.0 * self.scenario.env.noise_sigma, 1.0)
        if float(np.linalg.norm(samples.mean(axis=0))) < gate:
            return
        est = estimate_key_cell(samples, self.active_fp, top_k=1)
        post = posterior(samples, self.active_fp)
        top = [{"cell": int(c), "p": float(post.probs[c])} for c in post.ranking[:5]]
        event = {
            "seq": next(self._seq),
            "type": "key",
            "t_start": float(self._buf_t[start]),
            "t_end": float(self._buf_t[end]),
            "cell": est.cell,
            "pos": [float(est.pos[0]), float(est.pos[1])],
            "top": top,
            "key": None,
            "label": None,
        }
        if self.layout is not None:
            ev = map_key(est, self.layout, (event["t_start"], event["t_end"]))
            if ev is not None:
                event["key"] = ev.key
                event["label"] = ev.label
        self.events.append(event)

    # -- consumer API -------------------------------------------------------

    def set_magnet(self, pos=None, absent: bool = False, settle_s: float = 0.0,
                   transition_s: float = TRANSITION_S) -> None:
        self.advance_wall()
        cur_pos, cur_amp = self.magnet_state.at(self.clock)
        if absent:
            target, amp = None, 0.0
        else:
            x, y = float(pos[0]), float(pos[1])
            if not self.scenario.board.contains(x, y):
                raise DomainError(f"magnet position ({x}, {y}) outside board")
            target, amp = np.array([x, y]), 1.0
        self.magnet_state = _MagnetState(
            pos=cur_pos, amp=cur_amp, target=target, target_amp=amp,
            move_t0=self.clock, move_t1=self.clock + transition_s)
        if settle_s > 0:
            self.advance(settle_s)

    def poll_events(self, since: int = 0) -> tuple[list[dict], int]:
        self.advance_wall()
        out = [e for e in self.events if e["seq"] > since]
        next_since = self.events[-1]["seq"] if self.events else since
        return out, max(since, next_since)

    # -- calibration steps ---------------------------------------------------

    def calibrate_silence(self, duration_s: float = SILENCE_S) -> dict:
        """Capture a silence period in bulk virtual time and store its stats.

        The capture uses whatever magnet state the session is in, so a magnet
        placed or still settling during the step inflates the variance; the
        response flags that instead of failing.
        """
        n = int(round(duration_s * self.rate_hz))
        if n < 50:
            raise InsufficientDataError("silence capture must cover at least 50 samples")
        t = (np.arange(n) + self.sample_count) / self.rate_hz
        raw = self._synth(t)
        self.sample_count += n
        self.clock += duration_s
        stats = estimate_silence(raw)
        self.silence = stats
        self._buf = np.empty((0, 3))
        self._buf_t = np.empty(0)
        self._cursor = self.segmenter.window - 1
        self._run_len = 0
        self._fired = False
        floor = SILENCE_VARIANCE_HEADROOM * max(self.scenario.env.noise_sigma, 0.05) ** 2
        warning = None
        if float(stats.var.max()) > floor:
            warning = ("silence variance exceeds the sensor noise floor; "
                       "remove the magnet and redo this step")
        return {"silence": stats.as_dict(), "warning": warning}

    def calibrate_polarity(self, cell: int | None = None,
                           duration_s: float = 1.0) -> dict:
        """Reference-cell click: capture, compare against the fingerprint, correct."""
        if self.silence is None:
            raise DomainError("run the silence step before polarity")
        if cell is None:
            if self.layout is None or self.layout.reference_key is None:
                raise DomainError("no reference cell: give one or set a layout reference key")
            key = self.layout.key_by_id(self.layout.reference_key)
            cell = min(key.cells)
        n = int(round(duration_s * self.rate_hz))
        xy = jittered_cell_positions(self.scenario.board, int(cell), n, self.rng)
        raw = fields_at_positions(self.scenario.board, self.scenario.env,
                                  self.scenario.magnet, xy, self.rng)
        self.sample_count += n
        self.clock += duration_s
        window = raw - self.silence.mean[None, :]
        self.polarity = detect_polarity(window, self.active_fp, int(cell))
        return {"polarity": self.polarity.value, "cell": int(cell)}

    def calibrate_anchors(self, cells, duration_s: float = ANCHOR_S) -> dict:
        """Two-anchor capture, affine fit against the factory fingerprint, regeneration."""
        if self.silence is None:
            raise DomainError("run the silence step before anchors")
        if len(cells) != 2:
            raise DomainError("anchor step needs exactly two cells")
        n = int(round(duration_s * self.rate_hz))
        anchors = []
        for cell in cells:
            raw = capture_cell_window(self.scenario, int(cell), n, self.rng)
            self.sample_count += n
            self.clock += duration_s
            window = raw - self.silence.mean[None, :]
            if self.polarity is Polarity.FLIPPED:
                window = -window
            anchors.append((int(cell), window))
        amap = fit_affine(anchors, self.factory_fp)
        self.active_fp = regenerate(self.factory_fp, amap, {"session": self.id})
        self.affine = amap.as_dict()
        return {"affine": self.affine, "cells": [int(c) for c in cells]}

    # -- snapshots -------------------------------------------------------------

    def state(self) -> dict:
        cur_pos, cur_amp = self.magnet_state.at(self.clock)
        return {
            "id": self.id,
            "clock": self.clock,
            "samples": self.sample_count,
            "calibrated": self.silence is not None,
            "silence": self.silence.as_dict() if self.silence else None,
            "polarity": self.polarity.value,
            "affine": self.affine,
            "layout": self.layout.layout_id if self.layout else None,
            "magnet": None if cur_pos is None else [float(cur_pos[0]), float(cur_pos[1])],
            "n_events": len(self.events),
        }
