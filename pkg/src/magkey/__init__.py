"""Magnet-over-grid keystroke localization toolkit."""

from .board import BoardSpec, GridShape
from .config import SimScenario, default_board, default_env, default_magnet, default_scenario
from .errors import (
    AmbiguousPolarityError,
    DomainError,
    FormatError,
    IllConditionedAnchorsError,
    IncompleteFingerprintError,
    InsufficientDataError,
    MagkeyError,
)
from .estimate import Estimate, Posterior, estimate_key_cell, posterior
from .fingerprint import Fingerprint, build_fingerprint, cell_log_likelihood
from .keymap import KeyEvent, Key, KeyLayout, calculator_layout, map_key, validate_layout
from .offset import (
    Polarity,
    SilenceStats,
    apply_polarity,
    detect_polarity,
    estimate_silence,
    remove_silence,
)
from .regen import AffineMap, default_anchor_cells, fit_affine, regenerate
from .segment import Keystroke, SegmenterConfig, segment_stream, window_variance
from .simulate import ABSENT, EnvSpec, MagnetSpec, dipole_field, field_at, synth_trace
from .trace import MagSample, Trace, read_trace_csv, write_trace_csv

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
