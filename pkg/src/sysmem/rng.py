"""Counter-based uniforms keyed by (seed, trial, slot).

Every draw is a pure function of its key, so a trial produces the same
numbers whether it runs alone, in a chunk, or on another worker.  The
mixer is SplitMix64's finalizer applied to a combination of the three key
parts, each pre-mixed with a distinct odd constant.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_K_TRIAL = np.uint64(0xD1B54A32D192ED03)
_K_SLOT = np.uint64(0x8CB92BA72F3D8DD7)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def uniforms(seed: int, trials: np.ndarray, slots: np.ndarray) -> np.ndarray:
    """U[0, 1) doubles for the broadcast of ``trials`` against ``slots``."""
    key = np.uint64(int(seed) & _MASK64)
    t = np.asarray(trials, dtype=np.uint64)
    s = np.asarray(slots, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix(key * _GOLDEN + _GOLDEN)
        z = _mix(z ^ (t * _K_TRIAL + _GOLDEN))
        z = _mix(z ^ (s * _K_SLOT + _GOLDEN))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def uniform_block(seed: int, first_trial: int, n_trials: int, n_slots: int) -> np.ndarray:
    """An ``(n_trials, n_slots)`` block of uniforms starting at ``first_trial``."""
    trials = np.arange(first_trial, first_trial + n_trials, dtype=np.uint64)[:, None]
    slots = np.arange(n_slots, dtype=np.uint64)[None, :]
    return uniforms(seed, trials, slots)
