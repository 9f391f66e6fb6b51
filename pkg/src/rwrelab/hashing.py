"""Counter-based deterministic randomness.

All randomness in this package is derived from pure 64-bit hash functions of
(master seed, domain tag, structural indices, counter).  There is no stateful
global generator: the value drawn by any walker at any step is a function of
its key, so results are bitwise reproducible regardless of scheduling, thread
count, or evaluation order, and a lazily generated random field (one value per
lattice site) needs no storage.

The mixer is the splitmix64 finalizer, applied once per absorbed word; a
finalized key maps to a uniform in [0, 1) via its top 53 bits.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MULT1 = 0xBF58476D1CE4E5B9
_MULT2 = 0x94D049BB133111EB
U53_INV = 2.0**-53

# Domain tags.  Distinct tags decorrelate the random streams of different
# subsystems that share a master seed.
TAG_ENV = 1          # site -> environment randomness (mixing weights etc.)
TAG_WALK = 2         # walker step uniforms
TAG_ENV_SEED = 3     # replica -> per-replica environment master seed
TAG_STEP_TABLE = 4   # (site, visit count) step tables for couplings
TAG_RETRY = 5        # rejection/attempt counters
TAG_EXPERIMENT = 6   # experiment-level derivations

_U = np.uint64
_G = _U(GOLDEN)
_M1 = _U(_MULT1)
_M2 = _U(_MULT2)
_S30, _S27, _S31, _S11 = _U(30), _U(27), _U(31), _U(11)


def mix64(h: int) -> int:
    """splitmix64 finalizer on a 64-bit integer (scalar, pure Python)."""
    h &= MASK64
    h ^= h >> 30
    h = (h * _MULT1) & MASK64
    h ^= h >> 27
    h = (h * _MULT2) & MASK64
    h ^= h >> 31
    return h


def absorb64(state: int, *parts: int) -> int:
    """Continue a key derivation from an existing key state (scalar)."""
    for p in parts:
        state = mix64((state + GOLDEN + (p & MASK64)) & MASK64)
    return state


def key64(*parts: int) -> int:
    """Stable 64-bit key from a sequence of integers (absorbed from zero).

    Order-sensitive: key64(a, b) != key64(b, a) in general.  Negative parts
    are absorbed via their two's-complement representation.
    """
    return absorb64(0, *parts)


def unit_uniform(key: int) -> float:
    """Map a finalized 64-bit key to a float in [0, 1) via its top 53 bits."""
    return ((key & MASK64) >> 11) * U53_INV


def mix64_array(h: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer applied elementwise to a uint64 array."""
    h = h.copy()
    h ^= h >> _S30
    h *= _M1
    h ^= h >> _S27
    h *= _M2
    h ^= h >> _S31
    return h


def _as_u64(part) -> np.ndarray | np.uint64:
    if isinstance(part, (int, np.integer)):
        return _U(int(part) & MASK64)
    p = np.asarray(part)
    if p.dtype == np.uint64:
        return p
    if p.dtype == np.int64:
        return p.view(np.uint64)
    return p.astype(np.int64).view(np.uint64)


def absorb_array(h: np.ndarray, part) -> np.ndarray:
    """One absorption round: mix(h + GOLDEN + part), vectorized.

    Matches key64 absorption exactly, so scalar and vector code paths agree.
    """
    return mix64_array(h + _G + _as_u64(part))


def key64_array(base, *parts) -> np.ndarray:
    """Vectorized key64: the base is absorbed from zero (elementwise equal to
    key64(base, *parts)), then the remaining parts."""
    b = _as_u64(base)
    if np.ndim(b) == 0:
        b = np.asarray([b], dtype=np.uint64)
    h = absorb_array(np.zeros(b.shape, dtype=np.uint64), b)
    for p in parts:
        h = absorb_array(h, p)
    return h


def uniforms_array(keys: np.ndarray) -> np.ndarray:
    """Finalized uint64 key array -> float64 uniforms in [0, 1)."""
    return (keys >> _S11) * U53_INV


def site_keys(env_seeds, coords: np.ndarray) -> np.ndarray:
    """Keys for lattice sites: absorb the ENV tag then each coordinate.

    env_seeds: scalar or (B,) uint64; coords: (B, d) integer array.
    Returns a (B,) uint64 key array.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
    h = key64_array(np.asarray(env_seeds, dtype=np.uint64), TAG_ENV)
    h = np.broadcast_to(h, (coords.shape[0],)).copy()
    for j in range(coords.shape[1]):
        h = absorb_array(h, coords[:, j])
    return h


def tagged_env_keys(env_seeds: np.ndarray) -> np.ndarray:
    """Per-walker env seeds with the ENV tag pre-absorbed (hot-path helper:
    site keys then need only the coordinate absorptions)."""
    return key64_array(np.asarray(env_seeds, dtype=np.uint64), TAG_ENV)
