"""Counter-based random numbers for reproducible trajectory ensembles.

Every random draw is a pure function of
``(master_seed, trajectory, purpose, step, block)`` through a Philox4x64-10
block cipher, so ensembles are bit-reproducible regardless of worker count,
chunked execution, or checkpoint/resume, and adding trajectories never
perturbs existing ones.

Layout (the contract shared with the jitted kernels):
  key     = (master_seed, trajectory_index)
  counter = (block_index, step_index, purpose, 0)
Each 4x64 output block feeds a Box-Muller transform producing 4 standard
normals = 2 complex unit-variance Gaussians; block ``b`` owns noise
channels ``2b`` and ``2b+1``.

The numpy implementation here is the reference; ``kernels.py`` carries a
scalar twin for the jitted path and the test suite pins both against
``numpy.random.Philox``.
"""

from __future__ import annotations

import numpy as np

# Philox4x64 round multipliers and Weyl key increments (Random123 constants).
PHILOX_M0 = np.uint64(0xD2E7470EE14C6C93)
PHILOX_M1 = np.uint64(0xCA5A826395121157)
PHILOX_W0 = np.uint64(0x9E3779B97F4A7C15)
PHILOX_W1 = np.uint64(0xBB67AE8584CAA73B)

PURPOSE_INIT = 0  # coherent-state Wigner sampling of the initial ensemble
PURPOSE_DYN = 1   # per-step dynamics noise

_U64_MASK32 = np.uint64(0xFFFFFFFF)
_U64_32 = np.uint64(32)
_U64_11 = np.uint64(11)
_TO_UNIT = 2.0 ** -53
_SQRT_HALF = np.sqrt(0.5)


def _mulhilo(a: np.uint64, b: np.ndarray):
    """(high, low) 64-bit words of the 128-bit product a*b, vectorized."""
    a_lo = a & _U64_MASK32
    a_hi = a >> _U64_32
    b_lo = b & _U64_MASK32
    b_hi = b >> _U64_32
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    cross = (lo_lo >> _U64_32) + (hi_lo & _U64_MASK32) + a_lo * b_hi
    hi = a_hi * b_hi + (hi_lo >> _U64_32) + (cross >> _U64_32)
    return hi, a * b


def philox4x64(c0, c1, c2, c3, k0, k1):
    """One Philox4x64-10 block per element; all args uint64 broadcastable.

    Matches numpy's Philox bit generator: ``Philox(counter=c, key=k)``
    emits the block for counter ``c + 1`` as its first four raw words.
    """
    c0 = np.atleast_1d(np.asarray(c0, dtype=np.uint64))
    c1 = np.atleast_1d(np.asarray(c1, dtype=np.uint64))
    c2 = np.atleast_1d(np.asarray(c2, dtype=np.uint64))
    c3 = np.atleast_1d(np.asarray(c3, dtype=np.uint64))
    k0 = np.atleast_1d(np.asarray(k0, dtype=np.uint64)).copy()
    k1 = np.atleast_1d(np.asarray(k1, dtype=np.uint64)).copy()
    for _ in range(10):
        hi0, lo0 = _mulhilo(PHILOX_M0, c0)
        hi1, lo1 = _mulhilo(PHILOX_M1, c2)
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = k0 + PHILOX_W0
        k1 = k1 + PHILOX_W1
    return c0, c1, c2, c3


def _u64_to_unit(x: np.ndarray) -> np.ndarray:
    """Map uint64 to the open interval (0, 1); never returns 0, log-safe."""
    return ((x >> _U64_11).astype(np.float64) + 0.5) * _TO_UNIT


def _boxmuller(xa: np.ndarray, xb: np.ndarray):
    """Two standard normals from two uint64 words."""
    r = np.sqrt(-2.0 * np.log(_u64_to_unit(xa)))
    t = (2.0 * np.pi) * _u64_to_unit(xb)
    return r * np.cos(t), r * np.sin(t)


def _noise_blocks(seed: int, traj: np.ndarray, purpose: int, step: int,
                  n_channels: int):
    """Complex unit-variance Gaussians, shape (len(traj), n_channels)."""
    n_blocks = (n_channels + 1) // 2
    m = traj.shape[0]
    blocks = np.tile(np.arange(n_blocks, dtype=np.uint64), m)
    keys1 = np.repeat(traj.astype(np.uint64), n_blocks)
    c1 = np.uint64(step)
    c2 = np.uint64(purpose)
    x0, x1, x2, x3 = philox4x64(blocks, c1, c2, np.uint64(0),
                                np.uint64(seed), keys1)
    n0, n1 = _boxmuller(x0, x1)
    n2, n3 = _boxmuller(x2, x3)
    out = np.empty((m, 2 * n_blocks), dtype=np.complex128)
    flat = out.reshape(-1)
    flat[0::2] = n0 + 1j * n1
    flat[1::2] = n2 + 1j * n3
    return out[:, :n_channels]


def dynamics_noise(seed: int, traj: np.ndarray, step: int,
                   n_channels: int) -> np.ndarray:
    """Per-channel complex noise zeta with E[zeta* zeta] = 1, E[zeta zeta] = 0."""
    z = _noise_blocks(seed, traj, PURPOSE_DYN, step, n_channels)
    z *= _SQRT_HALF
    return z


def initial_offsets(seed: int, traj: np.ndarray, n_sites: int) -> np.ndarray:
    """Coherent-state Wigner offsets: per-quadrature variance 1/4."""
    z = _noise_blocks(seed, traj, PURPOSE_INIT, 0, n_sites)
    z *= 0.5
    return z
