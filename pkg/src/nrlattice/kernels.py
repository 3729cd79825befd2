"""Hot integrator loops: jitted kernels plus pure-numpy fallbacks.

Both backends implement the identical stepping contract (same counters,
same channel ordering, same record schedule), so a run is reproducible
within a backend bit-for-bit; across backends results agree to floating
round-off of the transcendental functions.

Noise channel layout per step: channels [0, N) carry the per-site
amplitude sqrt(max(0, k1 - k2 + 2 k2 |alpha_r|^2)); channels [N, N+NB)
carry signed bond channels with amplitude sqrt(K_axis) (+ at r, - at
r+e), realizing an exact incidence-factor square root of the diffusion
matrix.
"""

from __future__ import annotations

import numpy as np

from . import rng
from .backend import _env_truthy  # noqa: F401  (import keeps env init order)

try:
    from numba import njit, prange
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap

    prange = range

_U32 = np.uint64(32)
_U11 = np.uint64(11)
_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = rng.PHILOX_M0
_M1 = rng.PHILOX_M1
_W0 = rng.PHILOX_W0
_W1 = rng.PHILOX_W1
_TO_UNIT = 2.0 ** -53
_SQRT_HALF = np.sqrt(0.5)
_TWO_PI = 2.0 * np.pi
_PURPOSE_DYN = np.uint64(rng.PURPOSE_DYN)


@njit(inline="always", cache=True)
def _mulhi64(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _U32
    b_lo = b & _MASK32
    b_hi = b >> _U32
    hi_lo = a_hi * b_lo
    cross = ((a_lo * b_lo) >> _U32) + (hi_lo & _MASK32) + a_lo * b_hi
    return a_hi * b_hi + (hi_lo >> _U32) + (cross >> _U32)


@njit(inline="always", cache=True)
def _philox_block(c0, c1, c2, c3, k0, k1):
    """Scalar Philox4x64-10; twin of rng.philox4x64 and numpy's Philox."""
    for _ in range(10):
        hi0 = _mulhi64(_M0, c0)
        lo0 = _M0 * c0
        hi1 = _mulhi64(_M1, c2)
        lo1 = _M1 * c2
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = k0 + _W0
        k1 = k1 + _W1
    return c0, c1, c2, c3


@njit(inline="always", cache=True)
def _unit(x):
    return (np.float64(x >> _U11) + 0.5) * _TO_UNIT


@njit(inline="always", cache=True)
def _boxmuller(xa, xb):
    r = np.sqrt(-2.0 * np.log(_unit(xa)))
    t = _TWO_PI * _unit(xb)
    return r * np.cos(t), r * np.sin(t)


@njit(cache=True)
def _rhs_into(out, f, left, right, j, kx, ky, kz, lam, gain, k2):
    """out <- hop + bond Laplacian - i*lam*conj(f) + gain*f - k2*|f|^2 f."""
    n = f.shape[0]
    for r in range(n):
        fr = f[r]
        acc = gain * fr - 1j * (lam * np.conj(fr)) \
            - k2 * (fr.real * fr.real + fr.imag * fr.imag) * fr
        l = left[0, r]
        if l >= 0:
            acc += (kx + j) * f[l] - kx * fr
        q = right[0, r]
        if q >= 0:
            acc += (kx - j) * f[q] - kx * fr
        l = left[1, r]
        if l >= 0:
            acc += ky * (f[l] - fr)
        q = right[1, r]
        if q >= 0:
            acc += ky * (f[q] - fr)
        l = left[2, r]
        if l >= 0:
            acc += kz * (f[l] - fr)
        q = right[2, r]
        if q >= 0:
            acc += kz * (f[q] - fr)
        out[r] = acc


@njit(cache=True)
def meanfield_rk4(f, left, right, j, kx, ky, kz, lam, gain, k2,
                  dt, n_steps, sample_every, out):
    """Fixed-step RK4 in place; samples into ``out`` every ``sample_every``.

    Returns -1 on success, else the step index at which the field blew up.
    """
    n = f.shape[0]
    s1 = np.empty(n, np.complex128)
    s2 = np.empty(n, np.complex128)
    s3 = np.empty(n, np.complex128)
    s4 = np.empty(n, np.complex128)
    tmp = np.empty(n, np.complex128)
    rec = 0
    for s in range(n_steps):
        if s % sample_every == 0:
            out[rec] = f
            rec += 1
        _rhs_into(s1, f, left, right, j, kx, ky, kz, lam, gain, k2)
        for r in range(n):
            tmp[r] = f[r] + 0.5 * dt * s1[r]
        _rhs_into(s2, tmp, left, right, j, kx, ky, kz, lam, gain, k2)
        for r in range(n):
            tmp[r] = f[r] + 0.5 * dt * s2[r]
        _rhs_into(s3, tmp, left, right, j, kx, ky, kz, lam, gain, k2)
        for r in range(n):
            tmp[r] = f[r] + dt * s3[r]
        _rhs_into(s4, tmp, left, right, j, kx, ky, kz, lam, gain, k2)
        chk = 0.0
        for r in range(n):
            fr = f[r] + (dt / 6.0) * (s1[r] + 2.0 * (s2[r] + s3[r]) + s4[r])
            f[r] = fr
            chk += fr.real + fr.imag
        if not np.isfinite(chk):
            return s
    if n_steps % sample_every == 0:
        out[rec] = f
    return -1


@njit(cache=True, parallel=True)
def twa_euler(traj, alive, death_step, left, right,
              bond_r, bond_s, bond_amp,
              j, kx, ky, kz, lam, k1, k2,
              dt, step0, n_steps, seed, record_every,
              rec_abar, rec_nbar, lx, clamp_counts):
    """Euler-Maruyama over an ensemble; trajectories run in parallel.

    Each trajectory owns its Philox stream keyed by (seed, trajectory),
    so the result is independent of the worker count. Records the y,z-
    averaged order-parameter and |alpha|^2 profiles every
    ``record_every`` steps (plus the final state when it lands on the
    grid). A trajectory going non-finite is frozen at its last finite
    state and flagged in ``death_step``.
    """
    m_count, n = traj.shape
    nb = bond_r.shape[0]
    n_channels = n + nb
    n_blocks = (n_channels + 1) // 2
    nyz = n // lx
    gain = k1 + k2
    sqdt = np.sqrt(dt)
    useed = np.uint64(seed)
    for m in prange(m_count):
        f = traj[m]
        drift = np.empty(n, np.complex128)
        noise = np.empty(n, np.complex128)
        zbuf = np.empty(n_channels, np.complex128)
        prev = np.empty(n, np.complex128)
        ukey = np.uint64(m)
        clamps = 0
        for s_local in range(n_steps):
            if s_local % record_every == 0:
                rec = s_local // record_every
                for x in range(lx):
                    sa = 0.0j
                    sn = 0.0
                    for i in range(nyz):
                        v = f[x + lx * i]
                        sa += v
                        sn += v.real * v.real + v.imag * v.imag
                    rec_abar[rec, m, x] = sa / nyz
                    rec_nbar[rec, m, x] = sn / nyz
            if alive[m] == 0:
                continue
            ustep = np.uint64(step0 + s_local)
            for b in range(n_blocks):
                x0, x1, x2, x3 = _philox_block(np.uint64(b), ustep,
                                               _PURPOSE_DYN, np.uint64(0),
                                               useed, ukey)
                na, nbm = _boxmuller(x0, x1)
                zbuf[2 * b] = complex(na * _SQRT_HALF, nbm * _SQRT_HALF)
                c = 2 * b + 1
                if c < n_channels:
                    nc, nd = _boxmuller(x2, x3)
                    zbuf[c] = complex(nc * _SQRT_HALF, nd * _SQRT_HALF)
            _rhs_into(drift, f, left, right, j, kx, ky, kz, lam, gain, k2)
            for r in range(n):
                fr = f[r]
                res = k1 - k2 + 2.0 * k2 * (fr.real * fr.real + fr.imag * fr.imag)
                if res < 0.0:
                    res = 0.0
                    clamps += 1
                noise[r] = np.sqrt(res) * zbuf[r]
            for b2 in range(nb):
                z = bond_amp[b2] * zbuf[n + b2]
                noise[bond_r[b2]] += z
                noise[bond_s[b2]] -= z
            chk = 0.0
            for r in range(n):
                prev[r] = f[r]
                fr = f[r] + dt * drift[r] + sqdt * noise[r]
                f[r] = fr
                chk += fr.real + fr.imag
            if not np.isfinite(chk):
                for r in range(n):
                    f[r] = prev[r]
                alive[m] = 0
                death_step[m] = step0 + s_local
        if n_steps % record_every == 0:
            rec = n_steps // record_every
            for x in range(lx):
                sa = 0.0j
                sn = 0.0
                for i in range(nyz):
                    v = f[x + lx * i]
                    sa += v
                    sn += v.real * v.real + v.imag * v.imag
                rec_abar[rec, m, x] = sa / nyz
                rec_nbar[rec, m, x] = sn / nyz
        clamp_counts[m] += clamps


# ---------------------------------------------------------------------------
# Pure-numpy fallbacks (identical contract, vectorized over the ensemble).


class _GatherPlan:
    """Precomputed safe gather indices + masks for vectorized stencils."""

    def __init__(self, left, right):
        self.idx = []
        self.mask = []
        for tab in (left, right):
            for ax in range(3):
                has = tab[ax] >= 0
                safe = np.where(has, tab[ax], 0)
                self.idx.append(safe)
                self.mask.append(has.astype(np.float64))


def _rhs_batch(f, plan, j, kx, ky, kz, lam, gain, k2):
    """Vectorized rhs over a (M, N) batch of fields."""
    out = gain * f - 1j * lam * np.conj(f) - k2 * (np.abs(f) ** 2) * f
    coeff_l = (kx + j, ky, kz)
    coeff_r = (kx - j, ky, kz)
    kvals = (kx, ky, kz)
    for ax in range(3):
        ml = plan.mask[ax]
        if ml.any():
            out += ml * (coeff_l[ax] * f[..., plan.idx[ax]] - kvals[ax] * f)
        mr = plan.mask[3 + ax]
        if mr.any():
            out += mr * (coeff_r[ax] * f[..., plan.idx[3 + ax]] - kvals[ax] * f)
    return out


def meanfield_rk4_numpy(f, left, right, j, kx, ky, kz, lam, gain, k2,
                        dt, n_steps, sample_every, out):
    plan = _GatherPlan(left, right)
    g = f[None, :]

    def rhs(v):
        return _rhs_batch(v, plan, j, kx, ky, kz, lam, gain, k2)

    rec = 0
    for s in range(n_steps):
        if s % sample_every == 0:
            out[rec] = g[0]
            rec += 1
        s1 = rhs(g)
        s2 = rhs(g + (0.5 * dt) * s1)
        s3 = rhs(g + (0.5 * dt) * s2)
        s4 = rhs(g + dt * s3)
        g = g + (dt / 6.0) * (s1 + 2.0 * (s2 + s3) + s4)
        if not np.all(np.isfinite(g.view(np.float64))):
            f[:] = g[0]
            return s
    if n_steps % sample_every == 0:
        out[rec] = g[0]
    f[:] = g[0]
    return -1


def _record_numpy(f, lx, rec_abar, rec_nbar, rec):
    m, n = f.shape
    prof = f.reshape(m, n // lx, lx)
    rec_abar[rec] = prof.mean(axis=1)
    rec_nbar[rec] = (np.abs(prof) ** 2).mean(axis=1)


def twa_euler_numpy(traj, alive, death_step, left, right,
                    bond_r, bond_s, bond_amp,
                    j, kx, ky, kz, lam, k1, k2,
                    dt, step0, n_steps, seed, record_every,
                    rec_abar, rec_nbar, lx, clamp_counts):
    m_count, n = traj.shape
    nb = bond_r.shape[0]
    n_channels = n + nb
    gain = k1 + k2
    sqdt = np.sqrt(dt)
    plan = _GatherPlan(left, right)
    traj_idx = np.arange(m_count)
    for s_local in range(n_steps):
        if s_local % record_every == 0:
            _record_numpy(traj, lx, rec_abar, rec_nbar, s_local // record_every)
        live = alive.astype(bool)
        if not live.any():
            continue
        z = rng.dynamics_noise(seed, traj_idx, step0 + s_local, n_channels)
        drift = _rhs_batch(traj, plan, j, kx, ky, kz, lam, gain, k2)
        res = k1 - k2 + 2.0 * k2 * np.abs(traj) ** 2
        neg = res < 0.0
        if neg.any():
            clamp_counts += neg.sum(axis=1)
            res[neg] = 0.0
        noise = np.sqrt(res) * z[:, :n]
        if nb:
            zb = bond_amp * z[:, n:]
            np.add.at(noise, (slice(None), bond_r), zb)
            np.subtract.at(noise, (slice(None), bond_s), zb)
        new = traj + dt * drift + sqdt * noise
        finite = np.all(np.isfinite(new.view(np.float64)).reshape(m_count, -1),
                        axis=1)
        died = live & ~finite
        if died.any():
            alive[died] = 0
            death_step[died] = step0 + s_local
        commit = live & finite
        traj[commit] = new[commit]
    if n_steps % record_every == 0:
        _record_numpy(traj, lx, rec_abar, rec_nbar, n_steps // record_every)
