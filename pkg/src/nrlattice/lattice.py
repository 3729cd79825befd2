"""Lattice geometry, model parameters, and the nearest-neighbor stencils.

Site indexing convention (fixed everywhere, including file outputs):
x runs fastest, then y, then z, i.e. ``index = x + lx*(y + ly*z)``.

Boundary handling is bond-summed: stencil sums run over existing bonds
only, consistent with the bond-local correlated-loss dissipators that
generate the diffusive coupling. Under open boundaries an edge site
simply has fewer terms (one-sided stencil); no ghost sites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

AXES = ("x", "y", "z")
BC_OPEN = "open"
BC_PERIODIC = "periodic"


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Coupling constants of the driven-dissipative lattice model.

    j_hop       : imaginary-hopping rate along x (nonreciprocity strength)
    lambda_pair : pair-drive rate, breaks U(1) down to Z2
    gain_k1     : incoherent single-particle gain
    loss_k2     : two-particle loss (nonlinear saturation), must be > 0
    k_diff      : correlated single-particle loss per axis (Kx, Ky, Kz)
    """

    j_hop: float
    lambda_pair: float
    gain_k1: float
    loss_k2: float
    k_diff: Tuple[float, float, float]

    def __post_init__(self):
        vals = (self.j_hop, self.lambda_pair, self.gain_k1, self.loss_k2,
                *self.k_diff)
        if not all(math.isfinite(v) for v in vals):
            raise LatticeError("model parameters must be finite")
        if self.loss_k2 <= 0:
            raise LatticeError(
                "loss_k2 must be > 0 (nonlinear saturation keeps the dynamics bounded)")
        if self.lambda_pair < 0:
            raise LatticeError("lambda_pair must be >= 0")
        if self.gain_k1 < 0:
            raise LatticeError("gain_k1 must be >= 0")
        if len(self.k_diff) != 3:
            raise LatticeError("k_diff must have exactly three components")
        if any(k < 0 for k in self.k_diff):
            raise LatticeError("k_diff components must be >= 0")

    @property
    def strong_nonreciprocity(self) -> bool:
        """True in the |J| > Kx regime where the chiral phases live."""
        return abs(self.j_hop) > self.k_diff[0]

    def with_gain(self, gain_k1: float) -> "ModelParams":
        return ModelParams(self.j_hop, self.lambda_pair, gain_k1,
                           self.loss_k2, self.k_diff)

    def uniform_fixed_point(self, gain_shift: float = 0.0) -> complex:
        """Uniform steady amplitude a0 = sqrt((k1+shift+lambda)/(2 k2)) * (1-i).

        gain_shift=loss_k2 gives the fixed point of the stochastic drift,
        whose effective one-body gain is k1 + k2.
        """
        c = self.gain_k1 + gain_shift + self.lambda_pair
        if c < 0:
            raise LatticeError("gain + lambda must be >= 0 for the uniform fixed point")
        amp = math.sqrt(c / (2.0 * self.loss_k2))
        return amp * (1.0 - 1.0j)


@dataclass(frozen=True)
class LatticeGeom:
    """Cubic lattice extents and per-axis boundary conditions."""

    dims: Tuple[int, int, int]
    bc: Tuple[str, str, str] = (BC_OPEN, BC_PERIODIC, BC_PERIODIC)
    _tables: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if len(self.dims) != 3 or any(int(d) != d or d < 1 for d in self.dims):
            raise LatticeError("dims must be three positive integers")
        for b in self.bc:
            if b not in (BC_OPEN, BC_PERIODIC):
                raise LatticeError(f"unknown boundary condition {b!r}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "bc", tuple(self.bc))

    @property
    def n_sites(self) -> int:
        lx, ly, lz = self.dims
        return lx * ly * lz

    def index(self, x: int, y: int, z: int) -> int:
        lx, ly, lz = self.dims
        if not (0 <= x < lx and 0 <= y < ly and 0 <= z < lz):
            raise LatticeError(f"coordinates {(x, y, z)} outside lattice {self.dims}")
        return x + lx * (y + ly * z)

    def coords(self, i: int) -> Tuple[int, int, int]:
        lx, ly, lz = self.dims
        if not (0 <= i < self.n_sites):
            raise LatticeError(f"site index {i} outside [0, {self.n_sites})")
        x = i % lx
        y = (i // lx) % ly
        z = i // (lx * ly)
        return x, y, z

    def _build_tables(self):
        """Neighbor index tables, -1 marking a missing open-boundary neighbor."""
        lx, ly, lz = self.dims
        n = self.n_sites
        left = np.empty((3, n), dtype=np.int64)
        right = np.empty((3, n), dtype=np.int64)
        xs = np.arange(n) % lx
        ys = (np.arange(n) // lx) % ly
        zs = np.arange(n) // (lx * ly)
        coords = (xs, ys, zs)
        for ax, L in enumerate(self.dims):
            c = coords[ax]
            minus = c - 1
            plus = c + 1
            if self.bc[ax] == BC_PERIODIC and L > 1:
                minus = minus % L
                plus = plus % L
                missing_m = np.zeros(n, dtype=bool)
                missing_p = np.zeros(n, dtype=bool)
            else:
                missing_m = minus < 0
                missing_p = plus >= L
                minus = np.clip(minus, 0, L - 1)
                plus = np.clip(plus, 0, L - 1)
            stride = {0: 1, 1: lx, 2: lx * ly}[ax]
            base = np.arange(n) - c * stride
            left[ax] = np.where(missing_m, -1, base + minus * stride)
            right[ax] = np.where(missing_p, -1, base + plus * stride)
            if L == 1:
                # a single layer has no bonds along this axis, even periodic
                left[ax] = -1
                right[ax] = -1
        self._tables["left"] = left
        self._tables["right"] = right

    @property
    def neighbor_left(self) -> np.ndarray:
        if "left" not in self._tables:
            self._build_tables()
        return self._tables["left"]

    @property
    def neighbor_right(self) -> np.ndarray:
        if "right" not in self._tables:
            self._build_tables()
        return self._tables["right"]

    def bonds(self, axis: int) -> np.ndarray:
        """All (r, r+e_axis) pairs present under this axis's boundary condition.

        Ordered by the site index of r; shape (n_bonds, 2).
        """
        if axis not in (0, 1, 2):
            raise LatticeError(f"axis must be 0, 1 or 2, got {axis}")
        right = self.neighbor_right[axis]
        src = np.nonzero(right >= 0)[0]
        return np.stack([src, right[src]], axis=1)

    def bond_count(self, axis: int) -> int:
        return self.bonds(axis).shape[0]


def enumerate_bonds(geom: LatticeGeom, axis: int) -> np.ndarray:
    """Bond list for one axis; see :meth:`LatticeGeom.bonds`."""
    return geom.bonds(axis)


def ensure_field(field_values: np.ndarray, geom: LatticeGeom) -> np.ndarray:
    """Validate and coerce a per-site complex field to a flat complex128 array."""
    arr = np.asarray(field_values, dtype=np.complex128)
    if arr.shape != (geom.n_sites,):
        raise LatticeError(
            f"field shape {arr.shape} does not match lattice with {geom.n_sites} sites")
    return arr


def require_finite(field_values: np.ndarray, what: str = "field"):
    if not np.all(np.isfinite(field_values.view(np.float64))):
        raise FloatingPointError(f"{what} contains non-finite entries")


def apply_laplacian(field_values: np.ndarray, geom: LatticeGeom,
                    k_diff: Tuple[float, float, float]) -> np.ndarray:
    """Bond-summed diffusive stencil sum_bonds K_axis*(a_other - a_r).

    At an open edge this degenerates to the one-sided difference; a uniform
    field is annihilated under any boundary conditions.
    """
    f = ensure_field(field_values, geom)
    out = np.zeros_like(f)
    left = geom.neighbor_left
    right = geom.neighbor_right
    for ax in range(3):
        k = k_diff[ax]
        if k == 0.0:
            continue
        for nb in (left[ax], right[ax]):
            has = nb >= 0
            out[has] += k * (f[nb[has]] - f[has])
    return out


def apply_nonrecip_hop(field_values: np.ndarray, geom: LatticeGeom,
                       j_hop: float) -> np.ndarray:
    """Nonreciprocal x-hopping J*(a_{r-ex} - a_{r+ex}); absent neighbors give 0."""
    f = ensure_field(field_values, geom)
    out = np.zeros_like(f)
    if j_hop == 0.0:
        return out
    left = geom.neighbor_left[0]
    right = geom.neighbor_right[0]
    has_l = left >= 0
    has_r = right >= 0
    out[has_l] += j_hop * f[left[has_l]]
    out[has_r] -= j_hop * f[right[has_r]]
    return out
