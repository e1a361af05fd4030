"""Normal-fluid response of a noninteracting quasiparticle gas.

A gas of bosonic quasiparticles with dispersion eps(k) in a periodic box,
boosted by a constant velocity, carries momentum density (1/V) sum_k k n_B(k)
with shifted occupations n_B = 1/(exp(beta(eps - k.v)) - 1).  The v -> 0
derivative gives the Landau-style normal tensor

    rho_n[i,j] = (1/V) sum_k k_i k_j (-dn_B/deps)(eps(k)).

Everything here is a plain grid sum over the quantized momenta of the box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError


def _momentum_grid(dim: int, lengths: tuple[float, ...], kmax: float) -> np.ndarray:
    """All nonzero lattice momenta k = 2*pi*n/L with |k| <= kmax, shape (nk, dim)."""
    axes = []
    for L in lengths:
        dk = 2.0 * math.pi / L
        nmax = int(math.floor(kmax / dk))
        axes.append(dk * np.arange(-nmax, nmax + 1))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    norms = np.linalg.norm(pts, axis=1)
    keep = (norms > 1e-15) & (norms <= kmax + 1e-12)
    return pts[keep]


@dataclass(frozen=True)
class QuasiparticleSpectrum:
    """Dispersion eps(k) on the momentum grid of a periodic box.

    dispersion: one of "free" (k^2/2m, params = {"mass": m}),
    "phonon" (c|k|, params = {"c": c}), or "tabulated"
    (params = {"k": 1-d array of |k| knots, "eps": values}, linear interp).
    """

    dim: int
    lengths: tuple[float, ...]
    kmax: float
    dispersion: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.lengths) != self.dim:
            raise ConfigError("lengths must have one entry per axis")
        if any(L <= 0 for L in self.lengths):
            raise ConfigError("box lengths must be positive")
        if self.kmax <= 0:
            raise ConfigError("kmax must be positive")
        if self.dispersion not in ("free", "phonon", "tabulated"):
            raise ConfigError(f"unknown dispersion family {self.dispersion!r}")
        grid = _momentum_grid(self.dim, self.lengths, self.kmax)
        if grid.size == 0:
            raise ConfigError("kmax below the smallest nonzero lattice momentum")
        eps = self._energies(grid)
        if not np.all(np.isfinite(eps)):
            raise ConfigError("dispersion not finite on the momentum grid")
        if np.any(eps < -1e-12):
            raise ConfigError("dispersion must be nonnegative")
        object.__setattr__(self, "_grid", grid)
        object.__setattr__(self, "_eps", np.maximum(eps, 0.0))

    def _energies(self, k: np.ndarray) -> np.ndarray:
        kabs = np.linalg.norm(k, axis=1)
        if self.dispersion == "free":
            m = float(self.params.get("mass", 1.0))
            if m <= 0:
                raise ConfigError("free dispersion needs mass > 0")
            return kabs**2 / (2.0 * m)
        if self.dispersion == "phonon":
            c = float(self.params.get("c", 1.0))
            if c <= 0:
                raise ConfigError("phonon dispersion needs c > 0")
            return c * kabs
        knots = np.asarray(self.params["k"], dtype=float)
        vals = np.asarray(self.params["eps"], dtype=float)
        if knots.ndim != 1 or knots.shape != vals.shape or knots.size < 2:
            raise ConfigError("tabulated dispersion needs matching 1-d k/eps arrays")
        if np.any(np.diff(knots) <= 0):
            raise ConfigError("tabulated k knots must be strictly increasing")
        if kabs.max() > knots[-1] + 1e-12 or kabs.min() < knots[0] - 1e-12:
            raise ConfigError("momentum grid extends beyond tabulated dispersion")
        return np.interp(kabs, knots, vals)

    @property
    def momenta(self) -> np.ndarray:
        return self._grid

    @property
    def energies(self) -> np.ndarray:
        return self._eps

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))


def critical_velocity(spec: QuasiparticleSpectrum) -> float:
    """min_k eps(k)/|k| over the nonzero momentum grid."""
    kabs = np.linalg.norm(spec.momenta, axis=1)
    return float(np.min(spec.energies / kabs))


@dataclass(frozen=True)
class BoostedGibbs:
    """Gibbs state of the quasiparticle gas seen from a frame moving at v."""

    spectrum: QuasiparticleSpectrum
    beta: float
    velocity: tuple[float, ...]

    def __post_init__(self):
        if self.beta <= 0:
            raise ConfigError("beta must be positive")
        v = np.asarray(self.velocity, dtype=float)
        if v.shape != (self.spectrum.dim,):
            raise ConfigError("velocity dimension mismatch")
        shifted = self.spectrum.energies - self.spectrum.momenta @ v
        if np.any(shifted <= 0):
            raise NumericalError(
                "boost exceeds the critical velocity: eps(k) - k.v <= 0 on the grid"
            )
        object.__setattr__(self, "_shifted", shifted)

    def occupations(self) -> np.ndarray:
        return 1.0 / np.expm1(self.beta * self._shifted)


def momentum_density_gibbs(g: BoostedGibbs) -> np.ndarray:
    """(1/V) sum_k k n_B(eps(k) - k.v), one component per axis."""
    n = g.occupations()
    return (g.spectrum.momenta * n[:, None]).sum(axis=0) / g.spectrum.volume


def landau_normal_tensor(
    spec: QuasiparticleSpectrum, beta: float, i: int, j: int
) -> float:
    """v -> 0 slope of the boosted momentum density, taken termwise.

    -dn_B/deps = beta e^{beta eps}/(e^{beta eps}-1)^2; diverges for gapless
    modes only at eps = 0, which the grid excludes by construction.
    """
    if beta <= 0:
        raise ConfigError("beta must be positive")
    be = beta * spec.energies
    if np.any(be < 1e-14):
        raise NumericalError("zero-energy mode on the grid: Landau sum diverges")
    # -dn/deps = beta e^{-be}/(1-e^{-be})^2, written to avoid overflow at large be
    weight = beta * np.exp(-be) / np.square(-np.expm1(-be))
    k = spec.momenta
    return float(np.sum(k[:, i] * k[:, j] * weight) / spec.volume)


def phonon_normal_density_1d(c: float, temperature: float) -> float:
    """Continuum 1-d phonon result pi T^2 / (3 c^3), the L -> inf limit."""
    return math.pi * temperature**2 / (3.0 * c**3)
