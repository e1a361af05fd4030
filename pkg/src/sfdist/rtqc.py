"""Localized resource theory of coherence for superfluid distillation.

The reference basis lives on a site subset Omega with a fixed particle
count.  Two basis conventions are supported: "tuple" labels the N_Omega
particles by ordered position tuples (dimension M_Omega^N_Omega), which
reproduces the maximal coherence N_Omega * log2(M_Omega) of the strongly
superfluid state; "occupation" uses the symmetrized bosonic basis, where
repeated positions collide and the same state carries strictly less
coherence for two or more particles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import ConfigError
from .fock import StateVector, fock_dimension, _occupations


@dataclass(frozen=True)
class RegionBasis:
    region: tuple[int, ...]        # flat site indices, sorted
    n_region: int
    mode: str                      # "tuple" | "occupation"

    def __post_init__(self):
        if len(self.region) == 0:
            raise ConfigError("region must be nonempty")
        if len(set(self.region)) != len(self.region):
            raise ConfigError("region sites must be distinct")
        if tuple(sorted(self.region)) != self.region:
            object.__setattr__(self, "region", tuple(sorted(self.region)))
        if self.n_region < 0:
            raise ConfigError("negative particle count")
        if self.mode not in ("tuple", "occupation"):
            raise ConfigError(f"unknown basis mode {self.mode!r}")

    @property
    def n_sites(self) -> int:
        return len(self.region)

    @property
    def dim(self) -> int:
        if self.mode == "tuple":
            return self.n_sites**self.n_region
        return fock_dimension(self.n_sites, self.n_region)


@dataclass
class MarginalState:
    basis: RegionBasis
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.basis.dim, self.basis.dim):
            raise ConfigError("marginal matrix has wrong dimension")
        if np.max(np.abs(m - m.conj().T)) > 1e-12:
            raise ConfigError("marginal state is not Hermitian")
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > 1e-12:
            raise ConfigError(f"marginal state has trace {tr}")
        self.matrix = m


@dataclass(frozen=True)
class CoherenceReport:
    c_bits: float
    entropy_state: float
    entropy_decohered: float
    rate_bound: int
    mode: str


def _region_occupations(n_sites: int, n: int) -> list[tuple[int, ...]]:
    return [tuple(o) for o in _occupations(n_sites, n)]


def _tuple_isometry(n_sites: int, n: int,
                    occ_list: list[tuple[int, ...]]) -> np.ndarray:
    """V mapping the symmetric occupation basis into ordered position tuples.

    Each occupation n spreads with equal weight sqrt(prod n_s! / n!) over
    its n!/prod n_s! consistent tuples, so V is an isometry.
    """
    occ_index = {o: k for k, o in enumerate(occ_list)}
    dim_t = n_sites**n
    v = np.zeros((dim_t, len(occ_list)))
    fact_n = math.factorial(n)
    for t_idx, tup in enumerate(product(range(n_sites), repeat=n)):
        occ = [0] * n_sites
        for s in tup:
            occ[s] += 1
        k = occ_index[tuple(occ)]
        w = 1.0
        for c in occ:
            w *= math.factorial(c)
        v[t_idx, k] = math.sqrt(w / fact_n)
    return v


def marginal_state(state: StateVector, region, n_region: int,
                   mode: str = "tuple") -> MarginalState:
    """Project onto exactly n_region particles in the region, trace out the rest.

    The complement occupations label the environment; grouping amplitudes
    by them gives the reduced matrix directly.
    """
    basis = RegionBasis(tuple(sorted(int(s) for s in region)), n_region, mode)
    space = state.space
    region_arr = np.asarray(basis.region)
    comp_arr = np.asarray(
        [s for s in range(space.domain.nsites) if s not in set(basis.region)])

    occ = space.occupations
    inside = occ[:, region_arr]
    sector = inside.sum(axis=1) == n_region

    occ_list = _region_occupations(basis.n_sites, n_region)
    occ_index = {o: k for k, o in enumerate(occ_list)}

    out_keys = {}
    rows = []
    for b in np.nonzero(sector)[0]:
        key = tuple(occ[b, comp_arr].tolist()) if comp_arr.size else ()
        col = out_keys.setdefault(key, len(out_keys))
        rows.append((occ_index[tuple(inside[b].tolist())], col,
                     state.amplitudes[b]))
    if not rows:
        raise ConfigError(
            f"state has zero probability of {n_region} particles in the region")
    a = np.zeros((len(occ_list), len(out_keys)), dtype=complex)
    for r, c, amp in rows:
        a[r, c] += amp
    prob = float(np.sum(np.abs(a) ** 2))
    if prob < 1e-14:
        raise ConfigError(
            f"state has zero probability of {n_region} particles in the region")
    sigma = a @ a.conj().T / prob
    if mode == "tuple":
        v = _tuple_isometry(basis.n_sites, n_region, occ_list)
        sigma = v @ sigma @ v.T
    return MarginalState(basis, sigma)


def decohere(sigma: MarginalState) -> MarginalState:
    return MarginalState(sigma.basis, np.diag(np.diag(sigma.matrix)))


def _entropy_bits(matrix: np.ndarray) -> float:
    evals = np.linalg.eigvalsh(matrix)
    evals = evals[evals > 1e-14]
    return float(-np.sum(evals * np.log2(evals)))


def coherence(sigma: MarginalState) -> CoherenceReport:
    """Relative entropy of coherence S(Delta(sigma)) - S(sigma), in bits."""
    s_state = _entropy_bits(sigma.matrix)
    s_deco = _entropy_bits(decohere(sigma).matrix)
    c = s_deco - s_state
    if c < -1e-10:
        raise ConfigError(f"coherence came out negative: {c}")
    c = max(c, 0.0)
    b = sigma.basis
    if b.n_sites >= 2 and b.n_region >= 1:
        rate = int(math.floor(c / (b.n_region * math.log2(b.n_sites)) + 1e-12))
    else:
        rate = 0
    return CoherenceReport(c, s_state, s_deco, rate, b.mode)


def distillation_rate(state: StateVector, region, n_region: int,
                      mode: str = "tuple") -> int:
    """floor(C / (N_Omega log2 M_Omega)): copies of the maximally coherent
    region state distillable per copy, by the coherence distillation bound."""
    basis = RegionBasis(tuple(sorted(int(s) for s in region)), n_region, mode)
    if basis.n_sites < 2:
        raise ConfigError("distillation rate undefined for a single-site region")
    if n_region < 1:
        raise ConfigError("need at least one particle in the region")
    return coherence(marginal_state(state, region, n_region, mode)).rate_bound
