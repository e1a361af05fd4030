"""Exact brute-force reference on small discretized Fock spaces.

Lattice bosons b_s live on the grid of a Domain; the continuum field is
identified as psi(x_s) = b_s / sqrt(cell_volume), so densities and momentum
densities come out in continuum normalization.  Everything here is dense and
desk-scale by design: it is a verification instrument, not a solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .domain import Domain, NormalFluidField, VelocityField, eval_gradient_term
from .errors import (
    BoundaryStencilError,
    ConfigError,
    DimensionCapError,
    NumericalError,
    SingularFieldError,
    ZeroVelocityError,
)

DEFAULT_DIM_CAP = 2_000_000
_DENSE_MATRIX_CAP = 6000  # dense (dim x dim) operator builds only


def fock_dimension(n_sites: int, n_particles: int) -> int:
    return math.comb(n_particles + n_sites - 1, n_particles)


def _occupations(n_sites: int, n_particles: int):
    """Occupation vectors with fixed total, lexicographic from (N,0,...) down.

    For N = 1 this makes basis index s mean "one particle at site s".
    """
    occ = [0] * n_sites

    def rec(site, remaining):
        if site == n_sites - 1:
            occ[site] = remaining
            yield tuple(occ)
            occ[site] = 0
            return
        for n in range(remaining, -1, -1):
            occ[site] = n
            yield from rec(site + 1, remaining - n)
            occ[site] = 0

    yield from rec(0, n_particles)


class FockSpace:
    """N-boson sector on the sites of a Domain, lexicographic basis order."""

    def __init__(self, domain: Domain, n_particles: int, dim_cap: int = DEFAULT_DIM_CAP):
        self.domain = domain
        self.n_particles = int(n_particles)
        self.dim = fock_dimension(domain.nsites, self.n_particles)
        if self.dim > dim_cap:
            raise DimensionCapError(
                f"Fock dimension {self.dim} exceeds cap {dim_cap}"
            )
        self.occupations = np.array(
            list(_occupations(domain.nsites, self.n_particles)), dtype=np.int32
        )
        self._index = {tuple(row): k for k, row in enumerate(self.occupations.tolist())}

    def index(self, occupation) -> int:
        return self._index[tuple(int(n) for n in occupation)]

    def __repr__(self):
        return f"FockSpace(M={self.domain.nsites}, N={self.n_particles}, dim={self.dim})"


@dataclass
class StateVector:
    space: FockSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.space.dim,):
            raise ConfigError("amplitude vector has wrong length")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0:
            raise NumericalError("cannot normalize a zero vector")
        return StateVector(self.space, self.amplitudes / n)


# Mixed states are weighted pure-state ensembles.
Ensemble = Sequence[tuple[float, StateVector]]
StateLike = Union[StateVector, Ensemble]


def _as_ensemble(state: StateLike) -> Ensemble:
    if isinstance(state, StateVector):
        return [(1.0, state)]
    return state


# ---------------------------------------------------------------------------
# local Galilei transformation
# ---------------------------------------------------------------------------

def boost_phases(space: FockSpace, vf: VelocityField, mass: float,
                 direction: Optional[int] = None) -> np.ndarray:
    """Per-site phase of the LGT: m v(x_s).x_s, or m v(x_s)_j x_sj if directed."""
    pos = space.domain.positions()
    phi = np.empty(space.domain.nsites)
    for s in range(space.domain.nsites):
        v = vf.eval(pos[s])
        if direction is None:
            phi[s] = mass * float(np.dot(v, pos[s]))
        else:
            phi[s] = mass * v[direction] * pos[s][direction]
    return phi


def apply_lgt(state: StateVector, vf: VelocityField, mass: float,
              direction: Optional[int] = None) -> StateVector:
    """Diagonal unitary: amplitude of |n> gains exp(i sum_s n_s phi_s)."""
    phi = boost_phases(state.space, vf, mass, direction)
    total = state.space.occupations @ phi
    return StateVector(state.space, state.amplitudes * np.exp(1j * total))


# ---------------------------------------------------------------------------
# one-body expectations
# ---------------------------------------------------------------------------

def hop_expectation(state: StateVector, s_create: int, s_annihilate: int) -> complex:
    """<b_{s_create}^dag b_{s_annihilate}> in a pure state."""
    space = state.space
    occ = space.occupations
    amps = state.amplitudes
    if s_create == s_annihilate:
        return complex(np.vdot(amps, occ[:, s_create] * amps))
    out = 0.0 + 0.0j
    rows = np.nonzero(occ[:, s_annihilate])[0]
    for b in rows:
        n = occ[b]
        target = n.copy()
        target[s_annihilate] -= 1
        target[s_create] += 1
        t = space.index(target)
        factor = math.sqrt(n[s_annihilate] * (n[s_create] + 1))
        out += np.conj(amps[t]) * amps[b] * factor
    return complex(out)


def site_density(state: StateLike, site: int) -> float:
    """Continuum density <psi^dag psi(x_site)> = <n_site> / cell_volume."""
    ens = _as_ensemble(state)
    vcell = ens[0][1].space.domain.cell_volume
    val = 0.0
    for w, sv in ens:
        occ = sv.space.occupations[:, site]
        val += w * float(np.real(np.vdot(sv.amplitudes, occ * sv.amplitudes)))
    return val / vcell


def momentum_density(state: StateLike, site: int, axis: int) -> float:
    """<g(x_site)_axis> with the symmetric central-difference stencil.

    g(x_s)_i = Im(<b_s^dag b_{s+e_i}> - <b_s^dag b_{s-e_i}>) / (2 a_i V_cell).
    """
    ens = _as_ensemble(state)
    dom = ens[0][1].space.domain
    sp = dom.neighbor(site, axis, +1)
    sm = dom.neighbor(site, axis, -1)
    if sp is None or sm is None:
        raise BoundaryStencilError(
            f"momentum stencil undefined at open-boundary edge site {site}"
        )
    a = dom.spacing[axis]
    val = 0.0
    for w, sv in ens:
        z = hop_expectation(sv, site, sp) - hop_expectation(sv, site, sm)
        val += w * float(np.imag(z))
    return val / (2 * a * dom.cell_volume)


def total_momentum_expectation(state: StateLike, axis: int) -> float:
    """<P_axis> = sum_s V_cell <g(x_s)_axis> over sites with a full stencil."""
    ens = _as_ensemble(state)
    dom = ens[0][1].space.domain
    vcell = dom.cell_volume
    total = 0.0
    for s in range(dom.nsites):
        try:
            total += vcell * momentum_density(ens, s, axis)
        except BoundaryStencilError:
            continue
    return total


# ---------------------------------------------------------------------------
# local normal-fluid tensor (small-velocity limit by Richardson extrapolation)
# ---------------------------------------------------------------------------

RICHARDSON_EPS = (1.0, 0.5, 0.25)


def richardson3(r1: float, r2: float, r4: float) -> float:
    """Extrapolate values at eps = 1, 1/2, 1/4 to eps -> 0 (kills eps, eps^2)."""
    return r1 / 3.0 - 2.0 * r2 + (8.0 / 3.0) * r4


def local_normal_tensor(
    state: StateLike,
    vf: VelocityField,
    mass: float,
    i: int,
    j: int,
    eps: Sequence[float] = RICHARDSON_EPS,
    linearity_tol: float = 0.25,
) -> NormalFluidField:
    """rho_n(x)_{i,j} from the small-boost limit of the momentum response.

    For each scale eps the state is boosted along axis j by the scaled field
    and the ratio <g_i(x)> / (eps v_j(x)) is recorded; three scales are
    Richardson-extrapolated to eps -> 0.  Sites where v_j = 0 or the field is
    singular are left NaN.  A warning is recorded when the three ratios are
    inconsistent with linear-in-eps behavior.
    """
    if len(eps) != 3:
        raise ConfigError("exactly three extrapolation scales are required")
    ens = _as_ensemble(state)
    space = ens[0][1].space
    dom = space.domain
    d = dom.dim
    pos = dom.positions()

    rho = np.array([mass * site_density(ens, s) for s in range(dom.nsites)])
    tensor = np.full((dom.nsites, d, d), np.nan)
    warnings = []

    vj = np.full(dom.nsites, np.nan)
    usable = np.zeros(dom.nsites, dtype=bool)
    for s in range(dom.nsites):
        try:
            vj[s] = vf.eval(pos[s])[j]
        except SingularFieldError:
            continue
        if dom.boundary == "open":
            m = dom.site_multi(s)[i]
            if m == 0 or m == dom.sites[i] - 1:
                continue
        usable[s] = vj[s] != 0.0

    ratios = np.full((3, dom.nsites), np.nan)
    for k, e in enumerate(eps):
        boosted = [(w, apply_lgt(sv, vf.scaled(e), mass, direction=j)) for w, sv in ens]
        for s in np.nonzero(usable)[0]:
            g = momentum_density(boosted, s, i)
            ratios[k, s] = g / (e * vj[s])

    for s in np.nonzero(usable)[0]:
        r1, r2, r4 = ratios[:, s]
        tensor[s, i, j] = richardson3(r1, r2, r4)
        d1, d2 = r1 - r2, r2 - r4
        scale = max(abs(r1), abs(tensor[s, i, j]), 1e-30)
        if abs(d1) > 1e-10 * scale and abs(d2) > (0.5 + linearity_tol) * abs(d1):
            warnings.append(
                f"extrapolation at site {s}: ratios not linear in eps "
                f"(d1={d1:.3e}, d2={d2:.3e})"
            )

    out = NormalFluidField(dom, rho, tensor, method="fock-oracle", warnings=warnings)
    out.flag_negative_superfluid()
    return out


# ---------------------------------------------------------------------------
# momentum transformation identity (dense, smooth-state residual)
# ---------------------------------------------------------------------------

def _dense_momentum_matrix(space: FockSpace, axis: int) -> np.ndarray:
    """P_axis = (1/2i a) sum_links (b_s^dag b_{s'} - h.c.), each link once."""
    dom = space.domain
    if space.dim > _DENSE_MATRIX_CAP:
        raise DimensionCapError("dense operator build beyond desk scale")
    a = dom.spacing[axis]
    P = np.zeros((space.dim, space.dim), dtype=complex)
    seen = set()
    occ = space.occupations
    for s in range(dom.nsites):
        sp = dom.neighbor(s, axis, +1)
        if sp is None or (s, sp) in seen or (sp, s) in seen:
            continue
        seen.add((s, sp))
        rows = np.nonzero(occ[:, sp])[0]
        for b in rows:
            n = occ[b]
            target = n.copy()
            target[sp] -= 1
            target[s] += 1
            t = space.index(target)
            amp = math.sqrt(n[sp] * (n[s] + 1)) / (2j * a)
            P[t, b] += amp
            P[b, t] += np.conj(amp)
    return P


def smooth_test_states(space: FockSpace) -> list[StateVector]:
    """Smooth reference condensates used to probe the operator identity.

    Periodic grids use the k = 0 condensate; open grids use a sin^2 envelope
    vanishing quadratically at the edges (quadratic vanishing keeps the
    boundary contribution to the residual at the interior O(a^2) order).
    """
    dom = space.domain
    pos = dom.positions()
    if dom.boundary == "periodic":
        u = np.ones(dom.nsites, dtype=complex)
    else:
        env = np.ones(dom.nsites)
        for axis in range(dom.dim):
            env = env * np.sin(np.pi * pos[:, axis] / dom.lengths[axis]) ** 2
        u = env.astype(complex)
    u = u / np.linalg.norm(u)
    return [condensate_of_mode(space, u)]


def lgt_momentum_identity_residual(
    vf: VelocityField,
    mass: float,
    space: FockSpace,
    test_states: Optional[Iterable[StateVector]] = None,
) -> float:
    """Residual of U P U^dag = P - sum_s grad(m v.x) n_s on smooth states.

    The identity is exact in the continuum; on the lattice the correction is
    evaluated with the analytic gradient factor and the mismatch decays as
    O(a^2) on smooth (fixed physical momentum) states, which is what is
    measured here: max over test states and axes of ||residual |psi>||.
    """
    dom = space.domain
    pos = dom.positions()
    phi = boost_phases(space, vf, mass)
    diag_phase = np.exp(1j * (space.occupations @ phi))
    if test_states is None:
        test_states = smooth_test_states(space)
    worst = 0.0
    for axis in range(dom.dim):
        P = _dense_momentum_matrix(space, axis)
        corr_site = np.array(
            [
                mass * sum(eval_gradient_term(vf, axis, j, pos[s]) for j in range(dom.dim))
                for s in range(dom.nsites)
            ]
        )
        corr_diag = space.occupations @ corr_site
        # U P U^dag with diagonal U: elementwise phase difference
        UPU = (diag_phase[:, None] * P) * np.conj(diag_phase)[None, :]
        R = UPU - P + np.diag(corr_diag)
        for sv in test_states:
            r = float(np.linalg.norm(R @ sv.amplitudes))
            worst = max(worst, r)
    return worst


# ---------------------------------------------------------------------------
# state construction
# ---------------------------------------------------------------------------

def _raise_mode(amps: dict, mode: np.ndarray) -> dict:
    """Apply a^dag_mode = sum_s mode_s b_s^dag to a dict-represented state."""
    out: dict = {}
    for occ, amp in amps.items():
        for s, u in enumerate(mode):
            if u == 0:
                continue
            new = list(occ)
            new[s] += 1
            key = tuple(new)
            out[key] = out.get(key, 0.0 + 0.0j) + amp * u * math.sqrt(new[s])
    return out


def _dict_to_state(space: FockSpace, amps: dict) -> StateVector:
    vec = np.zeros(space.dim, dtype=complex)
    for occ, amp in amps.items():
        vec[space.index(occ)] = amp
    sv = StateVector(space, vec)
    return sv.normalized()


def condensate_of_mode(space: FockSpace, mode: np.ndarray) -> StateVector:
    """(a^dag_mode)^N |VAC> normalized, for a unit-norm lattice mode."""
    M = space.domain.nsites
    amps = {tuple([0] * M): 1.0 + 0.0j}
    for _ in range(space.n_particles):
        amps = _raise_mode(amps, mode)
    return _dict_to_state(space, amps)


def build_k0_bec(space: FockSpace) -> StateVector:
    """Zero-momentum condensate: (sum_s b_s^dag / sqrt(M))^N |VAC>."""
    M = space.domain.nsites
    N = space.n_particles
    occ = space.occupations
    logamp = 0.5 * (
        math.lgamma(N + 1)
        - np.array([sum(math.lgamma(n + 1) for n in row) for row in occ.tolist()])
    )
    amps = np.exp(logamp) / M ** (N / 2)
    return StateVector(space, amps.astype(complex)).normalized()


def build_fragmented(
    space: FockSpace, modes: Sequence[np.ndarray], occupations: Sequence[int],
    ortho_tol: float = 1e-10,
) -> StateVector:
    """Fragmented condensate: prod_k (a^dag_{mode_k})^{n_k} |VAC> normalized."""
    modes = [np.asarray(m, dtype=complex) for m in modes]
    if sum(occupations) != space.n_particles:
        raise ConfigError("occupations must sum to the particle number")
    for a in range(len(modes)):
        for b in range(len(modes)):
            ref = 1.0 if a == b else 0.0
            if abs(np.vdot(modes[a], modes[b]) - ref) > ortho_tol:
                raise ConfigError("modes are not orthonormal on the grid")
    M = space.domain.nsites
    amps = {tuple([0] * M): 1.0 + 0.0j}
    for mode, n in zip(modes, occupations):
        for _ in range(n):
            amps = _raise_mode(amps, mode)
    return _dict_to_state(space, amps)


def build_strong_sf(
    space: FockSpace, vf: VelocityField, mass: float, region: Sequence[int],
) -> StateVector:
    """Region-condensate whose LGT image is a k=0 BEC confined to the region.

    Mode amplitude exp(-i m v(x_s).x_s)/sqrt(M_region) on region sites; the
    particle number is the space's N.
    """
    region = list(region)
    if not region:
        raise ConfigError("region must be nonempty")
    dom = space.domain
    pos = dom.positions()
    mode = np.zeros(dom.nsites, dtype=complex)
    for s in region:
        v = vf.eval(pos[s])
        mode[s] = np.exp(-1j * mass * np.dot(v, pos[s]))
    mode /= np.linalg.norm(mode)
    return condensate_of_mode(space, mode)


def momentum_mode(space: FockSpace, k_index: int) -> np.ndarray:
    """Plane-wave lattice mode e^{i k x_s}/sqrt(M) on a 1-d ring, k = 2 pi n / L."""
    dom = space.domain
    if dom.dim != 1 or dom.boundary != "periodic":
        raise ConfigError("momentum modes are defined on 1-d rings")
    pos = dom.positions()[:, 0]
    k = 2 * np.pi * k_index / dom.lengths[0]
    return np.exp(1j * k * pos) / math.sqrt(dom.nsites)


def build_bogoliubov_projected(
    alphas: dict, n_particles: int, space: FockSpace
) -> StateVector:
    """Fixed-N projection of the pair state exp(-sum_{k>0} a_k a_k^dag a_-k^dag)|VAC>.

    `alphas` maps positive mode indices (k = 2 pi n / L, n > 0) to complex
    pair amplitudes.  N must be even; the N-particle sector must be nonempty.
    """
    if n_particles % 2 != 0:
        raise ConfigError("pair states only populate even particle numbers")
    if n_particles != space.n_particles:
        raise ConfigError("space particle number must match the projection")
    M = space.domain.nsites
    vac = {tuple([0] * M): 1.0 + 0.0j}
    if n_particles == 0:
        return _dict_to_state(space, vac)
    pairs = sorted(alphas.keys())
    if not pairs:
        raise ConfigError("N-particle sector of the pair state is empty")
    npairs = n_particles // 2

    total: dict = {}

    def compositions(remaining, idx):
        if idx == len(pairs) - 1:
            yield (remaining,)
            return
        for p in range(remaining + 1):
            for rest in compositions(remaining - p, idx + 1):
                yield (p,) + rest

    for comp in compositions(npairs, 0):
        amps = dict(vac)
        coeff = 1.0 + 0.0j
        for kidx, p in zip(pairs, comp):
            if p == 0:
                continue
            coeff *= (-alphas[kidx]) ** p / math.factorial(p)
            up = momentum_mode(space, kidx)
            um = momentum_mode(space, -kidx)
            for _ in range(p):
                amps = _raise_mode(amps, up)
                amps = _raise_mode(amps, um)
        for occ, amp in amps.items():
            total[occ] = total.get(occ, 0.0 + 0.0j) + coeff * amp
    if not total or all(abs(a) < 1e-300 for a in total.values()):
        raise NumericalError("N-particle sector of the pair state is empty")
    return _dict_to_state(space, total)


def is_strongly_superfluid(
    state: StateVector, vf: VelocityField, mass: float, tol: float
) -> tuple[bool, dict]:
    """First-moment criterion: the LGT image carries no momentum density.

    Checks |<g(x)_i>| <= tol at every site (interior for open boundaries) and
    axis of the transformed state.  Returns (verdict, report).
    """
    boosted = apply_lgt(state, vf, mass)
    dom = state.space.domain
    worst = 0.0
    worst_site = None
    for s in range(dom.nsites):
        for i in range(dom.dim):
            try:
                g = momentum_density(boosted, s, i)
            except BoundaryStencilError:
                continue
            if abs(g) > worst:
                worst, worst_site = abs(g), (s, i)
    report = {"max_momentum_density": worst, "site_axis": worst_site, "tol": tol}
    return worst <= tol, report


# ---------------------------------------------------------------------------
# closed-form BEC response
# ---------------------------------------------------------------------------

def bec_closed_form(
    vf: VelocityField, n_particles: int, mass: float, domain: Domain,
    i: int, j: int, x,
) -> float:
    """Closed-form normal tensor of the k=0 BEC under a smooth boost field.

    rho_n(x)_{i,j} = (N m/|Omega|) [delta_ij + x_j (dv_j/dx_i)/v_j].  When
    v_j(x) = 0 the ratio term is 0 if its numerator vanishes too, otherwise
    the point is singular.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = vf.eval(x)
    jac = vf.jacobian(x)
    base = n_particles * mass / domain.volume()
    num = x[j] * jac[i, j]
    if v[j] == 0.0:
        if num == 0.0:
            ratio = 0.0
        else:
            raise ZeroVelocityError(
                f"v_{j}(x) = 0 with nonvanishing gradient term at x={x}"
            )
    else:
        ratio = num / v[j]
    return base * ((1.0 if i == j else 0.0) + ratio)


# ---------------------------------------------------------------------------
# small thermal ensembles (dense diagonalization)
# ---------------------------------------------------------------------------

def lattice_hamiltonian(
    space: FockSpace, mass: float, interaction: float = 0.0
) -> np.ndarray:
    """Hopping kinetic energy plus optional on-site pair interaction, dense."""
    dom = space.domain
    if space.dim > _DENSE_MATRIX_CAP:
        raise DimensionCapError("dense Hamiltonian beyond desk scale")
    H = np.zeros((space.dim, space.dim), dtype=complex)
    occ = space.occupations
    # -(1/2m) discrete Laplacian
    for s in range(dom.nsites):
        for axis in range(dom.dim):
            a = dom.spacing[axis]
            t = 1.0 / (2 * mass * a * a)
            H += np.diag(t * occ[:, s].astype(float))
            sp = dom.neighbor(s, axis, +1)
            if sp is None:
                continue
            rows = np.nonzero(occ[:, sp])[0]
            for b in rows:
                n = occ[b]
                target = n.copy()
                target[sp] -= 1
                target[s] += 1
                tt = space.index(target)
                amp = -t * math.sqrt(n[sp] * (n[s] + 1))
                H[tt, b] += amp
                H[b, tt] += amp
    if interaction != 0.0:
        g = interaction / dom.cell_volume
        diag = 0.5 * g * np.sum(occ * (occ - 1), axis=1)
        H += np.diag(diag.astype(float))
    return H


def thermal_ensemble(
    space: FockSpace, mass: float, beta: float,
    interaction: float = 0.0, weight_cut: float = 1e-12,
) -> Ensemble:
    """Gibbs state at inverse temperature beta as a weighted pure-state list."""
    H = lattice_hamiltonian(space, mass, interaction)
    evals, evecs = np.linalg.eigh(H)
    w = np.exp(-beta * (evals - evals[0]))
    w /= w.sum()
    ens = []
    acc = 0.0
    for k in np.argsort(-w):
        ens.append((float(w[k]), StateVector(space, evecs[:, k])))
        acc += w[k]
        if 1.0 - acc < weight_cut:
            break
    # renormalize the truncated ensemble
    tot = sum(wk for wk, _ in ens)
    return [(wk / tot, sv) for wk, sv in ens]
