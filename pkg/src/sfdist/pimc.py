"""Worldline Monte Carlo for N bosons on a periodic box.

Paths are stored in covering-space (unwrapped) coordinates.  The closing
link of path l runs from its last bead to bead 0 of path perm[l], shifted
by an integer image offset off[l]*L per axis.  The permutation plus the
offsets carry all winding content: the telescoped displacement of path l
is beads[perm[l],0] + off[l]*L - beads[l,0].

Moves: staging (Brownian-bridge) reconstruction of bead windows that may
cross the permutation closure, cyclic permutation swaps with image-summed
kernel acceptance followed by Gibbs resampling of the affected offsets,
and a winding ramp that tilts a whole permutation cycle by one image.
All use the primitive (Trotter) action.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .domain import Domain, NormalFluidField, VelocityField, eval_gradient_term
from .errors import CapExceededError, ConfigError, InsufficientSamplesError

_IMAGE_RANGE = 3  # images summed in periodic link kernels; kernel width << L assumed


@dataclass(frozen=True)
class PIMCParams:
    n_particles: int
    domain: Domain
    mass: float
    beta: float
    n_slices: int
    potential: str = "none"  # none | gaussian_repulsive | delta_regularized
    g: float = 0.0
    w: float = 0.5
    staging_length: int = 8
    cycle_length: int = 2
    sweeps: int = 10_000
    thermalization: int = 1_000
    seed: int = 0
    n_bins: int = 16

    def __post_init__(self):
        if self.domain.boundary != "periodic":
            raise ConfigError("worldline sampling requires a periodic domain")
        if self.n_particles < 1:
            raise ConfigError("need at least one particle")
        if self.n_slices < 8:
            raise ConfigError("need at least 8 time slices")
        if not 2 <= self.staging_length < self.n_slices:
            raise ConfigError("staging_length must be in [2, n_slices)")
        if self.cycle_length < 2:
            raise ConfigError("cycle_length must be at least 2")
        if self.potential not in ("none", "gaussian_repulsive", "delta_regularized"):
            raise ConfigError(f"unknown potential {self.potential!r}")
        if self.potential != "none" and self.w <= 0:
            raise ConfigError("potential width must be positive")
        if self.mass <= 0 or self.beta <= 0:
            raise ConfigError("mass and beta must be positive")

    @property
    def tau(self) -> float:
        return self.beta / self.n_slices

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.domain.lengths, dtype=float)


class WorldlineConfig:
    """Mutable sampler state: beads (N,P,d), closing permutation, image offsets."""

    def __init__(self, beads: np.ndarray, perm: np.ndarray, offsets: np.ndarray):
        self.beads = beads
        self.perm = perm
        self.offsets = offsets

    def copy(self) -> "WorldlineConfig":
        return WorldlineConfig(self.beads.copy(), self.perm.copy(), self.offsets.copy())

    def check_valid(self) -> None:
        n = self.beads.shape[0]
        if sorted(self.perm.tolist()) != list(range(n)):
            raise ConfigError("closing permutation is not a bijection")


def init_worldlines(params: PIMCParams, seed: int | None = None) -> WorldlineConfig:
    rng = np.random.default_rng(params.seed if seed is None else seed)
    n, p, d = params.n_particles, params.n_slices, params.domain.dim
    start = rng.uniform(0.0, 1.0, size=(n, 1, d)) * params.lengths
    beads = np.broadcast_to(start, (n, p, d)).copy()
    return WorldlineConfig(beads, np.arange(n), np.zeros((n, d), dtype=np.int64))


def path_displacements(config: WorldlineConfig, params: PIMCParams) -> np.ndarray:
    """Per-path start-minus-end displacement x^(l) - x^(perm(l)), shape (N, d)."""
    L = params.lengths
    ends = config.beads[config.perm, 0, :] + config.offsets * L
    return config.beads[:, 0, :] - ends


def link_displacements(config: WorldlineConfig, params: PIMCParams) -> np.ndarray:
    """Forward displacement of every kinetic link, shape (N, P, d)."""
    L = params.lengths
    nxt = np.empty_like(config.beads)
    nxt[:, :-1, :] = config.beads[:, 1:, :]
    nxt[:, -1, :] = config.beads[config.perm, 0, :] + config.offsets * L
    return nxt - config.beads


def kinetic_action(config: WorldlineConfig, params: PIMCParams) -> float:
    delta = link_displacements(config, params)
    return float(params.mass / (2.0 * params.tau) * np.sum(delta**2))


def _pair_potential(params: PIMCParams, r2: np.ndarray) -> np.ndarray:
    if params.potential == "gaussian_repulsive":
        return params.g * np.exp(-r2 / (2.0 * params.w**2))
    # regularized delta: unit-integral Gaussian of width w
    d = params.domain.dim
    norm = (2.0 * math.pi * params.w**2) ** (d / 2.0)
    return params.g / norm * np.exp(-r2 / (2.0 * params.w**2))


def _min_image(delta: np.ndarray, L: np.ndarray) -> np.ndarray:
    return delta - L * np.round(delta / L)


def slice_potential(params: PIMCParams, positions: np.ndarray) -> float:
    """Total pair potential of one time slice; positions shape (N, d)."""
    if params.potential == "none" or positions.shape[0] < 2:
        return 0.0
    L = params.lengths
    delta = positions[:, None, :] - positions[None, :, :]
    delta = _min_image(delta, L)
    r2 = np.sum(delta**2, axis=-1)
    iu = np.triu_indices(positions.shape[0], k=1)
    return float(np.sum(_pair_potential(params, r2[iu])))


def potential_action(config: WorldlineConfig, params: PIMCParams) -> float:
    if params.potential == "none":
        return 0.0
    total = 0.0
    for t in range(params.n_slices):
        total += slice_potential(params, config.beads[:, t, :])
    return params.tau * total


def total_action(config: WorldlineConfig, params: PIMCParams) -> float:
    return kinetic_action(config, params) + potential_action(config, params)


# ---------------------------------------------------------------------------
# worldline chain walking (time order across the permutation closure)

def _chain_nodes(config: WorldlineConfig, params: PIMCParams, start: tuple[int, int],
                 n_links: int):
    """Walk n_links forward from (particle, slice) start.

    Returns the node list [(particle, slice)] of length n_links+1 and the
    cumulative covering-space shift (in units of length) at each node.
    """
    L = params.lengths
    p, t = start
    nodes = [(p, t)]
    shifts = [np.zeros(params.domain.dim)]
    shift = np.zeros(params.domain.dim)
    for _ in range(n_links):
        if t < params.n_slices - 1:
            t += 1
        else:
            shift = shift + config.offsets[p] * L
            p = config.perm[p]
            t = 0
        nodes.append((p, t))
        shifts.append(shift.copy())
    return nodes, shifts


def _slice_potential_without(params: PIMCParams, positions: np.ndarray,
                             skip: int) -> float:
    """Pair potential of one slice against a tagged particle only."""
    if params.potential == "none" or positions.shape[0] < 2:
        return 0.0
    delta = np.delete(positions, skip, axis=0) - positions[skip]
    delta = _min_image(delta, params.lengths)
    r2 = np.sum(delta**2, axis=-1)
    return float(np.sum(_pair_potential(params, r2)))


def staging_move(config: WorldlineConfig, params: PIMCParams,
                 rng: np.random.Generator) -> bool:
    """Brownian-bridge regeneration of one bead window; exact for V=0."""
    n, p_slices = params.n_particles, params.n_slices
    seg = params.staging_length
    ell = int(rng.integers(n))
    t0 = int(rng.integers(p_slices))
    nodes, shifts = _chain_nodes(config, params, (ell, t0), seg)
    interior = nodes[1:-1]
    if len(set(interior)) != len(interior):
        return False  # window wrapped onto itself (tiny P); skip
    z0 = config.beads[nodes[0]] + shifts[0]
    z_end = config.beads[nodes[-1]] + shifts[-1]

    old_u = 0.0
    if params.potential != "none":
        for (p, t) in interior:
            old_u += _slice_potential_without(params, config.beads[:, t, :], p)

    # staging recursion: exact free-particle bridge between z0 and z_end
    var0 = params.tau / params.mass
    prev = z0
    new_pts = []
    for k in range(1, seg):
        rem = seg - k
        mean = (prev * rem + z_end) / (rem + 1)
        std = math.sqrt(var0 * rem / (rem + 1))
        prev = mean + std * rng.standard_normal(params.domain.dim)
        new_pts.append(prev)

    if params.potential == "none":
        for (node, shift, z) in zip(interior, shifts[1:-1], new_pts):
            config.beads[node] = z - shift
        return True

    saved = [config.beads[node].copy() for node in interior]
    for (node, shift, z) in zip(interior, shifts[1:-1], new_pts):
        config.beads[node] = z - shift
    new_u = 0.0
    for (p, t) in interior:
        new_u += _slice_potential_without(params, config.beads[:, t, :], p)
    if rng.random() < math.exp(-params.tau * (new_u - old_u)):
        return True
    for (node, z) in zip(interior, saved):
        config.beads[node] = z
    return False


# ---------------------------------------------------------------------------
# permutation and winding moves

def _image_weights(params: PIMCParams, delta: np.ndarray) -> np.ndarray:
    """Per-axis unnormalized weights of image shifts w in [-R, R] for one link.

    delta is the bare closing displacement; weight[axis, w] multiplies the
    shift w*L on that axis.  Factorizes over axes for a Gaussian kernel.
    """
    L = params.lengths
    ws = np.arange(-_IMAGE_RANGE, _IMAGE_RANGE + 1)
    shifted = delta[:, None] + ws[None, :] * L[:, None]
    return np.exp(-params.mass / (2.0 * params.tau) * shifted**2)


def _closing_kernel(params: PIMCParams, a: np.ndarray, b: np.ndarray) -> float:
    """Image-summed free kernel of a closing link from bead a to bead b."""
    w = _image_weights(params, b - a)
    return float(np.prod(w.sum(axis=1)))


def _sample_offsets(params: PIMCParams, a: np.ndarray, b: np.ndarray,
                    rng: np.random.Generator) -> np.ndarray:
    """Gibbs draw of the integer image offset of a closing link a -> b."""
    w = _image_weights(params, b - a)
    out = np.empty(params.domain.dim, dtype=np.int64)
    for ax in range(params.domain.dim):
        probs = w[ax] / w[ax].sum()
        out[ax] = rng.choice(len(probs), p=probs) - _IMAGE_RANGE
    return out


def permutation_move(config: WorldlineConfig, params: PIMCParams,
                     rng: np.random.Generator) -> bool:
    """Cyclic swap of closing targets among k particles.

    Bead positions are untouched, so only the k closing-link kernels enter
    the acceptance; offsets of accepted links are Gibbs-resampled from the
    image distribution.
    """
    n = params.n_particles
    if n < 2:
        return False
    k = min(params.cycle_length, n)
    chosen = rng.choice(n, size=k, replace=False)
    direction = 1 if k == 2 else (1 if rng.random() < 0.5 else -1)
    new_targets = {ell: config.perm[chosen[(r + direction) % k]]
                   for r, ell in enumerate(chosen)}
    log_ratio = 0.0
    for ell in chosen:
        a = config.beads[ell, -1, :]
        b_old = config.beads[config.perm[ell], 0, :]
        b_new = config.beads[new_targets[ell], 0, :]
        log_ratio += math.log(_closing_kernel(params, a, b_new))
        log_ratio -= math.log(_closing_kernel(params, a, b_old))
    if log_ratio < 0 and rng.random() >= math.exp(log_ratio):
        return False
    for ell in chosen:
        config.perm[ell] = new_targets[ell]
        config.offsets[ell] = _sample_offsets(
            params, config.beads[ell, -1, :],
            config.beads[new_targets[ell], 0, :], rng)
    return True


def _cycle_of(config: WorldlineConfig, ell: int) -> list[int]:
    cyc = [ell]
    p = int(config.perm[ell])
    while p != ell:
        cyc.append(p)
        p = int(config.perm[p])
    return cyc


def ramp_action_change(config: WorldlineConfig, params: PIMCParams,
                       ell: int, axis: int, w: int) -> float:
    """Action change of the winding ramp on the cycle containing ell.

    Exposed so detailed balance can be checked against an independent
    total_action difference.
    """
    cyc = _cycle_of(config, ell)
    n_links = len(cyc) * params.n_slices
    u = w * params.lengths[axis] / n_links
    delta = link_displacements(config, params)
    s = float(np.sum(delta[cyc, :, axis]))
    d_kin = params.mass / (2.0 * params.tau) * (2.0 * u * s + n_links * u * u)
    d_pot = 0.0
    if params.potential != "none":
        new_beads = config.beads.copy()
        for r, p in enumerate(cyc):
            g = r * params.n_slices + np.arange(params.n_slices)
            new_beads[p, :, axis] += u * g
        for t in range(params.n_slices):
            d_pot += slice_potential(params, new_beads[:, t, :])
            d_pot -= slice_potential(params, config.beads[:, t, :])
        d_pot *= params.tau
    return d_kin + d_pot


def ramp_move(config: WorldlineConfig, params: PIMCParams,
              rng: np.random.Generator, axis: int | None = None,
              particle: int | None = None, winding: int | None = None) -> bool:
    """Tilt one permutation cycle by a uniform drift, changing its winding by +-1.

    Every bead at global time g along the cycle shifts by u*g with
    u = w*L/(c*P); each of the c*P links then picks up +u, and the final
    offset absorbs the extra image.
    """
    ax = int(rng.integers(params.domain.dim)) if axis is None else axis
    w = (1 if rng.random() < 0.5 else -1) if winding is None else winding
    ell = int(rng.integers(params.n_particles)) if particle is None else particle
    cyc = _cycle_of(config, ell)
    c = len(cyc)
    n_links = c * params.n_slices
    u = w * params.lengths[ax] / n_links

    delta = link_displacements(config, params)
    s = float(np.sum(delta[cyc, :, ax]))
    d_kin = params.mass / (2.0 * params.tau) * (2.0 * u * s + n_links * u * u)

    d_pot = 0.0
    new_beads = None
    if params.potential != "none":
        new_beads = config.beads.copy()
        for r, p in enumerate(cyc):
            g = r * params.n_slices + np.arange(params.n_slices)
            new_beads[p, :, ax] += u * g
        for t in range(params.n_slices):
            d_pot += slice_potential(params, new_beads[:, t, :])
            d_pot -= slice_potential(params, config.beads[:, t, :])
        d_pot *= params.tau

    if rng.random() >= math.exp(-min(700.0, d_kin + d_pot)):
        return False
    if new_beads is not None:
        config.beads = new_beads
    else:
        for r, p in enumerate(cyc):
            g = r * params.n_slices + np.arange(params.n_slices)
            config.beads[p, :, ax] += u * g
    config.offsets[cyc[-1], ax] += w
    return True


def recenter(config: WorldlineConfig, params: PIMCParams) -> None:
    """Shift whole paths by integer images so bead 0 stays in the box.

    Compensating offset updates keep every link displacement, and hence the
    action and all winding observables, exactly unchanged.
    """
    L = params.lengths
    inv = np.empty_like(config.perm)
    inv[config.perm] = np.arange(params.n_particles)
    for ell in range(params.n_particles):
        k = np.floor(config.beads[ell, 0, :] / L).astype(np.int64)
        if np.any(k != 0):
            config.beads[ell] -= k * L
            config.offsets[inv[ell]] += k
            config.offsets[ell] -= k


def mc_sweep(config: WorldlineConfig, params: PIMCParams,
             rng: np.random.Generator,
             enable_permutations: bool = True) -> dict:
    """One sweep: N staging windows, one permutation swap, one winding ramp."""
    stats = {"staging": [0, 0], "permutation": [0, 0], "ramp": [0, 0]}
    _do_sweep(config, params, rng, enable_permutations, stats)
    return {k: (v[0] / v[1] if v[1] else 0.0) for k, v in stats.items()}


def _do_sweep(config: WorldlineConfig, params: PIMCParams,
              rng: np.random.Generator, enable_permutations: bool,
              stats: dict) -> None:
    for _ in range(params.n_particles):
        acc = staging_move(config, params, rng)
        stats["staging"][0] += acc
        stats["staging"][1] += 1
    if enable_permutations and params.n_particles >= 2:
        acc = permutation_move(config, params, rng)
        stats["permutation"][0] += acc
        stats["permutation"][1] += 1
    acc = ramp_move(config, params, rng)
    stats["ramp"][0] += acc
    stats["ramp"][1] += 1
    recenter(config, params)


# ---------------------------------------------------------------------------
# estimator

@dataclass
class EstimatorAccumulator:
    """Per-bin and global sums for the winding estimator of rho_n[i, j].

    term 2 stores sum over samples and slice-0 particles of disp_i * W_j,
    binned by wrapped particle position; its total over bins equals the
    global sum of D_i * W_j by construction, which is the constant-field
    winding formula.
    """

    params: PIMCParams
    i: int
    j: int
    block_size: int = 500
    n_samples: int = 0
    counts: np.ndarray = None
    term2: np.ndarray = None
    d_sq: float = 0.0          # sum of D_j^2 (total displacement, axis j)
    dw_cross: float = 0.0      # sum of D_i * W_j
    _blk_n: int = 0
    _blk_counts: np.ndarray = None
    _blk_term2: np.ndarray = None
    _blk_dsq: float = 0.0
    block_counts: list = field(default_factory=list)
    block_term2: list = field(default_factory=list)
    block_dsq: list = field(default_factory=list)

    def __post_init__(self):
        shape = (self.params.n_bins,) * self.params.domain.dim
        self.counts = np.zeros(shape)
        self.term2 = np.zeros(shape)
        self._blk_counts = np.zeros(shape)
        self._blk_term2 = np.zeros(shape)

    @property
    def bin_edges(self) -> list[np.ndarray]:
        return [np.linspace(0.0, L, self.params.n_bins + 1)
                for L in self.params.domain.lengths]

    @property
    def bin_centers(self) -> list[np.ndarray]:
        return [0.5 * (e[:-1] + e[1:]) for e in self.bin_edges]

    @property
    def bin_volume(self) -> float:
        return float(np.prod(self.params.lengths)) / self.params.n_bins ** self.params.domain.dim

    def _bin_index(self, pos: np.ndarray) -> tuple:
        L = self.params.lengths
        idx = np.floor(pos % L / L * self.params.n_bins).astype(int)
        idx = np.clip(idx, 0, self.params.n_bins - 1)
        return tuple(idx)

    def record(self, config: WorldlineConfig, vf: VelocityField) -> None:
        disp = path_displacements(config, self.params)
        w_j = winding_vector(config, vf, self.params, self.j)
        pos0 = config.beads[:, 0, :]
        for ell in range(self.params.n_particles):
            b = self._bin_index(pos0[ell])
            self.counts[b] += 1.0
            self._blk_counts[b] += 1.0
            val = disp[ell, self.i] * w_j
            self.term2[b] += val
            self._blk_term2[b] += val
        d_tot = disp.sum(axis=0)
        self.d_sq += d_tot[self.j] ** 2
        self._blk_dsq += d_tot[self.j] ** 2
        self.dw_cross += d_tot[self.i] * w_j
        self.n_samples += 1
        self._blk_n += 1
        if self._blk_n == self.block_size:
            self._flush_block()

    def _flush_block(self) -> None:
        if self._blk_n == 0:
            return
        self.block_counts.append(self._blk_counts / self._blk_n)
        self.block_term2.append(self._blk_term2 / self._blk_n)
        self.block_dsq.append(self._blk_dsq / self._blk_n)
        self._blk_counts = np.zeros_like(self._blk_counts)
        self._blk_term2 = np.zeros_like(self._blk_term2)
        self._blk_dsq = 0.0
        self._blk_n = 0

    def merge(self, other: "EstimatorAccumulator") -> "EstimatorAccumulator":
        if (self.i, self.j, self.params.n_bins) != (other.i, other.j, other.params.n_bins):
            raise ConfigError("cannot merge accumulators with different binning")
        out = EstimatorAccumulator(self.params, self.i, self.j, self.block_size)
        out.n_samples = self.n_samples + other.n_samples
        out.counts = self.counts + other.counts
        out.term2 = self.term2 + other.term2
        out.d_sq = self.d_sq + other.d_sq
        out.dw_cross = self.dw_cross + other.dw_cross
        out.block_counts = self.block_counts + other.block_counts
        out.block_term2 = self.block_term2 + other.block_term2
        out.block_dsq = self.block_dsq + other.block_dsq
        return out

    def finalize(self, vf: VelocityField) -> NormalFluidField:
        """Bin-resolved rho and rho_n[i, j] with block-averaged error bars."""
        if self.n_samples == 0:
            raise InsufficientSamplesError("no samples accumulated")
        p = self.params
        centers = self.bin_centers
        mesh = np.meshgrid(*centers, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        nb = self.counts.size

        egt = np.empty(nb)
        v_j = np.empty(nb)
        for b, x in enumerate(pts):
            egt[b] = eval_gradient_term(vf, self.i, self.j, x)
            v_j[b] = vf.eval(x)[self.j]
        if np.any(v_j == 0.0):
            raise ConfigError("velocity component vanishes at a bin center")

        dens = self.counts.ravel() / (self.n_samples * self.bin_volume)
        rho = p.mass * dens
        t1 = p.mass * egt / v_j * dens
        t2 = -(p.mass**2 / (p.beta * v_j)) * self.term2.ravel() / (
            self.n_samples * self.bin_volume)
        rho_n = t1 + t2

        stderr = np.full(nb, np.nan)
        if len(self.block_term2) >= 2:
            bc = np.stack([b.ravel() for b in self.block_counts])
            bt = np.stack([b.ravel() for b in self.block_term2])
            per_block = (p.mass * egt / v_j * bc
                         - (p.mass**2 / (p.beta * v_j)) * bt) / self.bin_volume
            stderr = per_block.std(axis=0, ddof=1) / math.sqrt(per_block.shape[0])

        dom_out = Domain(p.domain.lengths, (p.n_bins,) * p.domain.dim, "periodic")
        d = p.domain.dim
        tensor = np.full((nb, d, d), np.nan)
        tensor[:, self.i, self.j] = rho_n
        err = np.full((nb, d, d), np.nan)
        err[:, self.i, self.j] = stderr
        return NormalFluidField(dom_out, rho, tensor, "pimc-winding", stderr=err)


def winding_vector(config: WorldlineConfig, vf: VelocityField,
                   params: PIMCParams, j: int) -> float:
    """W_j = sum_l grad(v_j x_j)|_{x^(l)} . (x^(l) - x^(perm(l))).

    Gradient factors use wrapped slice-0 positions; displacements are the
    covering-space endpoint differences.
    """
    disp = path_displacements(config, params)
    L = params.lengths
    total = 0.0
    for ell in range(params.n_particles):
        x = config.beads[ell, 0, :] % L
        for i in range(params.domain.dim):
            total += eval_gradient_term(vf, i, j, x) * disp[ell, i]
    return total


def accumulate_local_normal(config: WorldlineConfig, vf: VelocityField,
                            mass: float, beta: float,
                            acc: EstimatorAccumulator, i: int, j: int) -> None:
    """Bin one configuration into the two-term local estimator.

    Explicit-argument wrapper around EstimatorAccumulator.record; the
    (mass, beta, i, j) arguments must match the accumulator's own.
    """
    p = acc.params
    if (mass, beta, i, j) != (p.mass, p.beta, acc.i, acc.j):
        raise ConfigError("estimator arguments disagree with the accumulator")
    acc.record(config, vf)


def superfluid_fraction_constant_v(acc: EstimatorAccumulator) -> tuple[float, float]:
    """rho_s/rho = m <D_j^2> / (beta N) from the accumulated global sums."""
    if acc.n_samples == 0:
        raise InsufficientSamplesError("no samples accumulated")
    p = acc.params
    mean = acc.d_sq / acc.n_samples
    value = p.mass * mean / (p.beta * p.n_particles)
    if len(acc.block_dsq) < 2:
        raise InsufficientSamplesError("need at least 2 blocks for an error bar")
    blocks = np.asarray(acc.block_dsq) * p.mass / (p.beta * p.n_particles)
    stderr = float(blocks.std(ddof=1) / math.sqrt(len(blocks)))
    return value, stderr


# ---------------------------------------------------------------------------
# exact small-N oracle

def _partitions(n: int, max_part: int | None = None):
    """Integer partitions of n as nonincreasing tuples."""
    if max_part is None:
        max_part = n
    if n == 0:
        yield ()
        return
    for first in range(min(n, max_part), 0, -1):
        for rest in _partitions(n - first, first):
            yield (first,) + rest


def _ring_theta(m: float, L: float, ctau: float, tol: float = 1e-14):
    """theta0 = sum_w e^{-m w^2 L^2/(2 ctau)} and the matching w^2 moment."""
    t0, t2 = 1.0, 0.0
    w = 1
    while True:
        term = math.exp(-m * (w * L) ** 2 / (2.0 * ctau))
        t0 += 2.0 * term
        t2 += 2.0 * w * w * term
        if term < tol and w > 2:
            break
        w += 1
    return t0, t2


def ideal_gas_oracle(n_particles: int, L: float, beta: float, m: float) -> float:
    """Exact rho_s/rho of the ideal 1-d Bose ring, by cycle-type summation.

    A permutation cycle of length c contributes weight
    z_c = L sqrt(m/(2 pi c beta)) theta0(c); cycle windings are independent,
    so <D^2> = E[sum over cycles of L^2 theta2(c)/theta0(c)].
    """
    if n_particles > 6:
        raise CapExceededError("oracle caps at 6 particles")
    z = {}
    mom = {}
    for c in range(1, n_particles + 1):
        t0, t2 = _ring_theta(m, L, c * beta)
        z[c] = L * math.sqrt(m / (2.0 * math.pi * c * beta)) * t0
        mom[c] = L * L * t2 / t0
    total_weight = 0.0
    total_d2 = 0.0
    for part in _partitions(n_particles):
        counts = {}
        for c in part:
            counts[c] = counts.get(c, 0) + 1
        # permutations of this cycle type / N!
        weight = 1.0
        for c, mc in counts.items():
            weight *= z[c] ** mc / (c**mc * math.factorial(mc))
        d2 = sum(mc * mom[c] for c, mc in counts.items())
        total_weight += weight
        total_d2 += weight * d2
    mean_d2 = total_d2 / total_weight
    return m * mean_d2 / (beta * n_particles)


# ---------------------------------------------------------------------------
# chain driver

def run_chain(params: PIMCParams, vf: VelocityField, i: int, j: int,
              chain_id: int = 0, measure_every: int = 1,
              enable_permutations: bool = True,
              block_size: int = 500) -> tuple[EstimatorAccumulator, dict]:
    rng = np.random.default_rng([params.seed, chain_id])
    config = WorldlineConfig(
        np.broadcast_to(
            rng.uniform(0.0, 1.0, size=(params.n_particles, 1, params.domain.dim))
            * params.lengths,
            (params.n_particles, params.n_slices, params.domain.dim)).copy(),
        np.arange(params.n_particles),
        np.zeros((params.n_particles, params.domain.dim), dtype=np.int64))
    stats = {"staging": [0, 0], "permutation": [0, 0], "ramp": [0, 0]}
    for _ in range(params.thermalization):
        _do_sweep(config, params, rng, enable_permutations, stats)
    acc = EstimatorAccumulator(params, i, j, block_size=block_size)
    for sweep in range(params.sweeps):
        _do_sweep(config, params, rng, enable_permutations, stats)
        if sweep % measure_every == 0:
            acc.record(config, vf)
    acc._flush_block()
    config.check_valid()
    rates = {k: (v[0] / v[1] if v[1] else 0.0) for k, v in stats.items()}
    return acc, rates


def _chain_worker(args):
    params, vf, i, j, chain_id, measure_every, enable_perm, block = args
    return run_chain(params, vf, i, j, chain_id, measure_every, enable_perm, block)


def run_chains(params: PIMCParams, vf: VelocityField, i: int, j: int,
               n_chains: int = 1, measure_every: int = 1,
               enable_permutations: bool = True, block_size: int = 500,
               max_workers: int | None = None):
    """Independent chains with RNG streams derived from (seed, chain id).

    Accumulators are merged left to right (fixed tree) so the result is
    bit-stable for a given chain count.
    """
    if n_chains == 1:
        acc, rates = run_chain(params, vf, i, j, 0, measure_every,
                               enable_permutations, block_size)
        return acc, [rates]
    from concurrent.futures import ProcessPoolExecutor

    jobs = [(params, vf, i, j, cid, measure_every, enable_permutations,
             block_size) for cid in range(n_chains)]
    with ProcessPoolExecutor(max_workers=max_workers or n_chains) as pool:
        results = list(pool.map(_chain_worker, jobs))
    acc = results[0][0]
    for other, _ in results[1:]:
        acc = acc.merge(other)
    return acc, [r for _, r in results]
