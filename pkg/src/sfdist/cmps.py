"""Continuum matrix product states on a circle.

A cMPS is defined by matrix functions Q(x), R(x) of size D x D on
[x0, x0 + L] (default symmetric about 0), with a boundary matrix closing
the trace.  Path ordering puts increasing x on the right:
dU/dx = U * A(x), so expectation values read Tr[B * T(x0, x0+L)] with the
doubled-space kernel K = Q (x) I + I (x) conj(Q) + R (x) conj(R).

In the Q = 0 gauge the kernel reduces to R (x) conj(R) and densities are
split traces with an R (x) conj(R) insertion at the evaluation point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import VelocityField, eval_gradient_term
from .errors import CapExceededError, ConfigError, NumericalError, ZeroVelocityError


@dataclass(eq=False)
class CMPS:
    length: float
    bond_dim: int
    q_fn: callable          # x -> (D, D) complex
    r_fn: callable
    boundary: np.ndarray = None
    gauge: str = "general"
    origin: float = None    # left end of the collocation interval
    _norm_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.length <= 0 or self.bond_dim < 1:
            raise ConfigError("need positive length and bond dimension")
        if self.gauge not in ("general", "q_zero"):
            raise ConfigError(f"unknown gauge {self.gauge!r}")
        if self.boundary is None:
            self.boundary = np.eye(self.bond_dim, dtype=complex)
        self.boundary = np.asarray(self.boundary, dtype=complex)
        if self.boundary.shape != (self.bond_dim, self.bond_dim):
            raise ConfigError("boundary matrix has wrong shape")
        if self.origin is None:
            self.origin = -self.length / 2.0

    @property
    def x_left(self) -> float:
        return self.origin

    @property
    def x_right(self) -> float:
        return self.origin + self.length

    def q(self, x: float) -> np.ndarray:
        if self.gauge == "q_zero":
            return np.zeros((self.bond_dim, self.bond_dim), dtype=complex)
        return np.asarray(self.q_fn(x), dtype=complex)

    def r(self, x: float) -> np.ndarray:
        return np.asarray(self.r_fn(x), dtype=complex)

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, length: float, q: np.ndarray, r: np.ndarray,
                 boundary: np.ndarray = None, origin: float = None) -> "CMPS":
        q = np.atleast_2d(np.asarray(q, dtype=complex))
        r = np.atleast_2d(np.asarray(r, dtype=complex))
        d = r.shape[0]
        gauge = "q_zero" if not np.any(q) else "general"
        return cls(length, d, (lambda x, q=q: q), (lambda x, r=r: r),
                   boundary, gauge, origin)

    @classmethod
    def random_fourier(cls, length: float, bond_dim: int, seed: int,
                       n_modes: int = 2, scale: float = 0.5,
                       real: bool = False, with_q: bool = False,
                       origin: float = None) -> "CMPS":
        """Smooth random periodic (Q, R) built from a few Fourier modes."""
        rng = np.random.default_rng(seed)
        d = bond_dim

        def rand_mat():
            m = rng.normal(size=(d, d))
            if not real:
                m = m + 1j * rng.normal(size=(d, d))
            return scale * m / math.sqrt(d)

        def make_fn():
            c0 = rand_mat()
            cos_c = [rand_mat() for _ in range(n_modes)]
            sin_c = [rand_mat() for _ in range(n_modes)]

            def fn(x, c0=c0, cos_c=cos_c, sin_c=sin_c):
                out = c0.astype(complex).copy()
                for n in range(n_modes):
                    ph = 2.0 * math.pi * (n + 1) * x / length
                    out += cos_c[n] * math.cos(ph) + sin_c[n] * math.sin(ph)
                return out

            return fn

        r_fn = make_fn()
        if with_q:
            q_fn = make_fn()
            return cls(length, d, q_fn, r_fn, None, "general", origin)
        zero = np.zeros((d, d), dtype=complex)
        return cls(length, d, (lambda x: zero), r_fn, None, "q_zero", origin)


# ---------------------------------------------------------------------------
# adaptive RK4 with step doubling

def _rk4_step(f, x: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(x, y)
    k2 = f(x + h / 2, y + h / 2 * k1)
    k3 = f(x + h / 2, y + h / 2 * k2)
    k4 = f(x + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _integrate(f, x0: float, x1: float, y0: np.ndarray, tol: float) -> np.ndarray:
    """RK4 with step-doubling local error control; local extrapolation applied."""
    span = x1 - x0
    if span == 0.0:
        return y0.copy()
    if span < 0:
        raise ConfigError("integration interval reversed")
    y = y0.astype(complex).copy()
    x = x0
    h = span / 16.0
    h_min = span * 1e-12
    while True:
        remaining = x1 - x
        if remaining <= span * 1e-14:
            break
        h = min(h, remaining)
        y_full = _rk4_step(f, x, y, h)
        y_half = _rk4_step(f, x, y, h / 2)
        y_half = _rk4_step(f, x + h / 2, y_half, h / 2)
        scale = max(1.0, float(np.max(np.abs(y))))
        err = float(np.max(np.abs(y_full - y_half))) / scale
        # per-step tolerance; the 5th-order extrapolated update keeps the
        # accumulated error well below nsteps * tol
        loc_tol = tol
        if err <= loc_tol:
            x += h
            y = y_half + (y_half - y_full) / 15.0
            if err < loc_tol / 32 and x < x1:
                h *= 2.0
        else:
            h /= 2.0
            if h < h_min:
                raise NumericalError("step underflow in transfer-matrix integration")
    return y


def _doubled_kernel(s: CMPS):
    d = s.bond_dim
    eye = np.eye(d, dtype=complex)

    def k_of(x):
        r = s.r(x)
        k = np.kron(r, r.conj())
        if s.gauge != "q_zero":
            q = s.q(x)
            k = k + np.kron(q, eye) + np.kron(eye, q.conj())
        return k

    return k_of


def transfer_matrix(s: CMPS, y: float, x: float, tol: float = 1e-10) -> np.ndarray:
    """T(y, x) solving dT/dz = T K(z), T(y, y) = I, for y <= x."""
    if s.gauge != "q_zero":
        raise ConfigError("transfer_matrix requires the Q = 0 gauge")
    k_of = _doubled_kernel(s)
    d2 = s.bond_dim**2
    f = lambda z, t: t @ k_of(z)
    return _integrate(f, y, x, np.eye(d2, dtype=complex), tol)


# ---------------------------------------------------------------------------
# gauge transformation

class _GaugeSolution:
    """G(x) solving G' = -Q G, G(x_left) = I, via checkpointed RK4."""

    def __init__(self, s: CMPS, n_checkpoints: int = 256, tol: float = 1e-12,
                 cond_cap: float = 1e8):
        self.tol = tol
        f = lambda z, g: -np.asarray(s.q_fn(z), dtype=complex) @ g
        self.f = f
        self.xs = np.linspace(s.x_left, s.x_right, n_checkpoints + 1)
        gs = [np.eye(s.bond_dim, dtype=complex)]
        for a, b in zip(self.xs[:-1], self.xs[1:]):
            gs.append(_integrate(f, a, b, gs[-1], tol))
        self.gs = gs
        worst = max(np.linalg.cond(g) for g in gs)
        if worst > cond_cap:
            raise NumericalError(
                f"gauge transform ill-conditioned (cond {worst:.2e})")

    def __call__(self, x: float) -> np.ndarray:
        idx = int(np.searchsorted(self.xs, x, side="right") - 1)
        idx = max(0, min(idx, len(self.xs) - 2))
        return _integrate(self.f, self.xs[idx], x, self.gs[idx], self.tol)


def gauge_to_zero_q(s: CMPS, n_checkpoints: int = 256,
                    tol: float = 1e-12) -> CMPS:
    """Similarity-transform Q away, leaving every closed-trace expectation fixed.

    With ordering dU/dx = U A, the matrix G solving G' = -Q G, G(x_left) = I,
    gives gauged matrices R~(x) = G(x)^-1 R(x) G(x) and boundary
    B~ = G(x_right)^-1 B.
    """
    if s.gauge == "q_zero":
        return s
    g = _GaugeSolution(s, n_checkpoints, tol)

    def r_fn(x, s=s, g=g):
        gx = g(x)
        return np.linalg.solve(gx, np.asarray(s.r_fn(x), dtype=complex) @ gx)

    g_end = g(s.x_right)
    boundary = np.linalg.solve(g_end, s.boundary)
    zero = np.zeros((s.bond_dim, s.bond_dim), dtype=complex)
    return CMPS(s.length, s.bond_dim, (lambda x: zero), r_fn, boundary,
                "q_zero", s.origin)


# ---------------------------------------------------------------------------
# expectation values

def _split_expectation(s: CMPS, insertions: list[tuple[float, np.ndarray]],
                       tol: float) -> complex:
    """Tr[B2 T(x0,x1) O1 T(x1,x2) O2 ... T(.., x0+L)] for ordered insertions."""
    b2 = np.kron(s.boundary, s.boundary.conj())
    acc = b2
    prev = s.x_left
    for x, op in insertions:
        if x < prev - 1e-12:
            raise ConfigError("insertions must be ordered left to right")
        acc = acc @ transfer_matrix(s, prev, x, tol) @ op
        prev = x
    acc = acc @ transfer_matrix(s, prev, s.x_right, tol)
    return complex(np.trace(acc))


def norm_trace(s: CMPS, tol: float = 1e-10) -> complex:
    if tol not in s._norm_cache:
        s._norm_cache[tol] = _split_expectation(s, [], tol)
    return s._norm_cache[tol]


def density(s: CMPS, x: float, tol: float = 1e-10) -> float:
    """<psi+ psi(x)>, norm-normalized."""
    if s.gauge != "q_zero":
        raise ConfigError("density requires the Q = 0 gauge")
    r = s.r(x)
    op = np.kron(r, r.conj())
    num = _split_expectation(s, [(x, op)], tol)
    den = norm_trace(s, tol)
    if abs(den) < 1e-300:
        raise NumericalError("zero state norm")
    val = num / den
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise NumericalError(f"density has imaginary part {val.imag}")
    return float(val.real)


def correlation(s: CMPS, x: float, y: float, tol: float = 1e-10) -> complex:
    """rho1(x, y) = <psi+(x) psi(y)> for x < y (ordered insertions)."""
    if s.gauge != "q_zero":
        raise ConfigError("correlation requires the Q = 0 gauge")
    if not x < y:
        raise ConfigError("correlation requires x < y; use conjugation otherwise")
    d = s.bond_dim
    eye = np.eye(d, dtype=complex)
    op_dag = np.kron(eye, s.r(x).conj())   # creation insertion at x
    op = np.kron(s.r(y), eye)              # annihilation insertion at y
    num = _split_expectation(s, [(x, op_dag), (y, op)], tol)
    den = norm_trace(s, tol)
    return num / den


def intrinsic_momentum(s: CMPS, x: float, h: float = 1e-4,
                       tol: float = 1e-10) -> float:
    """First-moment current from rho1 off-diagonal derivatives, O(h^2)."""
    d_plus = correlation(s, x, x + h, tol)
    d_minus = correlation(s, x - h, x, tol).conjugate()  # = rho1(x, x - h)
    deriv = (d_plus - d_minus) / (2.0 * h)
    return float(-deriv.imag)


def momentum_density_lgt(s: CMPS, vf: VelocityField, mass: float, x: float,
                         tol: float = 1e-10, intrinsic_tol: float = 1e-6,
                         check_intrinsic: bool = True) -> float:
    """<g(x)> of the locally boosted state: m (x v' + v) rho(x) via the
    doubled-space insertion A(x) = m (x v' + v) R (x) conj(R)."""
    if check_intrinsic:
        g0 = intrinsic_momentum(s, x, tol=tol)
        if abs(g0) > intrinsic_tol:
            raise NumericalError(
                f"state carries intrinsic momentum {g0:.3e} at x={x}; "
                "the boosted-momentum formula assumes a current-free state")
    factor = mass * eval_gradient_term(vf, 0, 0, np.array([x]))
    r = s.r(x)
    op = factor * np.kron(r, r.conj())
    num = _split_expectation(s, [(x, op)], tol)
    den = norm_trace(s, tol)
    val = num / den
    return float(val.real)


def normal_fluid_1d(s: CMPS, vf: VelocityField, mass: float, x: float,
                    tol: float = 1e-10,
                    check_intrinsic: bool = True) -> tuple[float, float]:
    """(rho(x), rho_n(x)) from the 1-d closed form m rho + (m x / v) v' rho.

    Also recomputed as boosted momentum / v; both routes must agree to 1e-8.
    """
    xv = np.array([x])
    v = float(vf.eval(xv)[0])
    if v == 0.0:
        raise ZeroVelocityError(f"velocity vanishes at x={x}")
    rho = density(s, x, tol)
    dv = float(vf.jacobian(xv)[0, 0])
    rho_n = mass * rho + (mass * x / v) * dv * rho
    via_g = momentum_density_lgt(s, vf, mass, x, tol,
                                 check_intrinsic=check_intrinsic) / v
    if abs(via_g - rho_n) > 1e-8 * max(1.0, abs(rho_n)):
        raise NumericalError(
            f"momentum-ratio route disagrees with the closed form: "
            f"{via_g} vs {rho_n}")
    return rho, rho_n


# ---------------------------------------------------------------------------
# generating functional for fragmented condensates (bond dimension 1)

def _matrices_with_margins(rows: tuple[int, ...], cols: tuple[int, ...]):
    """Nonnegative integer matrices with the given row and column sums."""
    n_rows = len(rows)

    def fill(r: int, remaining_cols: tuple[int, ...], acc: list):
        if r == n_rows:
            if all(c == 0 for c in remaining_cols):
                yield tuple(acc)
            return
        for row in _compositions(rows[r], remaining_cols):
            new_cols = tuple(c - v for c, v in zip(remaining_cols, row))
            acc.append(row)
            yield from fill(r + 1, new_cols, acc)
            acc.pop()

    yield from fill(0, cols, [])


def _compositions(total: int, caps: tuple[int, ...]):
    """Tuples summing to total with per-entry caps."""
    if len(caps) == 1:
        if total <= caps[0]:
            yield (total,)
        return
    for first in range(min(total, caps[0]) + 1):
        for rest in _compositions(total - first, caps[1:]):
            yield (first,) + rest


def _pairing_sum(gram: np.ndarray, rows: tuple[int, ...],
                 cols: tuple[int, ...]) -> complex:
    """<0| prod a_j^rows_j  prod (a+_k)^cols_k |0> with [a_j, a+_k] = G_jk."""
    if sum(rows) != sum(cols):
        return 0.0
    total = 0.0 + 0.0j
    for mat in _matrices_with_margins(rows, cols):
        term = 1.0 + 0.0j
        for j, row in enumerate(mat):
            for k, a in enumerate(row):
                if a:
                    term *= gram[j, k] ** a / math.factorial(a)
        total += term
    pref = 1.0
    for n in rows:
        pref *= math.factorial(n)
    for n in cols:
        pref *= math.factorial(n)
    return total * pref


def generating_density(modes: np.ndarray, occupations, cell_volume: float,
                       site: int) -> float:
    """Exact density <psi+ psi(x_site)> of prod_j (a+_j)^{n_j}|0>.

    modes: (n_modes, n_sites) complex site amplitudes (need not be
    orthonormal); the Gram matrix comes from the same grid sum the Fock
    oracle uses, so the two routes agree to rounding.  Capped at 8
    particles over 4 modes: the pairing sum grows combinatorially.
    """
    modes = np.asarray(modes, dtype=complex)
    occ = tuple(int(n) for n in occupations)
    if modes.ndim != 2 or modes.shape[0] != len(occ):
        raise ConfigError("need one occupation per mode")
    if len(occ) > 4:
        raise CapExceededError("generating functional caps at 4 modes")
    if sum(occ) > 8:
        raise CapExceededError("generating functional caps at 8 particles")
    if any(n < 0 for n in occ):
        raise ConfigError("occupations must be nonnegative")
    gram = modes.conj() @ modes.T
    norm = _pairing_sum(gram, occ, occ)
    if abs(norm) < 1e-300:
        raise NumericalError("state has zero norm")
    total = 0.0 + 0.0j
    for p, n_p in enumerate(occ):
        if n_p == 0:
            continue
        for q, n_q in enumerate(occ):
            if n_q == 0:
                continue
            rows = tuple(n - (1 if idx == p else 0) for idx, n in enumerate(occ))
            cols = tuple(n - (1 if idx == q else 0) for idx, n in enumerate(occ))
            z = _pairing_sum(gram, rows, cols)
            total += n_p * n_q * np.conj(modes[p, site]) * modes[q, site] * z
    val = total / norm
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise NumericalError("density came out complex")
    return float(val.real) / cell_volume
