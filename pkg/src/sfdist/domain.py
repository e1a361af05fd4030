"""Spatial domains, velocity fields, and the geometric factors they induce.

Every estimator in the toolkit consumes the same uniform rectangular grid
and the same velocity-field abstraction defined here.  Natural units
(hbar = k_B = 1) are assumed throughout; masses and lengths are
dimensionless.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, SingularFieldError

FIELD_FAMILIES = ("constant", "rotation", "linear", "inverse_power", "tabulated")


@dataclass(frozen=True)
class Domain:
    """Uniform rectangular grid in 1 or 2 dimensions.

    Periodic grids place sites at x_i = s_i * a_i with a_i = L_i / M_i;
    open grids use a_i = L_i / (M_i - 1) so the grid covers [0, L_i].
    """

    lengths: tuple[float, ...]
    sites: tuple[int, ...]
    boundary: str = "periodic"

    def __post_init__(self):
        if len(self.lengths) != len(self.sites):
            raise ConfigError("lengths and sites must have equal rank")
        if len(self.lengths) not in (1, 2):
            raise ConfigError("only 1-d and 2-d domains are supported")
        if self.boundary not in ("periodic", "open"):
            raise ConfigError(f"unknown boundary type {self.boundary!r}")
        if any(L <= 0 for L in self.lengths):
            raise ConfigError("domain lengths must be positive")
        if any(M < 2 for M in self.sites):
            raise ConfigError("need at least 2 sites per axis")

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def spacing(self) -> tuple[float, ...]:
        if self.boundary == "periodic":
            return tuple(L / M for L, M in zip(self.lengths, self.sites))
        return tuple(L / (M - 1) for L, M in zip(self.lengths, self.sites))

    @property
    def nsites(self) -> int:
        return int(np.prod(self.sites))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def site_multi(self, flat: int) -> tuple[int, ...]:
        return tuple(int(c) for c in np.unravel_index(flat, self.sites))

    def site_flat(self, multi) -> int:
        return int(np.ravel_multi_index(tuple(int(m) for m in multi), self.sites))

    def position(self, flat: int) -> np.ndarray:
        multi = np.unravel_index(flat, self.sites)
        return np.array([m * a for m, a in zip(multi, self.spacing)], dtype=float)

    def positions(self) -> np.ndarray:
        """All grid positions, shape (nsites, dim), C-ordered flat index."""
        axes = [np.arange(M) * a for M, a in zip(self.sites, self.spacing)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def neighbor(self, flat: int, axis: int, step: int) -> Optional[int]:
        """Flat index of the site one step along `axis`; None past an open edge."""
        multi = list(self.site_multi(flat))
        multi[axis] += step
        M = self.sites[axis]
        if self.boundary == "periodic":
            multi[axis] %= M
        elif not 0 <= multi[axis] < M:
            return None
        return self.site_flat(multi)

    def wraps(self, flat: int, axis: int) -> bool:
        """True when the centered stencil at this site crosses the periodic seam."""
        if self.boundary != "periodic":
            return False
        m = self.site_multi(flat)[axis]
        return m == 0 or m == self.sites[axis] - 1

    def wrap_point(self, x: np.ndarray) -> np.ndarray:
        """Map a covering-space point back into the box (periodic only)."""
        L = np.asarray(self.lengths)
        return np.mod(x, L)


def _fd_jacobian_tabulated(domain: Domain, values: np.ndarray) -> np.ndarray:
    """Jacobian grid J[..., i, j] = d v_j / d x_i from tabulated values.

    4th-order centered differences in the interior; 2nd-order one-sided at
    open edges; periodic wrap otherwise.
    """
    d = domain.dim
    shp = domain.sites
    vals = values.reshape(*shp, d)
    jac = np.zeros((*shp, d, d))
    for i in range(d):
        a = domain.spacing[i]
        if domain.boundary == "periodic":
            vp1 = np.roll(vals, -1, axis=i)
            vm1 = np.roll(vals, 1, axis=i)
            vp2 = np.roll(vals, -2, axis=i)
            vm2 = np.roll(vals, 2, axis=i)
            deriv = (-vp2 + 8 * vp1 - 8 * vm1 + vm2) / (12 * a)
        else:
            deriv = np.gradient(vals, a, axis=i, edge_order=2)
            # refine the interior to 4th order
            sl = [slice(None)] * vals.ndim
            sl[i] = slice(2, -2)
            if vals.shape[i] >= 5:
                interior = (
                    -np.take(vals, range(4, shp[i]), axis=i)
                    + 8 * np.take(vals, range(3, shp[i] - 1), axis=i)
                    - 8 * np.take(vals, range(1, shp[i] - 3), axis=i)
                    + np.take(vals, range(0, shp[i] - 4), axis=i)
                ) / (12 * a)
                deriv[tuple(sl)] = interior
        jac[..., i, :] = deriv
    return jac.reshape(domain.nsites, d, d)


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Smooth velocity field with exact Jacobian access.

    Built-in families:
      constant       v_i = params[i]
      rotation       v = omega * (-x2, x1), params = (omega,), 2-d only
      linear         v_i = params[i] * x_i
      inverse_power  v_i = params[i] / x_i (zero where params[i] == 0)
      tabulated      values sampled on a Domain grid, interpolated
    """

    family: str
    params: tuple[float, ...] = ()
    direction_j: int = 0
    exclusion_radius: float = 0.0
    domain: Optional[Domain] = None
    values: Optional[np.ndarray] = None  # tabulated: (nsites, dim)
    _jac_grid: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.family not in FIELD_FAMILIES:
            raise ConfigError(f"unknown field family {self.family!r}")
        if self.family == "tabulated":
            if self.domain is None or self.values is None:
                raise ConfigError("tabulated field needs a domain and values")
            vals = np.asarray(self.values, dtype=float).reshape(
                self.domain.nsites, self.domain.dim
            )
            object.__setattr__(self, "values", vals)
            object.__setattr__(self, "_jac_grid", _fd_jacobian_tabulated(self.domain, vals))

    def scaled(self, factor: float) -> "VelocityField":
        if self.family == "tabulated":
            return VelocityField(
                family="tabulated",
                params=self.params,
                direction_j=self.direction_j,
                exclusion_radius=self.exclusion_radius,
                domain=self.domain,
                values=self.values * factor,
            )
        return replace(self, params=tuple(p * factor for p in self.params))

    # -- singularity bookkeeping ------------------------------------------
    def is_singular(self, x) -> bool:
        if self.family != "inverse_power":
            return False
        x = np.atleast_1d(np.asarray(x, dtype=float))
        for i, c in enumerate(self.params):
            if c != 0.0 and abs(x[i]) <= self.exclusion_radius:
                return True
        return False

    def _check(self, x):
        if self.is_singular(x):
            raise SingularFieldError(f"field {self.family} singular near x={x}")

    # -- evaluation ---------------------------------------------------------
    def eval(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        self._check(x)
        if self.family == "constant":
            return np.asarray(self.params, dtype=float)
        if self.family == "rotation":
            (omega,) = self.params
            return np.array([-omega * x[1], omega * x[0]])
        if self.family == "linear":
            return np.asarray(self.params, dtype=float) * x
        if self.family == "inverse_power":
            v = np.zeros_like(x)
            for i, c in enumerate(self.params):
                if c != 0.0:
                    v[i] = c / x[i]
            return v
        return self._interp_tabulated(x, self.values)

    def jacobian(self, x) -> np.ndarray:
        """J[i, j] = d v_j / d x_i evaluated at x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        self._check(x)
        d = len(x)
        if self.family == "constant":
            return np.zeros((d, d))
        if self.family == "rotation":
            (omega,) = self.params
            return np.array([[0.0, omega], [-omega, 0.0]])
        if self.family == "linear":
            return np.diag(np.asarray(self.params, dtype=float))
        if self.family == "inverse_power":
            jac = np.zeros((d, d))
            for i, c in enumerate(self.params):
                if c != 0.0:
                    jac[i, i] = -c / x[i] ** 2
            return jac
        return self._interp_tabulated(x, self._jac_grid)

    def _interp_tabulated(self, x, grid_values):
        """Multilinear interpolation of per-site data at an arbitrary point."""
        dom = self.domain
        d = dom.dim
        data = grid_values.reshape(*dom.sites, *grid_values.shape[1:])
        idx = []
        frac = []
        for i in range(d):
            a = dom.spacing[i]
            t = x[i] / a
            lo = int(np.floor(t))
            f = t - lo
            M = dom.sites[i]
            if dom.boundary == "periodic":
                idx.append((lo % M, (lo + 1) % M))
            else:
                lo = min(max(lo, 0), M - 2)
                f = t - lo
                idx.append((lo, lo + 1))
            frac.append(f)
        out = 0.0
        for corner in np.ndindex(*(2,) * d):
            w = 1.0
            sel = []
            for i, c in enumerate(corner):
                w *= frac[i] if c else (1.0 - frac[i])
                sel.append(idx[i][c])
            out = out + w * data[tuple(sel)]
        return np.asarray(out)


def eval_boost_phase(vf: VelocityField, mass: float, x) -> float:
    """Boost phase m * v(x) . x accumulated by the local Galilei unitary."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(mass * np.dot(vf.eval(x), x))


def eval_gradient_term(vf: VelocityField, i: int, j: int, x) -> float:
    """d/dx_i (v(x)_j x_j) = x_j dv_j/dx_i + delta_ij v_j (no summation)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = vf.eval(x)
    jac = vf.jacobian(x)
    out = x[j] * jac[i, j]
    if i == j:
        out += v[j]
    return float(out)


@dataclass
class NormalFluidField:
    """Per-site density and normal-fluid tensor, the universal output record.

    `tensor[s, i, j]` holds rho_n(x_s)_{i,j}; entries never computed are NaN.
    `rho` is the mass density m <psi^dag psi(x_s)>.  No positivity constraint
    is imposed on the superfluid part; violations are flagged in `warnings`.
    """

    domain: Domain
    rho: np.ndarray
    tensor: np.ndarray
    method: str = ""
    stderr: Optional[np.ndarray] = None
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.tensor = np.asarray(self.tensor, dtype=float)
        if self.rho.shape != (self.domain.nsites,):
            raise ConfigError("rho must have one entry per site")
        d = self.domain.dim
        if self.tensor.shape != (self.domain.nsites, d, d):
            raise ConfigError("tensor must be (nsites, d, d)")
        if np.any(self.rho < -1e-12):
            raise ConfigError("negative mass density")

    def superfluid_tensor(self) -> np.ndarray:
        """rho_s = rho * delta_ij - rho_n per the local two-fluid bookkeeping."""
        d = self.domain.dim
        return self.rho[:, None, None] * np.eye(d) - self.tensor

    def flag_negative_superfluid(self):
        rs = self.superfluid_tensor()
        diag = rs[:, range(self.domain.dim), range(self.domain.dim)]
        if np.any(diag[np.isfinite(diag)] < -1e-10):
            msg = "negative superfluid diagonal (no positivity constraint imposed)"
            if msg not in self.warnings:
                self.warnings.append(msg)

    def to_csv(self, path):
        """Write the standard grid CSV: x1[,x2],i,j,rho,rho_n,stderr."""
        d = self.domain.dim
        pos = self.domain.positions()
        with open(path, "w") as f:
            cols = ",".join(f"x{k+1}" for k in range(d))
            f.write(f"{cols},i,j,rho,rho_n,stderr\n")
            for s in range(self.domain.nsites):
                for i in range(d):
                    for j in range(d):
                        if not np.isfinite(self.tensor[s, i, j]):
                            continue
                        err = 0.0
                        if self.stderr is not None:
                            err = self.stderr[s, i, j]
                        xs = ",".join(f"{c:.12g}" for c in pos[s])
                        f.write(
                            f"{xs},{i},{j},{self.rho[s]:.12g},"
                            f"{self.tensor[s, i, j]:.12g},{err:.12g}\n"
                        )
