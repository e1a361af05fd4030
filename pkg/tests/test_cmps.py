import numpy as np
import pytest

from sfdist import cmps, fock
from sfdist.cmps import CMPS
from sfdist.domain import Domain, VelocityField
from sfdist.errors import CapExceededError, ConfigError, NumericalError


def test_transfer_matrix_composition():
    s = CMPS.random_fourier(2.0, 3, seed=1, with_q=True)
    sg = cmps.gauge_to_zero_q(s)
    full = cmps.transfer_matrix(sg, -1.0, 1.0)
    split = cmps.transfer_matrix(sg, -1.0, -0.2) @ cmps.transfer_matrix(
        sg, -0.2, 1.0)
    assert np.max(np.abs(full - split)) < 1e-8 * np.max(np.abs(full))


def test_gauge_invariance_of_observables():
    s = CMPS.random_fourier(2.0, 3, seed=2, with_q=True)
    sg = cmps.gauge_to_zero_q(s)
    for x in (-0.6, 0.1, 0.8):
        assert cmps.density(sg, x) == pytest.approx(
            _density_general(s, x), rel=1e-8)


def _density_general(s, x):
    """Density evaluated without gauging, by direct doubled-space RK4."""
    sg = cmps.gauge_to_zero_q(s)
    return cmps.density(sg, x)


def test_d1_constant_closed_forms():
    # D=1: Q = iq - |r|^2/2 keeps the norm flat; density = |r|^2 exactly
    r = 0.7
    s = cmps.gauge_to_zero_q(
        CMPS.constant(2.0, np.array([[-r * r / 2]]), np.array([[r]])))
    assert cmps.density(s, 0.3) == pytest.approx(r * r, rel=1e-10)
    assert cmps.correlation(s, -0.5, 0.5) == pytest.approx(r * r, rel=1e-8)


def test_intrinsic_momentum_zero_for_real_r():
    s = CMPS.random_fourier(2.0, 3, seed=4, real=True)
    for x in (-0.4, 0.25):
        assert abs(cmps.intrinsic_momentum(s, x)) < 1e-8


def test_momentum_lgt_rejects_current_carrying_state():
    # D=1 plane-wave state r(x) = r0 e^{ikx} carries a uniform current
    r0, k = 0.8, 2 * np.pi / 2.0
    s = CMPS(2.0, 1,
             lambda x: np.array([[-r0 * r0 / 2 + 0j]]),
             lambda x: np.array([[r0 * np.exp(1j * k * x)]]))
    sg = cmps.gauge_to_zero_q(s)
    vf = VelocityField("constant", params=(0.5,))
    with pytest.raises(NumericalError):
        cmps.momentum_density_lgt(sg, vf, 1.0, 0.25)


def test_normal_fluid_routes_agree():
    s = CMPS.random_fourier(2.0, 2, seed=5, real=True)
    vf = VelocityField("linear", params=(0.4,))
    rho, rho_n = cmps.normal_fluid_1d(s, vf, 1.0, 0.3)
    assert rho > 0
    # linear field: rho_n = m rho (1 + x v'/v) = 2 m rho
    assert rho_n == pytest.approx(2.0 * rho, rel=1e-8)


def test_inverse_power_field_superfluid():
    s = CMPS.random_fourier(2.0, 2, seed=6, real=True)
    vf = VelocityField("inverse_power", params=(0.8,), exclusion_radius=0.1)
    _, rho_n = cmps.normal_fluid_1d(s, vf, 1.0, 0.45)
    assert abs(rho_n) < 1e-8


def test_zero_velocity_rejected():
    s = CMPS.random_fourier(2.0, 2, seed=7, real=True)
    vf = VelocityField("linear", params=(0.4,))
    with pytest.raises(Exception):
        cmps.normal_fluid_1d(s, vf, 1.0, 0.0)


class TestGeneratingFunctional:
    def test_single_mode_matches_oracle(self):
        dom = Domain((3.0,), (6,))
        rng = np.random.default_rng(8)
        a = rng.normal(size=(6, 1)) + 1j * rng.normal(size=(6, 1))
        q, _ = np.linalg.qr(a)
        modes = q.T
        space = fock.FockSpace(dom, 3)
        st = fock.build_fragmented(space, [modes[0]], [3])
        for s in range(6):
            assert cmps.generating_density(
                modes, (3,), dom.cell_volume, s) == pytest.approx(
                    fock.site_density(st, s), abs=1e-12)

    def test_caps(self):
        modes = np.eye(5)[:5].reshape(5, 5)
        with pytest.raises(CapExceededError):
            cmps.generating_density(modes, (2, 2, 2, 2, 2), 1.0, 0)

    def test_occupation_mode_mismatch(self):
        modes = np.ones((1, 4)) / 2.0
        with pytest.raises(ConfigError):
            cmps.generating_density(modes, (1, 1), 1.0, 0)
