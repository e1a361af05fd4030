import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfdist import fock
from sfdist.domain import Domain, VelocityField
from sfdist.errors import ConfigError, DimensionCapError


def random_state(space, seed):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
    return fock.StateVector(space, amps / np.linalg.norm(amps))


class TestFockSpace:
    def test_dimension_formula(self):
        assert fock.fock_dimension(4, 3) == math.comb(6, 3)
        space = fock.FockSpace(Domain((4.0,), (4,)), 3)
        assert space.dim == 20

    def test_index_bijection(self):
        space = fock.FockSpace(Domain((4.0,), (4,)), 2)
        for b, occ in enumerate(space.occupations):
            assert space.index(occ) == b

    def test_dim_cap(self):
        with pytest.raises(DimensionCapError):
            fock.FockSpace(Domain((4.0,), (50,)), 10, dim_cap=1000)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), c=st.floats(-1.0, 1.0, allow_nan=False))
def test_lgt_unitarity(seed, c):
    space = fock.FockSpace(Domain((4.0,), (5,)), 2)
    st_ = random_state(space, seed)
    vf = VelocityField("linear", params=(c,))
    assert fock.apply_lgt(st_, vf, 1.0).norm() == pytest.approx(1.0, abs=1e-12)


def test_lgt_composition_exact():
    space = fock.FockSpace(Domain((4.0,), (5,)), 2)
    st_ = random_state(space, 3)
    v1 = VelocityField("constant", params=(0.3,))
    v2 = VelocityField("constant", params=(0.5,))
    v12 = VelocityField("constant", params=(0.8,))
    a = fock.apply_lgt(fock.apply_lgt(st_, v2, 1.0), v1, 1.0)
    b = fock.apply_lgt(st_, v12, 1.0)
    assert np.allclose(a.amplitudes, b.amplitudes, atol=1e-14)


def test_strong_sf_lgt_image_is_k0_bec():
    dom = Domain((4.0,), (6,))
    space = fock.FockSpace(dom, 2)
    vf = VelocityField("linear", params=(0.4,))
    sf = fock.build_strong_sf(space, vf, 1.0, range(6))
    image = fock.apply_lgt(sf, vf, 1.0)
    bec = fock.build_k0_bec(space)
    overlap = abs(np.vdot(image.amplitudes, bec.amplitudes))
    assert overlap == pytest.approx(1.0, abs=1e-12)
    for s in range(6):
        assert abs(fock.momentum_density(image, s, 0)) < 1e-12


def test_is_strongly_superfluid():
    dom = Domain((4.0,), (6,))
    space = fock.FockSpace(dom, 2)
    vf = VelocityField("constant", params=(0.7,))
    sf = fock.build_strong_sf(space, vf, 1.0, range(6))
    ok, report = fock.is_strongly_superfluid(sf, vf, 1.0, 1e-10)
    assert ok, report
    zero = VelocityField("constant", params=(0.0,))
    space1 = fock.FockSpace(dom, 1)
    plane = fock.StateVector(space1, fock.momentum_mode(space1, 1))
    ok, _ = fock.is_strongly_superfluid(plane, zero, 1.0, 1e-10)
    assert not ok
    ok, _ = fock.is_strongly_superfluid(fock.build_k0_bec(space), zero,
                                        1.0, 1e-10)
    assert ok


class TestBogoliubovProjected:
    def test_vacuum(self):
        space = fock.FockSpace(Domain((4.0,), (4,)), 0)
        st_ = fock.build_bogoliubov_projected({}, 0, space)
        assert st_.amplitudes[0] == pytest.approx(1.0)

    def test_single_pair(self):
        dom = Domain((4.0,), (4,))
        space = fock.FockSpace(dom, 2)
        st_ = fock.build_bogoliubov_projected({1: 0.3}, 2, space)
        # must equal a_{k}^dag a_{-k}^dag |vac>, normalized
        up = fock.momentum_mode(space, 1)
        um = fock.momentum_mode(space, -1)
        ref = fock._dict_to_state(
            space, fock._raise_mode(fock._raise_mode(
                {tuple([0] * 4): 1.0 + 0j}, up), um))
        assert abs(np.vdot(st_.amplitudes, ref.amplitudes)) == pytest.approx(
            1.0, abs=1e-12)

    def test_odd_n_rejected(self):
        space = fock.FockSpace(Domain((4.0,), (4,)), 3)
        with pytest.raises(ConfigError):
            fock.build_bogoliubov_projected({1: 0.3}, 3, space)

    def test_two_pair_monomials(self):
        # N=4 amplitudes carry the degree-2 monomials of the exponential:
        # alpha_1^2/2, alpha_1 alpha_2, alpha_2^2/2 (unnormalized weights)
        dom = Domain((6.0,), (6,))
        space = fock.FockSpace(dom, 4)
        a1, a2 = 0.4, 0.15
        st_ = fock.build_bogoliubov_projected({1: a1, 2: a2}, 4, space)

        # compare against the explicitly expanded degree-2 polynomial
        def raw(ks):
            amps = {tuple([0] * 6): 1.0 + 0j}
            for k in ks:
                amps = fock._raise_mode(amps, fock.momentum_mode(space, k))
            out = np.zeros(space.dim, dtype=complex)
            for occ, amp in amps.items():
                out[space.index(occ)] = amp
            return out

        ref = (0.5 * a1**2 * raw([1, -1, 1, -1])
               + a1 * a2 * raw([1, -1, 2, -2])
               + 0.5 * a2**2 * raw([2, -2, 2, -2]))
        ref /= np.linalg.norm(ref)
        assert abs(np.vdot(st_.amplitudes, ref)) == pytest.approx(1.0,
                                                                  abs=1e-12)


def test_local_normal_tensor_two_fluid_identity():
    dom = Domain((4.0,), (8,))
    space = fock.FockSpace(dom, 2)
    state = fock.build_k0_bec(space)
    vf = VelocityField("constant", params=(0.5,))
    nf = fock.local_normal_tensor(state, vf, 1.0, 0, 0)
    total = nf.superfluid_tensor() + nf.tensor
    mask = np.isfinite(nf.tensor[:, 0, 0])
    assert np.allclose(total[mask, 0, 0], nf.rho[mask], atol=1e-12)


def test_local_normal_tensor_masks_zero_velocity():
    dom = Domain((4.0,), (8,))
    space = fock.FockSpace(dom, 2)
    state = fock.build_k0_bec(space)
    vf = VelocityField("linear", params=(0.4,))  # v(0) = 0 at site 0
    nf = fock.local_normal_tensor(state, vf, 1.0, 0, 0)
    assert not np.isfinite(nf.tensor[0, 0, 0])


def test_thermal_ensemble_density_sums_to_n():
    dom = Domain((4.0,), (5,))
    ens = fock.thermal_ensemble(fock.FockSpace(dom, 2), mass=1.0, beta=1.0)
    total = sum(fock.site_density(ens, s) for s in range(5)) * dom.cell_volume
    assert total == pytest.approx(2.0, abs=1e-10)
