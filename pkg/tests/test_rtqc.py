import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfdist import fock, rtqc
from sfdist.domain import Domain, VelocityField
from sfdist.errors import ConfigError


def strong_sf(m_sites, n, total_sites=None, v=0.7):
    total = total_sites or m_sites
    dom = Domain((float(total),), (total,))
    space = fock.FockSpace(dom, n)
    vf = VelocityField("constant", params=(v,))
    return fock.build_strong_sf(space, vf, 1.0, list(range(m_sites))), vf


def test_tuple_isometry_is_isometry():
    for m, n in [(2, 2), (3, 2), (3, 3), (4, 2)]:
        occ_list = rtqc._region_occupations(m, n)
        v = rtqc._tuple_isometry(m, n, occ_list)
        assert np.allclose(v.T @ v, np.eye(len(occ_list)), atol=1e-12)


def test_basis_dimensions():
    assert rtqc.RegionBasis((0, 1, 2), 2, "tuple").dim == 9
    assert rtqc.RegionBasis((0, 1, 2), 2, "occupation").dim == 6


def test_marginal_is_valid_density_matrix():
    state, _ = strong_sf(3, 2, total_sites=5)
    sig = rtqc.marginal_state(state, [0, 1, 2], 2, "tuple")
    evals = np.linalg.eigvalsh(sig.matrix)
    assert np.all(evals > -1e-12)
    assert np.trace(sig.matrix).real == pytest.approx(1.0, abs=1e-12)


def test_zero_probability_sector_rejected():
    state, _ = strong_sf(2, 2, total_sites=4)  # all particles on sites 0,1
    with pytest.raises(ConfigError):
        rtqc.marginal_state(state, [2, 3], 2)


@settings(max_examples=15, deadline=None)
@given(m=st.integers(2, 4), n=st.integers(1, 3))
def test_strong_sf_maximal_coherence(m, n):
    state, _ = strong_sf(m, n)
    rep = rtqc.coherence(rtqc.marginal_state(state, range(m), n, "tuple"))
    assert rep.c_bits == pytest.approx(n * math.log2(m), abs=1e-10)
    assert rep.rate_bound == 1


def test_decohered_state_has_zero_coherence():
    state, _ = strong_sf(3, 2)
    sig = rtqc.marginal_state(state, [0, 1, 2], 2, "tuple")
    assert rtqc.coherence(rtqc.decohere(sig)).c_bits == 0.0


def test_lgt_invariance_of_coherence():
    state, _ = strong_sf(4, 2)
    rep = rtqc.coherence(rtqc.marginal_state(state, range(4), 2, "tuple"))
    boosted = fock.apply_lgt(state, VelocityField("linear", params=(0.3,)),
                             1.0)
    rep2 = rtqc.coherence(rtqc.marginal_state(boosted, range(4), 2, "tuple"))
    assert rep2.c_bits == pytest.approx(rep.c_bits, abs=1e-12)


def test_occupation_mode_carries_less_coherence():
    """Symmetrized basis collides repeated positions: strictly less
    coherence than the tuple convention for two or more particles."""
    state, _ = strong_sf(3, 2)
    c_tuple = rtqc.coherence(
        rtqc.marginal_state(state, [0, 1, 2], 2, "tuple")).c_bits
    c_occ = rtqc.coherence(
        rtqc.marginal_state(state, [0, 1, 2], 2, "occupation")).c_bits
    assert c_occ < c_tuple - 0.1


def test_distillation_rate_of_incoherent_state():
    dom = Domain((3.0,), (3,))
    space = fock.FockSpace(dom, 2)
    amps = np.zeros(space.dim)
    amps[space.index((2, 0, 0))] = 1.0  # both particles pinned to site 0
    pinned = fock.StateVector(space, amps)
    assert rtqc.distillation_rate(pinned, [0, 1, 2], 2) == 0


def test_single_site_region_rejected():
    state, _ = strong_sf(3, 2)
    with pytest.raises(ConfigError):
        rtqc.distillation_rate(state, [0], 1)
