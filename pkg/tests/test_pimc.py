import math

import numpy as np
import pytest

from sfdist import pimc
from sfdist.domain import Domain, VelocityField
from sfdist.errors import ConfigError, InsufficientSamplesError


def make_params(**kw):
    base = dict(n_particles=2, domain=Domain((4.0,), (16,)), mass=1.0,
                beta=2.0, n_slices=16, staging_length=6, sweeps=10,
                thermalization=0, seed=0)
    base.update(kw)
    return pimc.PIMCParams(**base)


def test_init_deterministic():
    params = make_params()
    a = pimc.init_worldlines(params, seed=5)
    b = pimc.init_worldlines(params, seed=5)
    assert np.array_equal(a.beads, b.beads)
    assert np.array_equal(a.perm, b.perm)
    assert np.array_equal(a.offsets, b.offsets)
    assert np.array_equal(a.perm, np.arange(2))


def test_action_invariances():
    params = make_params()
    rng = np.random.default_rng(1)
    config = pimc.init_worldlines(params, seed=2)
    for _ in range(50):
        pimc.mc_sweep(config, params, rng)
    before = pimc.total_action(config, params)
    pimc.recenter(config, params)
    config.check_valid()
    assert pimc.total_action(config, params) == pytest.approx(before,
                                                              abs=1e-9)


def test_ramp_detailed_balance_identity():
    """Ramp action change equals an independent total-action difference."""
    params = make_params(n_slices=8, staging_length=3)
    rng = np.random.default_rng(3)
    config = pimc.init_worldlines(params, seed=4)
    for _ in range(20):
        pimc.mc_sweep(config, params, rng)
    for w in (-1, 1, 2):
        predicted = pimc.ramp_action_change(config, params, 0, 0, w)
        trial = config.copy()
        cyc = pimc._cycle_of(trial, 0)
        n_links = len(cyc) * params.n_slices
        u = w * params.lengths[0] / n_links
        for r, p in enumerate(cyc):
            g = r * params.n_slices + np.arange(params.n_slices)
            trial.beads[p, :, 0] += u * g
        trial.offsets[cyc[-1], 0] += w
        actual = (pimc.total_action(trial, params)
                  - pimc.total_action(config, params))
        assert predicted == pytest.approx(actual, abs=1e-12)


def test_free_ring_link_variance():
    """Closed-bridge link variance is (tau/m)(1 - 1/P) without winding."""
    params = make_params(n_particles=1, n_slices=16, sweeps=0)
    rng = np.random.default_rng(7)
    config = pimc.init_worldlines(params, seed=8)
    samples = []
    for sweep in range(30_000):
        pimc.staging_move(config, params, rng)
        if sweep % 3 == 0 and config.offsets[0, 0] == 0:
            delta = pimc.link_displacements(config, params)
            samples.append(delta[0, :, 0])
    var = np.var(np.concatenate(samples))
    expected = params.tau / params.mass * (1 - 1 / params.n_slices)
    assert var == pytest.approx(expected, rel=0.05)


def test_distinguishable_nonwinding_term2_is_zero():
    """With identity permutation and zero winding, the functional-derivative
    term vanishes identically and the density route carries everything."""
    params = make_params(sweeps=0, n_bins=8)
    vf = VelocityField("constant", params=(0.5,))
    rng = np.random.default_rng(9)
    config = pimc.init_worldlines(params, seed=10)
    acc = pimc.EstimatorAccumulator(params, 0, 0, block_size=50)
    for _ in range(200):
        for _ in range(params.n_particles):
            pimc.staging_move(config, params, rng)
        if np.any(config.offsets):  # staging windows never change offsets
            raise AssertionError("offsets changed without winding moves")
        acc.record(config, vf)
    assert np.all(acc.term2 == 0.0)
    assert acc.d_sq == 0.0


def test_accumulate_local_normal_argument_check():
    params = make_params()
    vf = VelocityField("constant", params=(0.5,))
    config = pimc.init_worldlines(params, seed=0)
    acc = pimc.EstimatorAccumulator(params, 0, 0)
    pimc.accumulate_local_normal(config, vf, params.mass, params.beta,
                                 acc, 0, 0)
    assert acc.n_samples == 1
    with pytest.raises(ConfigError):
        pimc.accumulate_local_normal(config, vf, 2 * params.mass,
                                     params.beta, acc, 0, 0)


class TestIdealGasOracle:
    def test_known_value(self):
        # independent check: distinguishable-limit and boson values bracket it
        val = pimc.ideal_gas_oracle(4, 4.0, 2.0, 1.0)
        assert 0.0 < val < 1.0

    def test_high_temperature_limit(self):
        assert pimc.ideal_gas_oracle(3, 4.0, 0.01, 1.0) < 1e-6

    def test_low_temperature_limit(self):
        assert pimc.ideal_gas_oracle(3, 4.0, 50.0, 1.0) == pytest.approx(
            1.0, abs=1e-6)

    def test_single_particle_matches_theta_ratio(self):
        # N=1: rho_s/rho = m L^2 <W^2> / beta with theta-function weights
        L, beta, m = 4.0, 2.0, 1.0
        val = pimc.ideal_gas_oracle(1, L, beta, m)
        c = m * L * L / (2 * beta)
        ws = np.arange(-50, 51)
        weights = np.exp(-c * ws**2)
        ref = m * L * L * np.sum(weights * ws**2) / np.sum(weights) / beta
        assert val == pytest.approx(ref, abs=1e-12)


def test_short_chain_consistent_with_oracle():
    params = make_params(sweeps=20_000, thermalization=2_000, seed=11)
    vf = VelocityField("constant", params=(0.5,))
    acc, rates = pimc.run_chain(params, vf, 0, 0)
    val, err = pimc.superfluid_fraction_constant_v(acc)
    oracle = pimc.ideal_gas_oracle(2, 4.0, 2.0, 1.0)
    assert abs(val - oracle) < 4 * err, (val, err, oracle)
    assert rates["staging"] == pytest.approx(1.0)  # exact for ideal gas


def test_binned_estimator_sums_to_global():
    params = make_params(sweeps=2_000, thermalization=500, seed=12,
                         n_bins=8)
    vf = VelocityField("constant", params=(0.5,))
    acc, _ = pimc.run_chain(params, vf, 0, 0)
    assert acc.term2.sum() == pytest.approx(0.5 * acc.d_sq, rel=1e-12)


def test_stderr_needs_blocks():
    params = make_params(sweeps=0)
    acc = pimc.EstimatorAccumulator(params, 0, 0)
    with pytest.raises(InsufficientSamplesError):
        pimc.superfluid_fraction_constant_v(acc)


def test_merge_matches_single_stream_counts():
    params = make_params(sweeps=1_000, thermalization=100, seed=13)
    vf = VelocityField("constant", params=(0.5,))
    a, _ = pimc.run_chain(params, vf, 0, 0, chain_id=0)
    b, _ = pimc.run_chain(params, vf, 0, 0, chain_id=1)
    merged = a.merge(b)
    assert merged.n_samples == a.n_samples + b.n_samples
    assert merged.d_sq == pytest.approx(a.d_sq + b.d_sq, rel=1e-14)
