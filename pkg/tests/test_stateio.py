import json

import numpy as np
import pytest

from sfdist import cmps, fock, stateio
from sfdist.domain import Domain, VelocityField
from sfdist.errors import ConfigError


def test_state_roundtrip(tmp_path):
    dom = Domain((4.0, 2.0), (4, 2), "open")
    space = fock.FockSpace(dom, 2)
    rng = np.random.default_rng(0)
    amps = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
    st = fock.StateVector(space, amps / np.linalg.norm(amps))
    path = tmp_path / "state.bin"
    stateio.save_state(st, path, {"recipe": "random", "seed": 0})
    back = stateio.load_state(path)
    assert np.array_equal(back.amplitudes, st.amplitudes)
    assert back.space.domain == dom
    assert back.space.n_particles == 2


def test_sidecar_metadata(tmp_path):
    dom = Domain((3.0,), (3,))
    st = fock.build_k0_bec(fock.FockSpace(dom, 1))
    path = tmp_path / "state.bin"
    stateio.save_state(st, path, {"recipe": "k0_bec", "field": "none"})
    meta = json.loads((tmp_path / "state.bin.meta.json").read_text())
    assert meta["recipe"] == "k0_bec"


def test_wrong_magic_rejected(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
    with pytest.raises(ConfigError):
        stateio.load_state(path)


def test_truncated_payload_rejected(tmp_path):
    dom = Domain((3.0,), (3,))
    st = fock.build_k0_bec(fock.FockSpace(dom, 2))
    path = tmp_path / "state.bin"
    stateio.save_state(st, path)
    data = path.read_bytes()
    path.write_bytes(data[:-16])
    with pytest.raises(ConfigError):
        stateio.load_state(path)


def test_cmps_roundtrip(tmp_path):
    s = cmps.CMPS.random_fourier(2.0, 2, seed=3, real=True)
    path = tmp_path / "state.cmps"
    stateio.save_cmps(s, path, n_grid=512)
    back = stateio.load_cmps(path)
    assert back.bond_dim == 2
    assert back.length == 2.0
    for x in (-0.7, 0.1, 0.6):
        assert cmps.density(back, x) == pytest.approx(cmps.density(s, x),
                                                      rel=1e-3)


def test_cmps_roundtrip_preserves_field_use(tmp_path):
    s = cmps.CMPS.random_fourier(2.0, 2, seed=4, real=True)
    path = tmp_path / "state.cmps"
    stateio.save_cmps(s, path, n_grid=1024)
    back = stateio.load_cmps(path)
    vf = VelocityField("constant", params=(0.4,))
    _, rn1 = cmps.normal_fluid_1d(s, vf, 1.0, 0.3)
    _, rn2 = cmps.normal_fluid_1d(back, vf, 1.0, 0.3, check_intrinsic=False)
    assert rn2 == pytest.approx(rn1, rel=1e-3)
