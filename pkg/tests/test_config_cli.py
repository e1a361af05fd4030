import json

import numpy as np
import pytest

from sfdist import cli
from sfdist.config import build_config, load_config
from sfdist.errors import ConfigError


BEC_INI = """
[domain]
lengths = 4.0
sites = 8

[field]
family = constant
params = 0.5

[bec]
n_particles = 2

[run]
seed = 3
output = {out}
"""

PIMC_INI = """
[domain]
lengths = 4.0
sites = 16

[field]
family = constant
params = 0.5

[pimc]
n_particles = 2
beta = 2.0
n_slices = 16
sweeps = 500
thermalization = 100
staging_length = 6
n_bins = 8

[run]
seed = 7
output = {out}
"""


def write(tmp_path, name, text, out):
    p = tmp_path / name
    p.write_text(text.format(out=out))
    return str(p)


class TestConfig:
    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            build_config({"domain": {"lengths": "4", "sites": "8",
                                     "oops": "1"},
                          "field": {"family": "constant", "params": "0.5"},
                          "bec": {"n_particles": "2"}}, "bec")

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="unexpected sections"):
            build_config({"domain": {"lengths": "4", "sites": "8"},
                          "field": {"family": "constant"},
                          "bec": {"n_particles": "2"},
                          "mystery": {}}, "bec")

    def test_missing_section_rejected(self):
        with pytest.raises(ConfigError, match="missing required sections"):
            build_config({"domain": {"lengths": "4", "sites": "8"}}, "bec")

    def test_missing_required_key_rejected(self):
        with pytest.raises(ConfigError, match="missing required keys"):
            build_config({"domain": {"lengths": "4"},
                          "field": {"family": "constant"},
                          "bec": {"n_particles": "2"}}, "bec")

    def test_type_errors(self):
        with pytest.raises(ConfigError, match="expected"):
            build_config({"domain": {"lengths": "4", "sites": "eight"},
                          "field": {"family": "constant"},
                          "bec": {"n_particles": "2"}}, "bec")

    def test_env_output_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SFDIST_OUTPUT_DIR", str(tmp_path / "envout"))
        cfg = build_config({"domain": {"lengths": "4", "sites": "8"},
                            "field": {"family": "constant",
                                      "params": "0.5"},
                            "bec": {"n_particles": "2"},
                            "run": {"output": "elsewhere"}}, "bec")
        assert cfg.output == str(tmp_path / "envout")

    def test_env_thread_cap(self, monkeypatch):
        monkeypatch.setenv("SFDIST_MAX_THREADS", "2")
        cfg = build_config({"domain": {"lengths": "4", "sites": "8"},
                            "field": {"family": "constant",
                                      "params": "0.5"},
                            "bec": {"n_particles": "2"},
                            "run": {"threads": "8"}}, "bec")
        assert cfg.threads == 2


class TestCLI:
    def test_missing_config_exits_2(self, capsys):
        assert cli.main(["bec", "/nonexistent.ini"]) == 2

    def test_bec_rotation_diagonal_constant(self, tmp_path, capsys):
        ini = tmp_path / "bec.ini"
        out = tmp_path / "out"
        ini.write_text(f"""
[domain]
lengths = 6.0 6.0
sites = 6 6

[field]
family = rotation
params = 0.4

[bec]
n_particles = 3

[run]
output = {out}
""")
        assert cli.main(["bec", str(ini)]) == 0
        rows = (out / "bec.csv").read_text().strip().split("\n")[1:]
        expected = 3 * 1.0 / 36.0  # N m / |Omega|
        for row in rows:
            x1, x2, i, j, rho, rho_n, err = row.split(",")
            if i == j:
                assert float(rho_n) == pytest.approx(expected, rel=1e-12)

    def test_pimc_deterministic_csv(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        ini = write(tmp_path, "pimc.ini", PIMC_INI, out1)
        assert cli.main(["pimc", ini]) == 0
        assert cli.main(["pimc", ini, "--output", str(out2)]) == 0
        assert (out1 / "pimc.csv").read_bytes() == (
            out2 / "pimc.csv").read_bytes()

    def test_pimc_manifest_contents(self, tmp_path):
        out = tmp_path / "out"
        ini = write(tmp_path, "pimc.ini", PIMC_INI, out)
        assert cli.main(["pimc", ini]) == 0
        manifest = json.loads((out / "pimc_manifest.json").read_text())
        assert manifest["seed"] == 7
        assert manifest["config"]["pimc"]["sweeps"] == "500"
        assert "acceptance_rates" in manifest
        assert "versions" in manifest
        assert any("slow-variation" in w for w in manifest["warnings"])

    def test_manifest_config_roundtrip(self, tmp_path):
        """Re-running the echoed config reproduces the CSV byte for byte."""
        out = tmp_path / "out"
        ini = write(tmp_path, "pimc.ini", PIMC_INI, out)
        assert cli.main(["pimc", ini]) == 0
        manifest = json.loads((out / "pimc_manifest.json").read_text())
        lines = []
        for section, kv in manifest["config"].items():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in kv.items())
        ini2 = tmp_path / "echo.ini"
        ini2.write_text("\n".join(lines))
        assert cli.main(["pimc", str(ini2), "--output",
                         str(tmp_path / "out2")]) == 0
        assert (out / "pimc.csv").read_bytes() == (
            tmp_path / "out2" / "pimc.csv").read_bytes()

    def test_seed_flag_changes_stream(self, tmp_path):
        out = tmp_path / "out"
        ini = write(tmp_path, "pimc.ini", PIMC_INI, out)
        assert cli.main(["pimc", ini]) == 0
        assert cli.main(["pimc", ini, "--seed", "99", "--output",
                         str(tmp_path / "out99")]) == 0
        assert (out / "pimc.csv").read_bytes() != (
            tmp_path / "out99" / "pimc.csv").read_bytes()

    def test_quasiparticle_json(self, tmp_path):
        ini = tmp_path / "qp.ini"
        out = tmp_path / "out"
        ini.write_text(f"""
[quasiparticle]
dimension = 1
lengths = 100.0
kmax = 20.0
dispersion = phonon
params = 1.0
beta = 1.0

[run]
output = {out}
""")
        assert cli.main(["quasiparticle", str(ini)]) == 0
        rec = json.loads((out / "quasiparticle.json").read_text())
        assert rec["critical_velocity"] == pytest.approx(1.0)
        assert len(rec["rho_n_tensor"]) == 1

    def test_validate_single_scenario(self, tmp_path, capsys):
        assert cli.main(["validate", "--scenario", "winding-identity",
                         "--output", str(tmp_path)]) == 0
        text = capsys.readouterr().out
        assert "PASS" in text and "winding-identity" in text
        rec = json.loads((tmp_path / "validate.json").read_text())
        assert rec[0]["passed"] is True

    def test_rtqc_subcommand(self, tmp_path):
        from sfdist import fock, stateio
        from sfdist.domain import Domain, VelocityField
        dom = Domain((3.0,), (3,))
        space = fock.FockSpace(dom, 2)
        vf = VelocityField("constant", params=(0.7,))
        st = fock.build_strong_sf(space, vf, 1.0, [0, 1, 2])
        state_path = tmp_path / "sf.bin"
        stateio.save_state(st, state_path)
        ini = tmp_path / "rtqc.ini"
        out = tmp_path / "out"
        ini.write_text(f"""
[rtqc]
state_file = {state_path}
region = 0 1 2
n_region = 2

[run]
output = {out}
""")
        assert cli.main(["rtqc", str(ini)]) == 0
        rec = json.loads((out / "rtqc.json").read_text())
        assert rec["coherence_bits"] == pytest.approx(2 * np.log2(3),
                                                      abs=1e-10)
        assert rec["distillation_rate_bound"] == 1
