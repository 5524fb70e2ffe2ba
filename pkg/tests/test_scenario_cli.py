import textwrap
from pathlib import Path

import numpy as np
import pytest

from relecho import scenario
from relecho.cli import main
from relecho.errors import ValidationError
from relecho.output import read_manifest

ROOT = Path(__file__).resolve().parents[1]

SMALL = """
[scenario]
units = natural
methods = overlap current
seed = 3

[particle]
mass = 1.0
field = 1.0
kz = 0.2

[perturbation]
profile = gaussian_scalar
amplitude = 1.0
width = 1.0
center_x = 1.0
strength = {strength}

[truncation]
nu_max = 1
ml_min = -1
ml_max = 3

[grid]
extent = 9.0
points = 72

[initial]
kind = {kind}

[time]
t_max = {t_max}
samples = 41
"""


def small(strength="0.02", kind="random", t_max="400", extra=""):
    return textwrap.dedent(SMALL.format(strength=strength, kind=kind, t_max=t_max)) + textwrap.dedent(extra)


def write(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def read_csv(path):
    return np.genfromtxt(path, delimiter=",", names=True, dtype=None, encoding="utf-8")


class TestParse:
    def test_units_required(self):
        with pytest.raises(ValidationError, match="scenario.units"):
            scenario.parse("[scenario]\nseed = 1\n")
        with pytest.raises(ValidationError, match="scenario.units"):
            scenario.parse("[scenario]\nunits = si\n")

    def test_unknown_key_names_field(self):
        with pytest.raises(ValidationError, match="particle.charge"):
            scenario.parse("[scenario]\nunits = natural\n[particle]\nmass = 1\nfield = 1\ncharge = 2\n")
        with pytest.raises(ValidationError, match=r"\[bogus\]"):
            scenario.parse("[scenario]\nunits = natural\n[bogus]\n")

    @pytest.mark.parametrize(
        "section,key,value",
        [("particle", "mass", "-1"), ("particle", "field", "abc"), ("grid", "points", "3.5"), ("time", "t_max", "0")],
    )
    def test_bad_values_name_the_field(self, section, key, value):
        text = small()
        lines = [f"{key} = {value}" if line.startswith(f"{key} =") else line for line in text.splitlines()]
        with pytest.raises(ValidationError, match=f"{section}.{key}"):
            scenario.parse("\n".join(lines))

    def test_initial_label_outside_truncation(self):
        text = small(kind="label").replace("kind = label", "kind = label\nn = 5")
        with pytest.raises(ValidationError):
            scenario.parse(text)

    def test_beam_weights(self):
        text = small(kind="beam").replace("kind = beam", "kind = beam\nstates = 0 0 1; 0 1 1\nweights = 0.5 0.6")
        with pytest.raises(ValidationError):
            scenario.parse(text)

    def test_example_scenarios_parse(self):
        assert scenario.load(ROOT / "scenarios" / "landau_decay.cfg").frame == "rest"
        assert scenario.load(ROOT / "scenarios" / "kg_toy.cfg").kg is not None
        with pytest.raises(ValidationError, match="particle.mass"):
            scenario.load(ROOT / "scenarios" / "bad.cfg")


class TestCommands:
    def test_validate(self, tmp_path, capsys):
        assert main(["validate", str(write(tmp_path, small()))]) == 0
        assert "valid" in capsys.readouterr().out

    def test_exit_codes(self, tmp_path):
        assert main(["validate", str(ROOT / "scenarios" / "bad.cfg")]) == 2
        assert main(["validate", str(tmp_path / "missing.cfg")]) == 4
        assert main(["validate"]) == 2
        # too weak to reach the fit window: the fit guard trips
        weak = write(tmp_path, small(strength="1e-7", kind="label", extra="[fit]\nwindow_low = 1e-4\n"))
        assert main(["perturbative", str(weak), "--out", str(tmp_path / "o")]) == 3

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        cfg = write(tmp_path, small())
        assert main(["spectrum", str(cfg), "--out", str(blocker / "sub")]) == 4

    def test_spectrum(self, tmp_path):
        cfg = write(tmp_path, small())
        assert main(["spectrum", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        rows = read_csv(tmp_path / "spectrum.csv")
        assert len(rows) == 2
        assert rows["degeneracy"][0] == 4  # ml >= 0 on the lowest level
        assert rows["energy"][1] == pytest.approx(np.sqrt(1 + 0.04 + 2))

    def test_evolve_unperturbed(self, tmp_path):
        cfg = write(tmp_path, small(strength="0", t_max="1000"))
        assert main(["evolve", str(cfg), "--out", str(tmp_path)]) == 0
        for method in ("overlap", "current"):
            data = read_csv(tmp_path / f"fidelity_{method}.csv")
            assert np.abs(data["F"] - 1).max() < (1e-10 if method == "overlap" else 1e-6)
        man = read_manifest(tmp_path / "manifest.txt")
        for key in ("command", "config", "config_sha256", "seed", "version", "files", "wall_time_s"):
            assert key in man
        assert man["seed"] == "3"

    def test_zero_profile_gives_flat_prediction(self, tmp_path):
        cfg = write(tmp_path, small(kind="label").replace("profile = gaussian_scalar", "profile = zero").replace("amplitude = 1.0\nwidth = 1.0\ncenter_x = 1.0\n", ""))
        assert main(["perturbative", str(cfg), "--out", str(tmp_path)]) == 0
        rows = {r["quantity"]: r["value"] for r in read_csv(tmp_path / "fit_report.csv")}
        assert float(rows["C"]) == 0.0
        assert np.all(read_csv(tmp_path / "prediction.csv")["F"] == 1.0)

    def test_run_is_deterministic(self, tmp_path):
        cfg = write(tmp_path, small(kind="label", t_max="2000", strength="auto"))
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", str(cfg), "--out", str(a), "--threads", "1"]) == 0
        assert main(["run", str(cfg), "--out", str(b)]) == 0
        for name in ("fidelity_overlap.csv", "fidelity_current.csv", "prediction.csv", "fit_report.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_seed_changes_random_state(self, tmp_path):
        cfg = write(tmp_path, small())
        main(["evolve", str(cfg), "--out", str(tmp_path / "a")])
        main(["evolve", str(cfg), "--out", str(tmp_path / "b"), "--seed", "99"])
        assert (tmp_path / "a" / "fidelity_overlap.csv").read_bytes() != (tmp_path / "b" / "fidelity_overlap.csv").read_bytes()
        assert main(["evolve", str(cfg), "--seed", "-1", "--out", str(tmp_path)]) == 2

    def test_strict_turns_compton_warning_into_error(self, tmp_path):
        cfg = write(tmp_path, small(kind="label", strength="auto", t_max="2000", extra="[fit]\nboost_momenta = 2.0\n"))
        with pytest.warns(RuntimeWarning, match="Compton"):
            assert main(["perturbative", str(cfg), "--out", str(tmp_path)]) == 0
        assert main(["perturbative", str(cfg), "--out", str(tmp_path), "--strict"]) == 2

    def test_kg(self, tmp_path, capsys):
        assert main(["kg", str(ROOT / "scenarios" / "kg_toy.cfg"), "--out", str(tmp_path)]) == 0
        data = read_csv(tmp_path / "kg_fidelity.csv")
        direct = data[data["method"] == "kg_direct"]
        kernel = data[data["method"] == "kg_kernel"]
        assert np.abs(direct["re_f"] - kernel["re_f"]).max() < 1e-6
        assert "kernel vs direct" in capsys.readouterr().out

    def test_kg_supercritical_exit_code(self, tmp_path):
        text = "[scenario]\nunits = natural\n[kg]\nmass = 0.2\nlength = 20\npoints = 64\nstrength = 4\namplitude = 1\nwidth = 0.7\nt_max = 1\n"
        assert main(["kg", str(write(tmp_path, text)), "--out", str(tmp_path)]) == 3
