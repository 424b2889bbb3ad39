import csv
import hashlib
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from gapscale.cli import RunManifest, config_hash, main


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, *argv, name="out"):
    out = str(tmp_path / name)
    code = main(list(argv) + ["--out", out])
    return code, out


# -- spectrum ----------------------------------------------------------------------

def test_chain_L5_ten_fold_ground_level(tmp_path):
    code, out = run(tmp_path, "spectrum", "--model", "chain", "--L", "5", "--J", "1",
                    "--gamma", "0", "--m", "12")
    assert code == 0
    e = np.array([float(r["energy_J"]) for r in read_csv(os.path.join(out, "spectrum.csv"))])
    assert e.size == 12
    assert np.allclose(e[:10], -3.0, atol=1e-12)
    assert np.all(e[10:] > -3.0 + 1e-6)


def test_dimer_staggered_sector_single_level(tmp_path):
    code, out = run(tmp_path, "spectrum", "--model", "dimer", "--L", "8", "--U", "1",
                    "--gamma", "0", "--sector", "w=1")
    assert code == 0
    rows = read_csv(os.path.join(out, "spectrum.csv"))
    assert len(rows) == 1 and float(rows[0]["energy_U"]) == 0.0


def test_ladder_sector_matches_api(tmp_path):
    from gapscale.models import LadderParams, build_ladder

    code, out = run(tmp_path, "spectrum", "--model", "ladder", "--L", "4", "--K", "3",
                    "--gamma", "1.5", "--sector", "k=0", "--m", "3")
    assert code == 0
    e = [float(r["energy_U"]) for r in read_csv(os.path.join(out, "spectrum.csv"))]
    ref = np.linalg.eigvalsh(build_ladder(LadderParams(4, 3.0, 1.0, 1.5), k_index=0).to_dense())
    assert np.allclose(e, ref[:3], atol=1e-10)


def test_missing_required_flag_writes_nothing(tmp_path, capsys):
    out = tmp_path / "never"
    with pytest.raises(SystemExit) as info:
        main(["spectrum", "--L", "5", "--out", str(out)])
    assert info.value.code == 2
    assert not out.exists()
    assert "--model" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["spectrum", "--model", "chain", "--L", "6", "--h", "0.1", "--sector", "k=1"],
    ["spectrum", "--model", "dimer", "--L", "6"],
    ["spectrum", "--model", "dimer", "--L", "5", "--sector", "w=1"],
    ["spectrum", "--model", "chain", "--L", "6", "--sector", "w=0"],
    ["phasediag", "--K-grid", ""],
    ["gapscaling", "--K", "5", "--L", "8"],
    ["anneal", "--seeds", "0"],
    ["anneal", "--T-initial", "0.01", "--T-final", "1"],
])
def test_usage_errors_exit_2_without_output(tmp_path, argv, capsys):
    out = tmp_path / "never"
    assert main(argv + ["--out", str(out)]) == 2
    assert not out.exists()
    assert "error" in capsys.readouterr().err


def test_bad_bracket_is_argparse_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["phasediag", "--bracket", "3,1", "--out", str(tmp_path / "x")])
    assert info.value.code == 2


# -- manifests and replay ------------------------------------------------------------

def test_manifest_round_trip(tmp_path):
    code, out = run(tmp_path, "dimer", "--L", "4,6")
    assert code == 0
    text = open(os.path.join(out, "manifest_dimer.json")).read()
    man = RunManifest.from_json(text)
    assert man.to_json() == text
    assert man.command == "dimer"
    assert man.config_hash == config_hash("dimer", man.params)
    assert set(man.outputs) == {"dimer.csv"}
    assert man.outputs["dimer.csv"]["columns"][0] == "L"


def test_replay_from_manifest_is_byte_identical(tmp_path):
    code, a = run(tmp_path, "anneal", "--L", "6,8", "--seeds", "5", "--steps", "3000",
                  "--seed", "17", name="a")
    assert code == 0
    man = os.path.join(a, "manifest_anneal.json")
    code, b = run(tmp_path, "anneal", "--config", man, name="b")
    assert code == 0
    for name in ("anneal_runs.csv", "anneal_summary.csv"):
        da = hashlib.sha256(open(os.path.join(a, name), "rb").read()).hexdigest()
        db = hashlib.sha256(open(os.path.join(b, name), "rb").read()).hexdigest()
        assert da == db
    ma = json.load(open(man))
    mb = json.load(open(os.path.join(b, "manifest_anneal.json")))
    assert ma["params"] == mb["params"] and ma["config_hash"] == mb["config_hash"]


def test_manifest_for_other_command_rejected(tmp_path):
    code, a = run(tmp_path, "dimer", "--L", "4", name="a")
    with pytest.raises(SystemExit) as info:
        main(["fermion", "--config", os.path.join(a, "manifest_dimer.json"),
              "--out", str(tmp_path / "b")])
    assert info.value.code == 2


def test_config_defaults_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"U": 2.0, "fermion": {"gamma": 0.2, "L": "5,7,9,11", "fit": "none"}}))
    code, out = run(tmp_path, "fermion", "--config", str(cfg), "--J", "-1", "--L", "5,7")
    assert code == 0
    rows = read_csv(os.path.join(out, "fermion.csv"))
    assert [int(r["L"]) for r in rows] == [5, 7]
    assert all(float(r["gamma_J"]) == 0.2 for r in rows)
    assert not os.path.exists(os.path.join(out, "fermion_fit.csv"))


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dimer": {"no_such_flag": 1}}))
    with pytest.raises(SystemExit) as info:
        main(["dimer", "--config", str(cfg), "--out", str(tmp_path / "x")])
    assert info.value.code == 2


# -- thin wrappers -------------------------------------------------------------------

def test_fermion_command_power_fit(tmp_path):
    code, out = run(tmp_path, "fermion")
    assert code == 0
    fit = read_csv(os.path.join(out, "fermion_fit.csv"))[0]
    # gap = A * L**-p
    assert float(fit["p"]) == pytest.approx(2.0, abs=0.05)


def test_dimer_command_counts(tmp_path):
    code, out = run(tmp_path, "dimer", "--L", "4,5,6")
    assert code == 0
    rows = {int(r["L"]): r for r in read_csv(os.path.join(out, "dimer.csv"))}
    assert rows[4]["count_w0"] == rows[4]["lucas_L"] == "7"
    assert rows[5]["b_L"] == ""
    assert float(rows[6]["gamma_c_U"]) * float(rows[6]["b_L"]) == pytest.approx(1.0)


def test_gapscaling_small(tmp_path):
    code, out = run(tmp_path, "gapscaling", "--K", "4,5", "--L", "4,6,8,10")
    assert code == 0
    fits = read_csv(os.path.join(out, "gapscaling_fits.csv"))
    assert [float(f["K_U"]) for f in fits] == [4.0, 5.0]
    assert all(float(f["r2"]) > 0.99 for f in fits)
    assert float(fits[0]["c"]) < float(fits[1]["c"])
    assert len(read_csv(os.path.join(out, "gapscaling_points.csv"))) == 8


def test_phasediag_small_and_plot_determinism(tmp_path):
    pytest.importorskip("matplotlib")
    code, out = run(tmp_path, "phasediag", "--K-grid", "0.5,5", "--L", "6")
    assert code == 0
    pts = read_csv(os.path.join(out, "phasediag_points.csv"))
    assert [float(p["K_U"]) for p in pts] == [0.5, 5.0]
    ref = read_csv(os.path.join(out, "reference_curves.csv"))
    assert len(ref) == 200
    script = os.path.join(out, "plot_phasediag.py")
    digests = []
    for _ in range(2):
        subprocess.run([sys.executable, script, out], check=True)
        digests.append(hashlib.sha256(open(os.path.join(out, "phasediag.png"), "rb").read()).hexdigest())
    assert digests[0] == digests[1]


def test_parallel_jobs_match_serial(tmp_path):
    argv = ["phasediag", "--K-grid", "3,5", "--L", "4"]
    assert main(argv + ["--out", str(tmp_path / "s")]) == 0
    assert main(argv + ["--jobs", "2", "--out", str(tmp_path / "p")]) == 0
    a = open(tmp_path / "s" / "phasediag_points.csv").read()
    b = open(tmp_path / "p" / "phasediag_points.csv").read()
    assert a == b


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "gapscale.cli", "dimer", "--L", "4",
                        "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout.strip().endswith("dimer.csv")
