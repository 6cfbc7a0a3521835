"""End-to-end runs of the command line front end via main(argv)."""

import numpy as np
import pytest

from cocyclelab import cli, fieldio as fio


def write_config(tmp_path, doc, name="config.json"):
    p = tmp_path / name
    fio.save_json(p, doc)
    return str(p)


CONST_CHAIN = {
    "metric": {"nx": 48, "ny": 48, "harmonics": [[0.1, 1, 0]]},
    "chain": [{"kind": "constant", "axis": [0.6, 0.0, 0.8]}],
}

FACTORY_CHAIN = {
    "metric": {"nx": 96, "ny": 96},
    "chain": [{"kind": "elliptic", "scale": [0.8, 0.2], "offset": [0.1, -0.2]}],
}


def run_generate(tmp_path, doc):
    cfg = write_config(tmp_path, doc)
    out = tmp_path / "out"
    rc = cli.main(["generate", cfg, "--outdir", str(out)])
    assert rc == cli.EXIT_OK
    return out


def test_generate_then_verify_trivial(tmp_path):
    out = run_generate(tmp_path, {"metric": {"nx": 32, "ny": 32}, "chain": []})
    rc = cli.main([
        "verify", str(out / "pair.json"), str(out / "trivializer.json"),
        "--geodesics", "2", "--dt", "5e-3",
        "--report", str(tmp_path / "report.json"),
    ])
    assert rc == cli.EXIT_OK
    report = fio.load_json(tmp_path / "report.json")
    assert report["pass"] is True
    assert "holonomy" in report["residuals"]  # flat metric branch


def test_generate_then_verify_constant_chain(tmp_path, capsys):
    out = run_generate(tmp_path, CONST_CHAIN)
    certs = fio.load_json(out / "certificates.json")
    assert len(certs["steps"]) == 1
    assert set(certs["hashes"]) == {"pair.json", "trivializer.json"}
    rc = cli.main([
        "verify", str(out / "pair.json"), str(out / "trivializer.json"),
        "--geodesics", "2", "--t-final", "2.0", "--dt", "2e-3",
    ])
    captured = capsys.readouterr()
    assert rc == cli.EXIT_OK, captured.out + captured.err
    assert "cocycle" in captured.out  # curved metric branch
    assert "PASS" in captured.out and "FAIL" not in captured.out


def test_generate_deterministic(tmp_path):
    out1 = run_generate(tmp_path, FACTORY_CHAIN)
    cfg = write_config(tmp_path, FACTORY_CHAIN, name="config2.json")
    out2 = tmp_path / "out2"
    assert cli.main(["generate", cfg, "--outdir", str(out2)]) == cli.EXIT_OK
    h1 = fio.load_json(out1 / "certificates.json")["hashes"]
    h2 = fio.load_json(out2 / "certificates.json")["hashes"]
    assert h1 == h2
    assert (out1 / "pair.json").read_bytes() == (out2 / "pair.json").read_bytes()


def test_verify_detects_corruption(tmp_path, capsys):
    out = run_generate(tmp_path, CONST_CHAIN)
    doc = fio.load_json(out / "pair.json")
    # flat layout: ((y * nx + x) * 3 + i) * 3 + j; pick x = nx/4 where the
    # metric harmonic has maximal slope, so the entry is nonzero
    idx = ((0 * 48 + 12) * 3 + 0) * 3 + 1
    assert doc["b"]["modes"][0]["re"][idx] != 0.0
    doc["b"]["modes"][0]["re"][idx] *= 1.01
    fio.save_json(out / "pair.json", doc)
    rc = cli.main([
        "verify", str(out / "pair.json"), str(out / "trivializer.json"),
        "--geodesics", "1", "--dt", "5e-3",
    ])
    captured = capsys.readouterr()
    assert rc == cli.EXIT_FAIL
    assert "FAIL" in captured.out


def test_transport_trivial_pair_stays_identity(tmp_path):
    out = run_generate(tmp_path, {"metric": {"nx": 32, "ny": 32}, "chain": []})
    csv = tmp_path / "run.csv"
    rc = cli.main([
        "transport", str(out / "pair.json"),
        "--x", "0.2", "--y", "0.7", "--theta", "1.1",
        "--t-final", "1.0", "--dt", "1e-2", "--out", str(csv),
    ])
    assert rc == cli.EXIT_OK
    data = fio.read_transport_csv(csv)
    assert data["times"][0] == 0.0 and data["times"][-1] == 1.0
    err = np.abs(data["matrices"] - np.eye(3)).max()
    assert err < 1e-12  # zero generator: C stays the identity
    assert data["drift"].max() < 1e-12


def test_reduce_verb(tmp_path):
    out = run_generate(tmp_path, FACTORY_CHAIN)
    red = tmp_path / "red"
    rc = cli.main([
        "reduce", str(out / "pair.json"), str(out / "trivializer.json"),
        "--outdir", str(red),
    ])
    assert rc == cli.EXIT_OK
    report = fio.load_json(red / "reduction_report.json")
    assert report["residuals"]["reduced-field"] < 1e-6
    u = fio.load_field(red / "trivializer_reduced.json")
    assert u.degree == 0
    pair = fio.load_pair(red / "pair_reduced.json")
    assert pair.conn.norm() < 1e-5  # undoing the only step: back to trivial


def test_reduce_degree_zero_is_bad_input(tmp_path):
    out = run_generate(tmp_path, {"metric": {"nx": 32, "ny": 32}, "chain": []})
    rc = cli.main([
        "reduce", str(out / "pair.json"), str(out / "trivializer.json"),
        "--outdir", str(tmp_path / "red"),
    ])
    assert rc == cli.EXIT_BADINPUT


def test_export_field_and_pair(tmp_path):
    out = run_generate(tmp_path, FACTORY_CHAIN)
    png = tmp_path / "phi.pgm"
    rc = cli.main(["export", str(out / "pair.json"), "--out", str(png)])
    assert rc == cli.EXIT_OK
    img = fio.read_pgm(png)
    assert img.shape == (96, 96)
    assert img.max() == 255.0  # min-max scaled
    rc = cli.main([
        "export", str(out / "trivializer.json"),
        "--selector", "1,0,0,abs", "--bits", "16",
        "--out", str(tmp_path / "u.pgm"),
    ])
    assert rc == cli.EXIT_OK
    assert fio.read_pgm(tmp_path / "u.pgm").max() == 65535.0


def test_export_bad_selector(tmp_path):
    out = run_generate(tmp_path, {"metric": {"nx": 32, "ny": 32}, "chain": []})
    rc = cli.main([
        "export", str(out / "pair.json"), "--selector", "bogus",
        "--out", str(tmp_path / "x.pgm"),
    ])
    assert rc == cli.EXIT_BADINPUT


def test_generate_bad_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2, 3]")
    assert cli.main(["generate", str(bad)]) == cli.EXIT_BADINPUT
    worse = write_config(tmp_path, {"chain": [{"kind": "mystery"}]}, "worse.json")
    assert cli.main(["generate", worse, "--outdir", str(tmp_path / "o")]) \
        == cli.EXIT_BADINPUT
    missing = cli.main(["verify", str(tmp_path / "nope.json"), str(bad)])
    assert missing == cli.EXIT_BADINPUT


def test_generate_rejects_non_holomorphic_chain(tmp_path):
    # a repeat-q doubling after an elliptic step: q is not holomorphic for
    # the doubled connection on a coarse grid, certification must fail loudly
    doc = {
        "metric": {"nx": 48, "ny": 48},
        "chain": [
            {"kind": "elliptic", "scale": [2.5, 0.0]},
            {"kind": "elliptic", "scale": [2.5, 0.0], "z0": [0.31, 0.17]},
        ],
    }
    cfg = write_config(tmp_path, doc)
    rc = cli.main(["generate", cfg, "--outdir", str(tmp_path / "o")])
    assert rc == cli.EXIT_FAIL
