import hashlib
import json

import numpy as np
import pytest

from evpq.bitcode import read_codes
from evpq.cli import main
from evpq.vecstore import load_dataset


def _sha(path):
    return hashlib.sha1(path.read_bytes()).hexdigest()


def test_gen(tmp_path):
    assert main(["gen", "--n", "1000", "--d", "100", "--seed", "1", "--out", str(tmp_path)]) == 0
    data_file = tmp_path / "uniform-d100-n1000-s1.f32"
    assert data_file.stat().st_size == 400_000
    manifest = json.loads((tmp_path / "gen-manifest.json").read_text())
    assert (manifest["seed"], manifest["d"], manifest["n"]) == (1, 100, 1000)
    first = _sha(data_file)
    assert main(["gen", "--n", "1000", "--d", "100", "--seed", "1", "--out", str(tmp_path)]) == 0
    assert _sha(data_file) == first


def test_gen_validation(tmp_path):
    assert main(["gen", "--n", "10", "--d", "0", "--out", str(tmp_path)]) == 1


def test_gen_env_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("EVPQ_OUT", str(tmp_path / "envout"))
    assert main(["gen", "--n", "2", "--d", "3", "--name", "tiny"]) == 0
    assert (tmp_path / "envout" / "tiny.f32").exists()


@pytest.fixture
def data384(tmp_path):
    main(["gen", "--n", "50", "--d", "384", "--seed", "2", "--out", str(tmp_path), "--name", "d384"])
    return tmp_path / "d384.f32"


def test_quantize_evp(tmp_path, data384, capsys):
    out = tmp_path / "q"
    assert main(["quantize", "--data", str(data384), "--d", "384", "--quantizer", "evp", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "x=256" in printed and "log10_vertices=181.85" in printed
    manifest = json.loads((out / "quantize-manifest.json").read_text())
    assert manifest["x"] == 256 and round(manifest["log10_vertices"]) == 182
    codes = read_codes(out / "d384.evp.evpb")
    assert (len(codes), codes.d, codes.x) == (50, 384, 256)
    assert (np.count_nonzero(codes.plus | codes.minus, axis=1) > 0).all()


def test_quantize_one_bit(tmp_path, data384):
    assert main(["quantize", "--data", str(data384), "--d", "384", "--quantizer", "one-bit", "--out", str(tmp_path)]) == 0
    path = tmp_path / "d384.one-bit.evps"
    assert path.read_bytes()[:4] == b"EVPS"
    assert read_codes(path).bits.shape == (50, 8)


def test_quantize_bad_x(tmp_path, data384):
    assert main(["quantize", "--data", str(data384), "--d", "384", "--x", "400", "--out", str(tmp_path)]) == 1


def test_missing_data_is_io_error(tmp_path):
    assert main(["quantize", "--data", str(tmp_path / "nope.f32"), "--d", "4", "--out", str(tmp_path)]) == 2


def test_correlate(tmp_path, capsys):
    args = ["correlate", "--uniform", "3000", "--d", "100", "--pairs", "2000", "--out", str(tmp_path), "--pretty"]
    assert main(args) == 0
    records = json.loads((tmp_path / "spearman.json").read_text())
    assert [r["quantizer"] for r in records] == ["evp", "one-bit", "b158"]
    for r in records:
        assert r["n_pairs"] == 2000 and r["seed"] == 0 and -1 <= r["rho"] <= 1
    header = (tmp_path / "shepard-evp.csv").read_text().splitlines()
    assert header[0] == "proxy_value,true_distance" and len(header) == 2001
    iso = np.loadtxt(tmp_path / "isotonic-evp.csv", delimiter=",", skiprows=1)
    assert (np.diff(iso[:, 1]) >= 0).all()
    assert "{67,100}" in capsys.readouterr().out


def test_correlate_normalize_flag(tmp_path):
    from evpq.vecstore import generate_uniform_sphere, write_dataset

    unit = generate_uniform_sphere(4, 400, 20)
    scale = np.random.default_rng(0).uniform(0.5, 3.0, size=(400, 1))
    write_dataset(tmp_path / "unit.f32", unit)
    write_dataset(tmp_path / "scaled.f32", unit.vectors * scale)
    rhos = []
    for name in ("unit", "scaled"):
        out = tmp_path / name
        args = ["correlate", "--data", str(tmp_path / f"{name}.f32"), "--d", "20", "--normalize", "--pairs", "500", "--out", str(out)]
        assert main(args) == 0
        rhos.append([r["rho"] for r in json.loads((out / "spearman.json").read_text())])
    assert rhos[0] == pytest.approx(rhos[1], abs=1e-3)


def test_normalize_rejects_zero_row(tmp_path):
    path = tmp_path / "z.csv"
    path.write_text("1,0\n0,0\n1,1\n")
    assert main(["correlate", "--data", str(path), "--format", "csv", "--normalize", "--pairs", "2", "--out", str(tmp_path)]) == 1


def test_correlate_too_many_pairs(tmp_path):
    path = tmp_path / "three.csv"
    path.write_text("1,0\n0,1\n1,1\n")
    assert main(["correlate", "--data", str(path), "--format", "csv", "--pairs", "10", "--out", str(tmp_path)]) == 1


def test_recall(tmp_path):
    args = ["recall", "--uniform", "3000", "--d", "50", "--n-queries", "20", "--k", "30", "--ns", "30,100,500",
            "--out", str(tmp_path), "--per-query-csv", "--cache-dir", str(tmp_path / "cache")]
    assert main(args) == 0
    records = json.loads((tmp_path / "recall.json").read_text())
    assert len(records) == 9
    for q in ("evp", "one-bit", "b158"):
        means = [r["mean_recall"] for r in records if r["quantizer"] == q]
        assert len(means) == 3 and means == sorted(means)
    assert all(r["queries_from_data"] for r in records)
    assert all(sum(r["histogram"]) == 20 for r in records)
    assert (tmp_path / "recall-evp-30at100.csv").exists()
    assert list((tmp_path / "cache").glob("gt-*.npy"))


def test_recall_query_file(tmp_path):
    main(["gen", "--n", "500", "--d", "16", "--seed", "1", "--out", str(tmp_path), "--name", "base"])
    main(["gen", "--n", "5", "--d", "16", "--seed", "2", "--out", str(tmp_path), "--name", "q"])
    args = ["recall", "--data", str(tmp_path / "base.f32"), "--d", "16", "--queries", str(tmp_path / "q.f32"),
            "--k", "5", "--ns", "5,10", "--quantizers", "evp", "--out", str(tmp_path)]
    assert main(args) == 0
    records = json.loads((tmp_path / "recall.json").read_text())
    assert [r["n"] for r in records] == [5, 10] and not records[0]["queries_from_data"]


def test_bench_kernel_cli(tmp_path, capsys):
    args = ["bench", "--kernel", "b2sp", "--d", "384", "--count", "100000", "--trials", "3", "--out", str(tmp_path), "--pretty"]
    assert main(args) == 0
    rec = json.loads((tmp_path / "bench-b2sp-d384.json").read_text())
    assert rec["fastest_ms"] <= rec["median_ms"] <= rec["slowest_ms"]
    assert "ns per comparison" in capsys.readouterr().out


def test_bench_full_scan_cli(tmp_path):
    args = ["bench", "--full-scan", "--uniform", "1000", "--d", "100", "--queries", "5", "--trials", "2", "--out", str(tmp_path)]
    assert main(args) == 0
    assert json.loads((tmp_path / "bench-full-scan.json").read_text())["speedup"] > 1


def test_bench_bogus_kernel(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["bench", "--kernel", "bogus", "--d", "8", "--out", str(tmp_path)])
    assert e.value.code == 1


def test_info(capsys, tmp_path):
    assert main(["info", "--d", "384", "--out", str(tmp_path)]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["x"] == 256 and rec["bits_per_plane"] == 512
    assert rec["log10_vertices"] == pytest.approx(181.85, abs=0.01)


def test_generated_file_loads(tmp_path):
    main(["gen", "--n", "4", "--d", "5", "--seed", "9", "--out", str(tmp_path), "--name", "g"])
    data = load_dataset(tmp_path / "g.f32", "raw-f32", 5)
    np.testing.assert_allclose(np.linalg.norm(data.vectors, axis=1), 1, atol=1e-6)
