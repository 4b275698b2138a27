import numpy as np
import pytest

from dkf.cli import run
from dkf.image import PlanarImage, read_y4m, write_y4m


@pytest.fixture()
def fixture_y4m(tmp_path, corpus):
    path = tmp_path / "src.y4m"
    write_y4m(corpus[9][1], path)  # ramp_plus_edge
    return path


def test_encode_decode_metrics_pipeline(tmp_path, fixture_y4m, capsys):
    bs = tmp_path / "out.dkf"
    rec = tmp_path / "rec.y4m"
    assert run(["encode", "-i", str(fixture_y4m), "-o", str(bs), "-q", "32"]) == 0
    assert run(["decode", "-i", str(bs), "-o", str(rec)]) == 0
    assert run(["metrics", "-a", str(fixture_y4m), "-b", str(rec)]) == 0
    out = capsys.readouterr().out
    scores = {line.split(":")[0]: float(line.split(":")[1].split()[0]) for line in out.strip().splitlines()}
    assert scores["psnr"] >= 30.0
    assert 0.0 < scores["ssim"] <= 1.0


def test_encode_flags(tmp_path, fixture_y4m, capsys):
    bs = tmp_path / "out.dkf"
    assert run([
        "encode", "-i", str(fixture_y4m), "-o", str(bs), "-q", "40",
        "--legacy-ec", "--no-dering",
    ]) == 0
    assert run(["info", str(bs)]) == 0
    out = capsys.readouterr().out
    assert "partition: legacy" in out
    assert "dering: False" in out
    assert "width: 192" in out and "height: 128" in out


def test_encode_deterministic_output(tmp_path, fixture_y4m):
    a = tmp_path / "a.dkf"
    b = tmp_path / "b.dkf"
    run(["encode", "-i", str(fixture_y4m), "-o", str(a), "-q", "48"])
    run(["encode", "-i", str(fixture_y4m), "-o", str(b), "-q", "48"])
    assert a.read_bytes() == b.read_bytes()


def test_dering_verb(tmp_path, fixture_y4m):
    out = tmp_path / "filtered.y4m"
    assert run(["dering", "-i", str(fixture_y4m), "-o", str(out), "-T", "6"]) == 0
    img = read_y4m(out)
    src = read_y4m(fixture_y4m)
    assert img.width == src.width and img.height == src.height
    assert not np.array_equal(img.planes[0], src.planes[0])
    # T=0 must be the identity
    out0 = tmp_path / "id.y4m"
    assert run(["dering", "-i", str(fixture_y4m), "-o", str(out0), "-T", "0"]) == 0
    assert read_y4m(out0) == src


def test_rd_sweep_and_bdrate(tmp_path, corpus, capsys):
    corpus_dir = tmp_path / "corpus"
    corpus_dir.mkdir()
    for name, img in corpus[:2]:
        small = PlanarImage(
            img.width, img.height, img.subsampling,
            tuple(p.copy() for p in img.planes),
        )
        write_y4m(small, corpus_dir / f"{name}.y4m")
    out_csv = tmp_path / "r.csv"
    svg = tmp_path / "r.svg"
    code = run([
        "rd-sweep", "--corpus", str(corpus_dir), "--q", "16,48,96,192",
        "--out", str(out_csv), "--svg", str(svg), "--jobs", "2",
    ])
    assert code == 0
    assert out_csv.exists() and svg.exists()
    capsys.readouterr()
    assert run(["bdrate", "--ref", str(out_csv), "--test", str(out_csv), "--metric", "psnr"]) == 0
    assert capsys.readouterr().out.strip() == "0.0%"


def test_bdrate_identical_curve_file(tmp_path, capsys):
    csv = tmp_path / "c.csv"
    csv.write_text("bpp,psnr_hvs\n0.1,30\n0.2,34\n0.4,38\n0.8,42\n")
    assert run(["bdrate", "--ref", str(csv), "--test", str(csv), "--metric", "psnr_hvs"]) == 0
    assert capsys.readouterr().out.strip() == "0.0%"


def test_usage_errors_exit_1(capsys):
    assert run([]) == 1
    assert run(["transcode"]) == 1
    assert run(["encode", "-i", "x.y4m"]) == 1
    assert run(["encode", "-i", "a", "-o", "b", "-q", "10", "--bogus"]) == 1
    assert run(["rd-sweep", "--corpus", "x", "--q", "a,b", "--out", "o.csv"]) == 1
    capsys.readouterr()


def test_data_errors_exit_2(tmp_path, capsys):
    missing = tmp_path / "nope.y4m"
    assert run(["encode", "-i", str(missing), "-o", str(tmp_path / "o.dkf"), "-q", "10"]) == 2
    bad = tmp_path / "bad.dkf"
    bad.write_bytes(b"NOPE" + bytes(20))
    assert run(["decode", "-i", str(bad), "-o", str(tmp_path / "o.y4m")]) == 2
    junk = tmp_path / "junk.y4m"
    junk.write_bytes(b"not a y4m at all\n")
    assert run(["metrics", "-a", str(junk), "-b", str(junk)]) == 2
    capsys.readouterr()


def test_geometry_mismatch_is_data_error(tmp_path, corpus, capsys):
    a = tmp_path / "a.y4m"
    b = tmp_path / "b.y4m"
    write_y4m(corpus[0][1], a)
    write_y4m(PlanarImage.blank(64, 64), b)
    assert run(["metrics", "-a", str(a), "-b", str(b)]) == 2
    capsys.readouterr()


def test_help_exits_zero(capsys):
    assert run(["--help"]) == 0
    capsys.readouterr()
