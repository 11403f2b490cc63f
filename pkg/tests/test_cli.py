import csv

from fbsde_lab.cli import EXIT_OK, EXIT_USAGE, OUT_ENV, SECTIONS, main

SMALL = """
preset = "{preset}"
[mc]
n_paths = {n_paths}
steps = {steps}
{extra}
"""


def write_config(tmp_path, preset="benchmark:linear", n_paths=4000, steps=10, extra="", name="c.toml"):
    p = tmp_path / name
    p.write_text(SMALL.format(preset=preset, n_paths=n_paths, steps=steps, extra=extra))
    return str(p)


def sections(path):
    text = path.read_text()
    return [line[1:-1] for line in text.splitlines() if line.startswith("[")], text


def test_zero_paths_is_usage_error(tmp_path, capsys):
    cfg = write_config(tmp_path, n_paths=0)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert "n_paths" in capsys.readouterr().err


def test_unknown_key_is_usage_error(tmp_path, capsys):
    cfg = write_config(tmp_path, extra="[basis]\nbins = 3\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_USAGE
    assert "bins" in capsys.readouterr().err


def test_bad_command_is_usage_error(tmp_path):
    assert main(["frobnicate"]) == EXIT_USAGE


def test_solve_is_deterministic(tmp_path):
    cfg = write_config(tmp_path)
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        assert main(["solve", "--config", cfg, "--out", str(o)]) == EXIT_OK
    names = sorted(p.name for p in outs[0].iterdir())
    assert names == sorted(p.name for p in outs[1].iterdir())
    for name in names:
        if name != "timings.txt":
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name


def test_summary_sections_and_na(tmp_path):
    cfg = write_config(tmp_path, steps=8)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o"), "--seed", "17"]) == EXIT_OK
    found, text = sections(tmp_path / "o" / "summary.txt")
    assert found == list(SECTIONS)
    assert "seed 17" in text
    assert "[audit]\nn/a" in text and "[application]\nn/a" in text
    assert "y_bound n/a" in text


def test_nonconverged_picard_still_exit_zero(tmp_path):
    extra = "[picard]\nmax_iters = 1\ntol = 1e-12\n"
    cfg = write_config(tmp_path, preset="benchmark:riccati", extra=extra)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    assert "converged false" in (tmp_path / "o" / "summary.txt").read_text()


def test_csv_round_trip(tmp_path):
    cfg = write_config(tmp_path, extra="[export]\npaths = 3\nfield = true\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    for name in ("solution.csv", "paths.csv", "field.csv"):
        raw = (tmp_path / "o" / name).read_bytes()
        assert b"\r" not in raw
        rows = list(csv.reader(raw.decode().splitlines()))
        header, body = rows[0], rows[1:]
        assert body and all(len(r) == len(header) for r in body)
        for r in body[:200]:
            for cell in r:
                v = float(cell)
                assert float(repr(v)) == v and float(format(v, ".17g")) == v
    paths = list(csv.reader((tmp_path / "o" / "paths.csv").read_text().splitlines()))
    assert paths[0][:3] == ["path", "step", "time"] and len(paths) == 1 + 3 * 11


def test_out_env_override(tmp_path, monkeypatch):
    cfg = write_config(tmp_path)
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env_out"))
    assert main(["solve", "--config", cfg]) == EXIT_OK
    assert (tmp_path / "env_out" / "summary.txt").exists()


def test_output_path_is_a_file(tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    cfg = write_config(tmp_path)
    assert main(["solve", "--config", cfg, "--out", str(blocker / "sub")]) == EXIT_USAGE
    assert "cli" in capsys.readouterr().err


def test_preset_mismatch(tmp_path):
    cfg = write_config(tmp_path, preset="benchmark:linear")
    assert main(["carbon", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_audit_command(tmp_path):
    cfg = write_config(tmp_path, preset="carbon")
    assert main(["audit", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    text = (tmp_path / "o" / "summary.txt").read_text()
    assert "B1: numerically-supported" in text
    assert (tmp_path / "o" / "audit.csv").exists()


def test_carbon_summary_range_line(tmp_path):
    cfg = write_config(tmp_path, preset="carbon", n_paths=20_000, steps=20)
    assert main(["carbon", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    text = (tmp_path / "o" / "summary.txt").read_text()
    line = next(ln for ln in text.splitlines() if ln.startswith("Y0 ∈ [0, λ]"))
    assert line.endswith("pass")
    header = (tmp_path / "o" / "carbon.csv").read_text().splitlines()[0]
    assert "mean_xi1" in header and "mean_xi2" in header
