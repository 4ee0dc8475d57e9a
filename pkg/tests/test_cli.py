import os

import numpy as np
import pytest

from fracvar.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    RunConfig,
    build_config,
    main,
    parse_config_file,
    validate_config,
)
from fracvar.mesh import GridFunction, Mesh1D


def run_cli(args):
    return main(args)


def test_parse_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("s = 0.6\nq=3.5  # comment\n\n# full-line comment\nn_elem=32\n")
    pairs = parse_config_file(str(cfg))
    assert pairs == {"s": "0.6", "q": "3.5", "n_elem": "32"}


def test_parse_config_rejects_garbage(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("not a pair\n")
    with pytest.raises(ValueError):
        parse_config_file(str(cfg))


def test_build_config_rejects_unknown_key():
    with pytest.raises(ValueError, match="unknown config key"):
        build_config({"zeta": "1"}, {})


def test_overrides_beat_file():
    cfg = build_config({"s": "0.4", "lambda": "0.3"}, {"s": "0.7"})
    assert cfg.s == 0.7 and cfg.lam == 0.3


def test_validate_consistent_config_empty_diagnostics():
    cfg = build_config({}, {"problem": "validate", "q": "4", "lambda": "0.05"})
    errors, warns = validate_config(cfg)
    assert errors == [] and warns == []


def test_validate_flags_lambda_zero():
    cfg = build_config({}, {"problem": "validate", "lambda": "0"})
    errors, _ = validate_config(cfg)
    assert any("lambda > 0" in e for e in errors)


def test_validate_flags_cap_boundary():
    # perturbed instances have combined cap 2 = (q/p)^(1/4) exactly at q = 32, p = 2
    cfg = build_config({}, {"problem": "validate", "phi": "perturbed",
                            "kernel": "perturbed", "tail_mode": "graded-numeric",
                            "s": "0.9", "q": "32", "lambda": "0.05"})
    errors, _ = validate_config(cfg)
    assert any("ellipticity cap" in e for e in errors)
    # just inside the boundary: warning instead of error
    cfg2 = build_config({}, {"problem": "validate", "phi": "perturbed",
                             "kernel": "perturbed", "tail_mode": "graded-numeric",
                             "s": "0.9", "q": "35", "lambda": "0.05"})
    errors2, warns2 = validate_config(cfg2)
    assert errors2 == []
    assert any("within 10%" in w for w in warns2)


def test_cli_exit_code_for_bad_exponents(tmp_path, capsys):
    code = run_cli(["validate", "--q", "1.5", "--outdir", str(tmp_path / "o")])
    assert code == EXIT_CONFIG
    out = capsys.readouterr().out
    assert "q must" in out or "exceed 2" in out


def test_cli_q_below_p_names_constraint(tmp_path, capsys):
    code = run_cli(["sphere-min", "--q", "3", "--p", "3.5", "--s", "0.9",
                    "--outdir", str(tmp_path / "o")])
    assert code == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "q must lie in (p, p_s^*)" in err


def test_cli_check_kernel(tmp_path):
    out = tmp_path / "ck"
    assert run_cli(["check-kernel", "--outdir", str(out)]) == EXIT_OK
    text = (out / "check_kernel.csv").read_text()
    assert text.startswith("# schema=1")
    assert "phi," in text and "kernel," in text


def test_cli_geometry_emits_profile(tmp_path):
    out = tmp_path / "geom"
    code = run_cli(["geometry", "--source", "sin", "--amplitude", "0.1",
                    "--q", "4", "--lambda", "0.01", "--n_elem", "16",
                    "--outdir", str(out)])
    assert code == EXIT_OK
    geo = (out / "geometry.csv").read_text().splitlines()
    assert geo[0] == "# schema=1"
    keys = {ln.split(",")[0] for ln in geo[2:]}
    assert {"lambda1", "r0", "c4", "c5"} <= keys
    prof = (out / "F_profile.csv").read_text().splitlines()
    assert prof[1] == "r,F"
    assert len(prof) == 2 + 201


def test_cli_sphere_min_run(tmp_path):
    out = tmp_path / "sph"
    code = run_cli(["sphere-min", "--q", "3", "--lambda", "1.0",
                    "--n_elem", "16", "--tol", "1e-8",
                    "--outdir", str(out)])
    assert code == EXIT_OK
    summary = (out / "summary.txt").read_text().strip().split(",")
    assert summary[0] == "true"
    assert float(summary[2]) <= 1e-8
    echo = (out / "config_echo.txt").read_text()
    assert "n_elem=16" in echo and "seed=0" in echo
    sol = (out / "solution.csv").read_text().splitlines()
    assert sol[0] == "# schema=1"
    assert sol[1] == "# mesh a=0.0 b=1.0 n=16"
    assert len(sol) == 3 + 17
    trace = (out / "trace.csv").read_text().splitlines()
    assert trace[1] == "iter,energy,residual,norm_W,norm_q"


def test_cli_capacity_run(tmp_path):
    out = tmp_path / "cap"
    code = run_cli(["capacity", "--q", "2", "--n_elem", "32",
                    "--capacity_set", "0.45:0.55|0.4:0.6",
                    "--outdir", str(out)])
    assert code == EXIT_OK
    rows = (out / "capacity.csv").read_text().splitlines()
    assert rows[1] == "set_description,q,s,n_elem,capacity_upper_bound"
    assert len(rows) == 4
    v1 = float(rows[2].rsplit(",", 1)[1])
    v2 = float(rows[3].rsplit(",", 1)[1])
    assert v1 <= v2


def test_cli_source_file_roundtrip(tmp_path):
    mesh = Mesh1D(0.0, 1.0, 16)
    src = GridFunction.from_callable(mesh, lambda x: 0.05 * np.sin(np.pi * x))
    fpath = tmp_path / "src.csv"
    src.to_csv(fpath)
    out = tmp_path / "run"
    code = run_cli(["sphere-min", "--q", "3", "--lambda", "1.0",
                    "--n_elem", "16", "--tol", "1e-8",
                    "--source", "file", "--source_file", str(fpath),
                    "--outdir", str(out)])
    assert code == EXIT_OK


def test_cli_rerun_bitwise_identical(tmp_path):
    args = ["sphere-min", "--q", "3", "--lambda", "1.0", "--n_elem", "16",
            "--tol", "1e-8", "--seed", "0"]
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert run_cli(args + ["--outdir", str(out)]) == EXIT_OK
        outs.append(out)
    for fname in ("solution.csv", "trace.csv", "summary.txt"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_cli_thread_count_does_not_change_bytes(tmp_path):
    args = ["sphere-min", "--q", "3", "--lambda", "1.0", "--n_elem", "16",
            "--tol", "1e-8"]
    outs = []
    for name, threads in (("t1", "1"), ("t4", "4")):
        out = tmp_path / name
        old = os.environ.get("FRACVAR_THREADS")
        os.environ["FRACVAR_THREADS"] = threads
        try:
            assert run_cli(args + ["--outdir", str(out)]) == EXIT_OK
        finally:
            if old is None:
                os.environ.pop("FRACVAR_THREADS", None)
            else:
                os.environ["FRACVAR_THREADS"] = old
        outs.append(out)
    for fname in ("solution.csv", "trace.csv", "summary.txt"):
        assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()


def test_runconfig_echo_covers_all_keys():
    keys = dict(RunConfig().items())
    assert "lambda" in keys and "lam" not in keys
    assert "problem" in keys and "outdir" in keys
