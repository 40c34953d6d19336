import json

import pytest
from hypothesis import given, strategies as st

from prandtl_lab.cli import (EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_USAGE, EXIT_VIOLATION, ConfigError,
                             GridSection, ModelParams, RunConfig, RunSection, emit_config, load_config, main)

MINIMAL = """
scenario = "standard"
[model]
s = 4
gamma = 1.0
sigma = 2.6
delta = 0.03
eps = 0.1
[grid]
nx = 16
ny = 128
Y = 30.0
dt = 0.001
grading = "exponential"
beta = 4.0
[run]
T_end = 0.03
record_every = 5
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "minimal.toml"
    p.write_text(MINIMAL)
    return p


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    p = d / "minimal.toml"
    p.write_text(MINIMAL)
    assert main(["run", str(p), "-o", str(d / "run")]) == EXIT_OK
    return d / "run"


configs = st.builds(
    RunConfig,
    scenario=st.sampled_from(["standard", "shear"]),
    model=st.builds(lambda s, g, m, d, e, R: ModelParams(s, g, g + 0.5 + m, d, e, R),
                    st.sampled_from([4, 6, 8]), st.floats(1.0, 3.0), st.floats(0.01, 2.0),
                    st.floats(0.001, 0.5), st.floats(0.0, 1.0), st.none() | st.floats(1.0, 50.0)),
    grid=st.builds(GridSection, st.integers(8, 128), st.integers(16, 512), st.floats(2.0, 60.0),
                   st.floats(1e-5, 1e-2), st.just("exponential"), st.floats(0.5, 6.0)),
    run=st.builds(RunSection, st.floats(1e-3, 1.0), st.integers(1, 100), st.sampled_from(["imex_euler", "strang"])),
    sweep=st.just({}) | st.fixed_dictionaries({"eps": st.lists(st.floats(0, 1), min_size=1, max_size=3)}),
)


@given(configs)
def test_config_round_trip(tmp_path_factory, cfg):
    p = tmp_path_factory.mktemp("rt") / "c.toml"
    p.write_text(emit_config(cfg))
    back = load_config(p)
    assert back.to_dict() == cfg.to_dict() and back.content_hash() == cfg.content_hash()


def test_config_rejections(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text(MINIMAL.replace("sigma = 2.6", "sigma = 1.4"))
    with pytest.raises(ConfigError, match="empty"):
        load_config(bad)
    bad.write_text(MINIMAL + "\nfoo = 1\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    assert main(["run", str(bad)]) == EXIT_CONFIG


def test_sigma_rejection_exit(cfg_path, capsys):
    assert main(["run", str(cfg_path), "--sigma", "1.4"]) == EXIT_CONFIG
    assert "class is empty" in capsys.readouterr().err


def test_minimal_run(run_dir):
    m = json.loads((run_dir / "manifest.json").read_text())
    assert m["exit_code"] == 0 and m["verdict"] == "pass" and len(m["config_hash"]) == 64
    assert (run_dir / "trace.csv").exists() and (run_dir / "verdicts" / "monitors.json").exists()
    assert len(list((run_dir / "fields").glob("omega_*.bin"))) == 7


def test_cfl_exit(cfg_path, tmp_path):
    out = tmp_path / "cfl"
    assert main(["run", str(cfg_path), "--dt", "0.05", "-o", str(out)]) == EXIT_SOLVER
    m = json.loads((out / "manifest.json").read_text())
    assert m["error"]["type"] == "UnstableStepError"


def sweep_config(tmp_path, axes):
    p = tmp_path / "sweep.toml"
    p.write_text(MINIMAL.replace("T_end = 0.03", "T_end = 0.02\nsave_fields = false") + "\n[sweep]\n" + axes)
    return p


def test_sweep_two_by_two(tmp_path):
    p = sweep_config(tmp_path, "eps = [0.1, 0.05]\nny = [96, 128]\n")
    out = tmp_path / "sw"
    assert main(["sweep", str(p), "-o", str(out)]) == EXIT_OK
    assert len(list(out.glob("cell_*/manifest.json"))) == 4
    rows = (out / "aggregate.csv").read_text().splitlines()
    assert len(rows) == 5 and all(r.endswith(tuple("0123456789abcdef")) for r in rows[1:])


def test_sweep_failing_cell(tmp_path):
    p = sweep_config(tmp_path, "dt = [0.001, 0.02]\n")  # 0.02 exceeds the advective limit 0.012
    out = tmp_path / "sw"
    assert main(["sweep", str(p), "-o", str(out)]) == EXIT_VIOLATION
    text = (out / "aggregate.csv").read_text()
    assert "failed" in text and ",ok," in text


def test_sweep_replay(tmp_path):
    p = sweep_config(tmp_path, "eps = [0.1, 0.05]\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", str(p), "-o", str(a)]) == main(["sweep", str(p), "-o", str(b)]) == EXIT_OK
    assert (a / "aggregate.csv").read_bytes() == (b / "aggregate.csv").read_bytes()
    for cell in ("cell_000", "cell_001"):
        assert (a / cell / "trace.csv").read_bytes() == (b / cell / "trace.csv").read_bytes()


def test_unknown_suite(run_dir):
    with pytest.raises(SystemExit) as e:
        main(["verify", str(run_dir), "bogus"])
    assert e.value.code == EXIT_USAGE


def test_missing_run_dir(tmp_path):
    assert main(["verify", str(tmp_path / "nope"), "monitors"]) == 74


def test_monitors_on_truncated_run(cfg_path, tmp_path):
    out = tmp_path / "short"
    assert main(["run", str(cfg_path), "--T", "0.01", "-o", str(out)]) == EXIT_OK
    assert main(["verify", str(out), "monitors"]) == EXIT_OK
    v = json.loads((out / "verdicts" / "monitors.json").read_text())
    assert v and all(x["status"] == "insufficient trace" for x in v.values())


def test_monitors_suite(run_dir):
    assert main(["verify", str(run_dir), "monitors"]) == EXIT_OK


def test_inequalities_suite(run_dir):
    assert main(["verify", str(run_dir), "inequalities"]) == EXIT_OK
    v = json.loads((run_dir / "verdicts" / "inequalities.json").read_text())
    assert v["status"] == "pass"


def test_compare_command(run_dir):
    assert main(["compare", str(run_dir), "--T-end", "0.02"]) == EXIT_OK
    v = json.loads((run_dir / "verdicts" / "compare.json").read_text())
    assert v["validation_ratio"] <= 1.0 and v["aborted"] is None
