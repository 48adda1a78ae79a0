from __future__ import annotations

import csv

import pytest

from linempc.chain import InputVector, Parameters, parse_input, write_input_file
from linempc.cli import ConfigError, main, parse_config

from conftest import ref_oracle_word, ref_walk

SEED1 = "00" * 31 + "01"
GOLDEN = {"line": "63af1f", "simline": "7ff345"}  # n=24 v=8 w=16 u=8, X=0123456789abcdef


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_config():
    cfg = parse_config("# comment\nn = 24\n\n v=8 # trailing\nstrategy = segment, token\n")
    assert cfg == {"n": "24", "v": "8", "strategy": "segment, token"}
    with pytest.raises(ConfigError):
        parse_config("just words")
    with pytest.raises(ConfigError):
        parse_config("= 3")


@pytest.mark.parametrize("func", ["line", "simline"])
def test_eval_golden(tmp_path, capsys, func):
    params = write(tmp_path, "p.txt", "n = 24\nv = 8\nw = 16\nu = 8\n")
    trace = tmp_path / "t.csv"
    rc = main(["eval-ram", "--params", params, "--seed", SEED1, "--input", "hex:0123456789abcdef",
               "--func", func, "--trace", str(trace)])
    assert rc == 0
    out = capsys.readouterr().out.strip()
    assert out == GOLDEN[func]
    # The golden agrees with the independent walker and reference oracle.
    X = parse_input("0123456789abcdef", Parameters(n=24, v=8, w=16, u=8))
    seed = bytes.fromhex(SEED1)
    ref, _ = ref_walk(func, 24, 8, 8, 16, X.blocks, lambda x: ref_oracle_word(seed, x, 24))
    assert format(ref, "06x") == out
    lines = trace.read_text().splitlines()
    assert lines[0] == "i,ell,r_hex,z_hex,query_hex,answer_hex" and len(lines) == 18


def test_eval_input_file(tmp_path, capsys):
    params = write(tmp_path, "p.txt", "n = 24\nv = 8\nw = 16\nu = 8\n")
    X = parse_input("0123456789abcdef", Parameters(n=24, v=8, w=16, u=8))
    path = tmp_path / "x.bin"
    write_input_file(path, X)
    assert main(["eval-ram", "--params", params, "--seed", SEED1, "--input", str(path)]) == 0
    assert capsys.readouterr().out.strip() == GOLDEN["line"]
    write_input_file(path, InputVector((1, 2), 8))
    assert main(["eval-ram", "--params", params, "--seed", SEED1, "--input", str(path)]) == 2


def test_run_zero_rounds(tmp_path, capsys):
    params = write(tmp_path, "p.txt", "n = 24\nv = 8\nw = 16\nu = 8\nm = 2\nq = 16\ns = 200\n")
    report = tmp_path / "r.csv"
    rc = main(["run-mpc", "--params", params, "--seed", SEED1, "--strategy", "token", "--rounds", "0",
               "--report", str(report)])
    assert rc == 0
    assert "success=false rounds_used=0" in capsys.readouterr().out
    assert report.read_text() == ("round,machine,queries_issued,new_correct_entries,"
                                  "messages_out_bits,output_claimed\n")


def test_run_success(tmp_path, capsys):
    params = write(tmp_path, "p.txt", "n = 12\nv = 4\nw = 8\nu = 4\nm = 2\nq = 2\nblocks_per_machine = 2\ns = 29\n")
    assert main(["run-mpc", "--params", params, "--strategy", "segment", "--rounds", "10"]) == 0
    assert "success=true rounds_used=5" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["eval-ram"],                                    # no parameters at all
    ["eval-ram", "--seed", "xyz", "--params", "P"],  # bad seed
    ["decay", "--trials", "10"],                     # too few trials
    ["compress-check", "--scheme", "enum", "--params", "SIM"],
    ["jump", "--params", "BADWIN"],
    ["nonsense"],
    ["sweep", "--jobs", "0"],
])
def test_config_errors(tmp_path, argv):
    files = {"P": "n = 24\nv = 8\nw = 16\nu = 8\n", "SIM": "func = simline\n",
             "BADWIN": "guess_window = 40\n"}
    argv = [str(write(tmp_path, a, files[a])) if a in files else a for a in argv]
    assert main(argv) == 2


def test_sweep_assertion_failure(tmp_path):
    params = write(tmp_path, "s.txt", "strategy = segment\nn = 12\nu = 4\nv = 4\nw = 8\nm = 2\nrounds = 2\n")
    assert main(["sweep", "--params", params, "--trials", "1", "--out", str(tmp_path / "o.csv")]) == 1


def test_sweep_invalid_cell_has_reason(tmp_path):
    params = write(tmp_path, "s.txt", "strategy = segment\nn = 12\nu = 4,7\nv = 4\nw = 8\nm = 2\n")
    out = tmp_path / "o.csv"
    assert main(["sweep", "--params", params, "--trials", "2", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 3
    assert rows[1].endswith(",") and "exceeds" in rows[2]


def test_sweep_closed_form_column(tmp_path):
    params = write(tmp_path, "s.txt", "strategy = segment\nn = 12\nu = 4\nv = 4,8\nw = 5,16\nm = 1,2,4\n")
    out = tmp_path / "o.csv"
    assert main(["sweep", "--params", params, "--trials", "2", "--out", str(out)]) == 0

    for row in csv.DictReader(out.open()):
        if row["reason"]:
            continue
        assert row["mean_rounds"] == row["closed_form"]
        assert int(row["closed_form"]) == -(-int(row["w"]) // int(row["b"])) + 1


def test_decay_rows(tmp_path):
    out = tmp_path / "d.csv"
    params = write(tmp_path, "d.txt", "n = 24\nv = 8\nw = 12\nu = 8\nq = 12\nblocks_per_machine = 8\nj_max = 12\n")
    assert main(["decay", "--params", params, "--trials", "1000", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()[1:]
    assert len(rows) == 13
    assert all(r.split(",")[1] == "1" for r in rows)


SUBCOMMANDS = {
    "eval": ["eval-ram", "--input", "random", "--out", "{out}"],
    "run": ["run-mpc", "--strategy", "token", "--rounds", "30", "--out", "{out}"],
    "sweep": ["sweep", "--trials", "2", "--out", "{out}"],
    "decay": ["decay", "--trials", "1000", "--out", "{out}"],
    "jump": ["jump", "--trials", "40", "--out", "{out}"],
    "warm": ["compress-check", "--scheme", "warmup", "--trials", "3", "--csv", "{out}"],
    "enum": ["compress-check", "--scheme", "enum", "--trials", "3", "--csv", "{out}"],
}
CONFIGS = {
    "eval": "n = 24\nv = 8\nw = 16\nu = 8\n",
    "run": "n = 24\nv = 8\nw = 16\nu = 8\nm = 2\nq = 16\ns = 200\n",
    "sweep": "strategy = segment, token\nn = 24\nu = 8\nv = 4,8\nw = 8\nm = 2\ns = 200\nq = 16\n",
    "decay": "n = 24\nv = 8\nw = 16\nu = 8\nq = 16\n",
    "jump": "n = 12\nv = 8\nw = 16\nu = 4\n",
    "warm": "",
    "enum": "",
}


@pytest.mark.parametrize("name", sorted(SUBCOMMANDS))
def test_deterministic_and_job_independent(tmp_path, name):
    params = write(tmp_path, "c.txt", CONFIGS[name])
    outputs = []
    for attempt, jobs in enumerate(("1", "1", "2")):
        out = tmp_path / f"{attempt}.csv"
        argv = [a.format(out=out) for a in SUBCOMMANDS[name]]
        rc = main(argv + ["--params", params, "--seed", SEED1, "--jobs", jobs])
        assert rc == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
    assert b"\r" not in outputs[0]
