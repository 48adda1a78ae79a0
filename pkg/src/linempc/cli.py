"""Command-line experiment driver: every subcommand writes a deterministic CSV.

Config files are flat ``key = value`` text (``#`` starts a comment); integers
are decimal, seeds hex, lists comma-separated. Per-row sub-seeds are derived
from the master seed and the row index, and every row records its sub-seed.

Exit codes: 0 success, 1 an experiment assertion failed, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import math
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence

from .bits import FormatError
from .chain import FUNCS, InputVector, ParameterError, Parameters, parse_input, read_input_file
from .compression import (
    EncodingBlob,
    MachineRound,
    NoIntersection,
    PreconditionFailed,
    compute_reachable_set,
    decode_enumerative,
    decode_warmup,
    encode_enumerative,
    encode_warmup,
    enumerative_bound,
    warmup_bound,
)
from .mpc_engine import run, tape_for
from .oracle import Oracle, OracleError, derive_seed, parse_seed
from .ram_eval import evaluate, trace_rows
from .strategies import (
    SegmentStrategy,
    greedy_probe_trials,
    jump_trials,
    make_strategy,
    segment_memory,
    tail_rows,
)

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG = 0, 1, 2
PARAM_KEYS = ("n", "v", "w", "u", "m", "s", "q", "d")
DEFAULT_SEED = "00" * 32


class ConfigError(ValueError):
    pass


# ----------------------------------------------------------------------------
# config


def parse_config(text: str) -> dict[str, str]:
    config: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        config[key] = value
    return config


def load_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def get_int(config: dict[str, str], key: str, default: int | None = None) -> int | None:
    if key not in config:
        return default
    try:
        return int(config[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be a decimal integer, got {config[key]!r}") from exc


def get_list(config: dict[str, str], key: str, default: Sequence[str]) -> list[str]:
    if key not in config:
        return list(default)
    return [item.strip() for item in config[key].split(",") if item.strip()]


def params_from(config: dict[str, str], **defaults: int) -> Parameters:
    values = {k: get_int(config, k, defaults.get(k)) for k in PARAM_KEYS}
    missing = [k for k in ("n", "v", "w") if values[k] is None]
    if missing:
        raise ConfigError(f"missing parameter(s): {', '.join(missing)}")
    return Parameters(**{k: val for k, val in values.items() if val is not None})


def master_seed(args, config: dict[str, str]) -> bytes:
    text = args.seed or config.get("seed") or DEFAULT_SEED
    try:
        return parse_seed(text)
    except (OracleError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def get_func(config: dict[str, str], default: str) -> str:
    func = config.get("func", default)
    if func not in FUNCS:
        raise ConfigError(f"func must be one of {FUNCS}, got {func!r}")
    return func


# ----------------------------------------------------------------------------
# output


def write_csv(rows: Iterable[dict], columns: Sequence[str], path: str | None) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    data = buf.getvalue()
    if path is None or path == "-":
        sys.stdout.write(data)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)


def run_jobs(fn: Callable, jobs: Sequence[tuple], workers: int) -> list:
    """Run independent row jobs; results come back in row order."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def fmt_float(x: float) -> str:
    return format(x, ".6g")


# ----------------------------------------------------------------------------
# eval-ram


def cmd_eval(args, config) -> int:
    p = params_from(config)
    func = args.func or get_func(config, "line")
    p.validate(func)
    seed = master_seed(args, config)
    oracle = Oracle(p.n, seed, mode=config.get("oracle_mode", "lazy"))
    X = load_input(args.input, p, seed)
    answer, _ = evaluate(func, p, oracle, X)
    hexw = (p.n + 3) // 4
    print(format(answer, f"0{hexw}x"))
    if args.trace:
        cols = ("i", "ell", "r_hex", "z_hex", "query_hex", "answer_hex")
        write_csv(trace_rows(func, p, oracle, X), cols, args.trace)
    if args.out:
        row = {"func": func, **p.as_dict(), "seed": seed.hex(), "input_hex": X.to_hex(),
               "output_hex": format(answer, f"0{hexw}x")}
        write_csv([row], list(row), args.out)
    return EXIT_OK


def load_input(source: str | None, p: Parameters, seed: bytes) -> InputVector:
    if source is None or source == "random":
        return InputVector.random(p, random.Random(derive_seed(seed, "input")))
    if source.startswith("hex:"):
        X = parse_input(source[4:], p)
    else:
        try:
            X = read_input_file(source)
        except OSError as exc:
            raise ConfigError(f"cannot read input {source}: {exc}") from exc
    if X.v != p.v or X.u != p.u:
        raise ConfigError(f"input has v={X.v}, u={X.u}; parameters say v={p.v}, u={p.u}")
    return X


# ----------------------------------------------------------------------------
# run-mpc


def cmd_run(args, config) -> int:
    p = params_from(config)
    func = get_func(config, "line" if args.strategy != "segment" else "simline")
    p.validate(func)
    seed = master_seed(args, config)
    oracle = Oracle(p.n, seed, mode=config.get("oracle_mode", "lazy"))
    X = load_input(args.input, p, seed)
    tape = tape_for(oracle, None)
    strategy = make_strategy(args.strategy, p, {**config, "func": func}, tape)
    rounds = args.rounds if args.rounds is not None else get_int(config, "rounds", p.w + 2)
    report = run(p, strategy, X, oracle, rounds, func=func)
    print(f"success={str(report.success).lower()} rounds_used={report.rounds_used} "
          f"violations={len(report.violations)}")
    for v in report.violations:
        print(f"violation round={v.round} machine={v.machine} kind={v.kind}: {v.detail}", file=sys.stderr)
    cols = ("round", "machine", "queries_issued", "new_correct_entries", "messages_out_bits", "output_claimed")
    write_csv(report.rows(), cols, args.report or args.out)
    return EXIT_OK


# ----------------------------------------------------------------------------
# sweep


SWEEP_COLUMNS = ("row", "sub_seed", "strategy", "n", "v", "w", "u", "m", "s", "q", "b", "trials",
                 "mean_rounds", "success_rate", "closed_form", "reason")


def _sweep_row(row: int, sub: bytes, cell: dict, trials: int, rounds: int | None) -> dict:
    out = dict.fromkeys(SWEEP_COLUMNS, "")
    out.update(cell, row=row, sub_seed=sub.hex(), trials=trials)
    name = cell["strategy"]
    func = "simline" if name == "segment" else "line"
    try:
        p = Parameters(**{k: cell[k] for k in ("n", "v", "w", "u", "m", "s", "q")})
        p.validate(func)
        config = {}
        if cell.get("b"):
            config["blocks_per_machine"] = str(cell["b"])
        budget = rounds if rounds is not None else p.w + 2
        total_rounds = successes = 0
        closed = None
        for t in range(trials):
            tsub = derive_seed(sub, t)
            oracle = Oracle(p.n, tsub)
            X = InputVector.random(p, random.Random(tsub))
            strategy = make_strategy(name, p, config, tape_for(oracle, None))
            if isinstance(strategy, SegmentStrategy):
                closed = strategy.closed_form_rounds()
            report = run(p, strategy, X, oracle, budget, func=func)
            successes += report.success
            total_rounds += report.rounds_used
    except (ParameterError, ValueError) as exc:
        out["reason"] = str(exc).replace("\n", " ")
        return out
    out["mean_rounds"] = fmt_float(total_rounds / trials)
    out["success_rate"] = fmt_float(successes / trials)
    out["closed_form"] = "" if closed is None else closed
    return out


def sweep_cells(config: dict[str, str]) -> list[dict]:
    grid = {
        "strategy": get_list(config, "strategy", ["segment"]),
        "n": get_list(config, "n", ["24"]),
        "v": get_list(config, "v", ["8"]),
        "w": get_list(config, "w", ["16"]),
        "u": get_list(config, "u", ["8"]),
        "m": get_list(config, "m", ["2"]),
        "s": get_list(config, "s", ["auto"]),
        "q": get_list(config, "q", ["auto"]),
        "b": get_list(config, "blocks_per_machine", ["auto"]),
    }
    cells = []
    for combo in itertools.product(*grid.values()):
        cell = dict(zip(grid, combo))
        try:
            for key in ("n", "v", "w", "u", "m"):
                cell[key] = int(cell[key])
            v, m = cell["v"], cell["m"]
            b = max(1, math.ceil(v / m)) if cell["b"] == "auto" else int(cell["b"])
            probe = Parameters(n=cell["n"], v=v, w=cell["w"], u=cell["u"], m=m)
            cell["b"] = b
            cell["s"] = segment_memory(probe, b) if cell["s"] == "auto" else int(cell["s"])
            cell["q"] = max(b, cell["w"]) if cell["q"] == "auto" else int(cell["q"])
        except ValueError as exc:
            raise ConfigError(f"bad sweep value: {exc}") from exc
        cells.append(cell)
    return cells


def cmd_sweep(args, config) -> int:
    seed = master_seed(args, config)
    trials = args.trials or get_int(config, "trials", 4)
    rounds = get_int(config, "rounds")
    cells = sweep_cells(config)
    jobs = [(row, derive_seed(seed, row), cell, trials, rounds) for row, cell in enumerate(cells)]
    rows = run_jobs(_sweep_row, jobs, args.jobs)
    write_csv(rows, SWEEP_COLUMNS, args.out)
    # The segment strategy must hit its closed form in every valid cell.
    bad = [r for r in rows if r["closed_form"] != "" and
           (r["mean_rounds"] != fmt_float(r["closed_form"]) or r["success_rate"] != "1")]
    for r in bad:
        print(f"row {r['row']}: rounds {r['mean_rounds']} != closed form {r['closed_form']}", file=sys.stderr)
    return EXIT_ASSERT if bad else EXIT_OK


# ----------------------------------------------------------------------------
# decay


DECAY_COLUMNS = ("j", "empirical", "rho_j", "sigma", "z", "trials", "seed")


def _decay_batch(p: Parameters, b: int, trials: int, sub: bytes) -> list[int]:
    return greedy_probe_trials(p, b, trials, sub)


def _batches(total: int, count: int) -> list[int]:
    count = max(1, min(count, total))
    base, extra = divmod(total, count)
    return [base + (i < extra) for i in range(count)]


def cmd_decay(args, config) -> int:
    p = params_from(config, n=24, v=8, w=32, u=8, q=32)
    p.validate("line")
    seed = master_seed(args, config)
    trials = args.trials or get_int(config, "trials", 1000)
    if trials < 1000:
        raise ConfigError("decay needs at least 1000 trials")
    b = get_int(config, "blocks_per_machine", max(1, p.v // 2))
    if not 1 <= b <= p.v:
        raise ConfigError(f"blocks_per_machine must be in 1..{p.v}")
    j_max = get_int(config, "j_max", 8)
    batches = _batches(trials, get_int(config, "batches", 8))
    jobs = [(p, b, n_b, derive_seed(seed, row)) for row, n_b in enumerate(batches)]
    ks = [k for part in run_jobs(_decay_batch, jobs, args.jobs) for k in part]
    rho = b / p.v
    rows = [{"j": r.j, "empirical": fmt_float(r.empirical), "rho_j": fmt_float(r.expected),
             "sigma": fmt_float(r.sigma), "z": fmt_float(r.z), "trials": trials, "seed": seed.hex()}
            for r in tail_rows(ks, rho, j_max)]
    write_csv(rows, DECAY_COLUMNS, args.out)
    limit = float(config.get("z_limit", "inf"))
    return EXIT_ASSERT if any(abs(float(r["z"])) > limit for r in rows) else EXIT_OK


# ----------------------------------------------------------------------------
# jump


JUMP_COLUMNS = ("batch", "sub_seed", "trials", "guesses", "hits", "rate", "expected_rate", "z")


def _jump_batch(p: Parameters, trials: int, guesses: int, window: int, sub: bytes, func: str,
                frontier: int):
    stats = jump_trials(p, trials, guesses, window, sub, func, frontier)
    return stats.hits


def cmd_jump(args, config) -> int:
    func = get_func(config, "simline")
    p = params_from(config, n=12, v=8, w=16, u=4)
    p.validate(func)
    seed = master_seed(args, config)
    trials = args.trials or get_int(config, "trials", 1000)
    guesses = get_int(config, "guesses", 64)
    window = get_int(config, "guess_window", 4)
    frontier = get_int(config, "frontier", 1)
    if frontier < 1 or frontier + window > p.w:
        raise ConfigError("need 1 <= frontier and frontier + guess_window <= w")
    batches = _batches(trials, get_int(config, "batches", 8))
    subs = [derive_seed(seed, row) for row in range(len(batches))]
    jobs = [(p, n_b, guesses, window, sub, func, frontier) for n_b, sub in zip(batches, subs)]
    hits = run_jobs(_jump_batch, jobs, args.jobs)
    rate = 2.0 ** -p.u

    def row(batch, sub, n_b, h):
        total = n_b * guesses
        sigma = math.sqrt(rate * (1 - rate) / total)
        return {"batch": batch, "sub_seed": sub, "trials": n_b, "guesses": total, "hits": h,
                "rate": fmt_float(h / total), "expected_rate": fmt_float(rate),
                "z": fmt_float((h / total - rate) / sigma)}

    rows = [row(i, sub.hex(), n_b, h) for i, (sub, n_b, h) in enumerate(zip(subs, batches, hits))]
    rows.append(row("all", seed.hex(), trials, sum(hits)))
    write_csv(rows, JUMP_COLUMNS, args.out)
    limit = float(config.get("z_limit", "inf"))
    return EXIT_ASSERT if abs(float(rows[-1]["z"])) > limit else EXIT_OK


# ----------------------------------------------------------------------------
# compress-check


COMPRESS_COLUMNS = ("trial", "sub_seed", "status", "intersect_size", "blob_bits", "payload_bits",
                    "bound_bits", "pass")


def _active_machine(report, k: int, m: int) -> int:
    for i in range(m):
        if report.queries.get((k, i)):
            return i
    return 0


def compress_trial(scheme: str, p: Parameters, func: str, strategy_name: str, config: dict,
                   k: int, alpha: int, trial: int, sub: bytes) -> dict:
    row = {"trial": trial, "sub_seed": sub.hex(), "status": "ok", "intersect_size": "",
           "blob_bits": "", "payload_bits": "", "bound_bits": "", "pass": ""}
    oracle = Oracle(p.n, sub, mode="eager")
    X = InputVector.random(p, random.Random(sub))
    tape_seed = derive_seed(sub, "tape")
    strategy = make_strategy(strategy_name, p, config, tape_for(oracle, tape_seed))
    report = run(p, strategy, X, oracle, k + 1, func=func, tape_seed=tape_seed)
    machine = get_int(config, "machine", _active_machine(report, k, p.m))
    ctx = MachineRound(p, strategy, machine, k, func, tape_seed)
    try:
        if scheme == "warmup":
            enc = encode_warmup(oracle, X, ctx, alpha)
            blob = EncodingBlob.from_bytes(enc.blob.to_bytes())
            dec = decode_warmup(blob, ctx, p.n)
            size, bound = enc.intersect, warmup_bound(p, enc.intersect)
            replay_ok = dec.replays == [enc.queries]
            sound = True
        else:
            enc = encode_enumerative(oracle, X, ctx)
            reach = compute_reachable_set(oracle, X, ctx)
            blob = EncodingBlob.from_bytes(enc.blob.to_bytes())
            dec = decode_enumerative(blob, ctx, p.n)
            size, bound = len(reach.members), enumerative_bound(p, len(reach.members))
            replay_ok = dec.replays == [enc.replays[seq] for seq in dec.sequences]
            sound = {a for _, _, a in enc.recovered} <= reach.members
    except (NoIntersection, PreconditionFailed) as exc:
        row["status"] = "excluded: " + str(exc)
        return row
    roundtrip = dec.X == X and bool((dec.table == oracle.dump_table()).all())
    ok = roundtrip and replay_ok and sound and enc.blob.payload_bits <= bound
    row.update({"intersect_size": size, "blob_bits": enc.blob.total_bits,
                "payload_bits": enc.blob.payload_bits, "bound_bits": bound, "pass": int(ok)})
    return row


def cmd_compress(args, config) -> int:
    scheme = args.scheme
    func = get_func(config, "simline" if scheme == "warmup" else "line")
    if scheme == "enum" and func != "line":
        raise ConfigError("the enumerative codec runs on Line")
    defaults = dict(n=12, v=8, w=16, u=4, q=8, m=2) if scheme == "warmup" else \
        dict(n=14, v=4, w=16, u=4, q=8, m=2, s=60)
    p = params_from(config, **defaults)
    strategy_name = config.get("strategy", "segment" if scheme == "warmup" else "token")
    strat_config = dict(config)
    if strategy_name == "segment" and get_int(config, "s") is None:
        b = get_int(config, "blocks_per_machine", max(1, math.ceil(p.v / p.m)))
        strat_config["blocks_per_machine"] = str(b)
        p = p.with_(s=segment_memory(p, b))
    p.validate(func)
    if p.n > 22:
        raise ConfigError("compress-check needs an eager oracle (n <= 22)")
    seed = master_seed(args, config)
    trials = args.trials or get_int(config, "trials", 20)
    k = get_int(config, "round", 1)
    alpha = get_int(config, "alpha", 0)
    jobs = [(scheme, p, func, strategy_name, strat_config, k, alpha, t, derive_seed(seed, t))
            for t in range(trials)]
    rows = run_jobs(compress_trial, jobs, args.jobs)
    write_csv(rows, COMPRESS_COLUMNS, args.csv or args.out)
    return EXIT_ASSERT if any(r["pass"] == 0 for r in rows) else EXIT_OK


# ----------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="flat key = value config file")
    common.add_argument("--seed", help="64-hex-digit master seed")
    common.add_argument("--out", help="output CSV (default: stdout)")
    common.add_argument("--trials", type=int, help="number of trials")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")

    parser = argparse.ArgumentParser(prog="linempc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval-ram", parents=[common], help="evaluate Line/SimLine sequentially")
    p.add_argument("--func", choices=FUNCS)
    p.add_argument("--input", help="input file, hex:<digits>, or 'random'")
    p.add_argument("--trace", help="per-node trace CSV")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("run-mpc", parents=[common], help="run one MPC strategy")
    p.add_argument("--strategy", required=True, choices=("segment", "token", "greedy_probe", "jump"))
    p.add_argument("--input", default="random", help="input file, hex:<digits>, or 'random'")
    p.add_argument("--rounds", type=int)
    p.add_argument("--report", help="per-round report CSV")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="round-complexity grid")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("decay", parents=[common], help="greedy advance-length tail")
    p.set_defaults(handler=cmd_decay)

    p = sub.add_parser("jump", parents=[common], help="jump-guess hit rate")
    p.set_defaults(handler=cmd_jump)

    p = sub.add_parser("compress-check", parents=[common], help="codec roundtrip and bound trials")
    p.add_argument("--scheme", choices=("warmup", "enum"), default="warmup")
    p.add_argument("--csv", help="alias for --out")
    p.set_defaults(handler=cmd_compress)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.trials is not None and args.trials < 1:
        print("error: --trials must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = load_config(args.params)
        return args.handler(args, config)
    except (ConfigError, ParameterError, FormatError, OracleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
