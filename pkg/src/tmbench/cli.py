"""Command line entry point: ``tmbench <command> ...``.

Exit codes: 0 success, 1 a check failed (``verify-utm``), 2 usage error,
3 invalid configuration, 4 malformed input file, 5 I/O failure.  Failures
print one line ``error: <class>: <message>`` on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import random
import sys
from dataclasses import fields
from importlib import resources
from pathlib import Path
from typing import Sequence

import yaml

from . import eval_metrics as em
from .instance_gen import ALPHABET_KINDS, GenConfig, config_dict, generate_dataset, read_dataset, write_dataset
from .llm_client import ConfigError, RunnerConfig, run_benchmark
from .tag_core import MalformedInput, TagSystem, format_trace, parse_queue, run, validate_system
from .transcript_io import (
    ground_truth_records,
    parse_transcript,
    read_transcripts,
    render_prompt,
    write_transcripts,
)
from .utm_compiler import (
    TmConfig,
    TmError,
    compile_tm,
    parse_tm,
    program_to_json,
    random_machine,
    verify_equivalence,
)

EXIT_CODES = {"verify": 1, "usage": 2, "config": 3, "input": 4, "io": 5}


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def _span(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("-")
    try:
        return (int(lo), int(hi)) if sep else (int(lo), int(lo))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or LO-HI, got {text!r}") from None


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text("utf-8")
    except OSError as exc:
        raise CliError("io", f"cannot read {path}: {exc.strerror}") from exc


def _load_json(path: str):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise CliError("input", f"{path}: {exc}") from exc


def _dataset(path: str):
    try:
        return read_dataset(path)
    except OSError as exc:
        raise CliError("io", f"cannot read {path}: {exc.strerror}") from exc
    except ValueError as exc:
        raise CliError("input", str(exc)) from exc


def _writable(path: str) -> Path:
    p = Path(path)
    if not p.parent.is_dir():
        raise CliError("io", f"directory {p.parent} does not exist")
    return p


# --- gen ------------------------------------------------------------------

def _gen_config(args) -> GenConfig:
    values = {}
    if args.config:
        data = yaml.safe_load(_read_text(args.config)) or {}
        if not isinstance(data, dict):
            raise CliError("config", f"{args.config}: expected a mapping")
        known = {f.name for f in fields(GenConfig)}
        unknown = set(data) - known
        if unknown:
            raise CliError("config", f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    flags = {
        "m": args.m, "alphabet_kind": args.alphabet_kind, "alphabet_size": args.alphabet_size,
        "max_steps": args.max_steps, "count": args.count, "seed": args.seed, "min_steps": args.min_steps,
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    if args.rule_len:
        values["rule_len_min"], values["rule_len_max"] = args.rule_len
    if args.init_len:
        values["init_len_min"], values["init_len_max"] = args.init_len
    if args.symbols:
        values["custom_symbols"] = args.symbols.split()
    if "seed" not in values:
        raise CliError("usage", "--seed is required (directly or in --config)")
    if "custom_symbols" in values:
        values["custom_symbols"] = tuple(values["custom_symbols"])
    try:
        cfg = GenConfig(**values)
    except TypeError as exc:
        raise CliError("config", str(exc)) from exc
    problems = cfg.problems()
    if problems:
        raise CliError("config", "; ".join(problems))
    return cfg


def cmd_gen(args) -> int:
    if args.count is not None and args.count < 1:
        raise CliError("usage", "--count must be positive")
    cfg = _gen_config(args)
    out = _writable(args.out)
    data = generate_dataset(cfg)
    try:
        write_dataset(out, data)
    except OSError as exc:
        raise CliError("io", f"cannot write {out}: {exc.strerror}") from exc
    early = sum(1 for inst in data if inst.halted and inst.halt_step < cfg.max_steps)
    print(f"wrote {len(data)} instances to {out}")
    print(f"early halts: {early}/{len(data)}")
    if args.dump_config:
        print(json.dumps(config_dict(cfg), ensure_ascii=False))
    return 0


# --- simulate -------------------------------------------------------------

def _system_from_record(rec: dict, where: str) -> TagSystem:
    try:
        system = TagSystem.build(rec["m"], rec["alphabet"], rec["rules"])
    except (KeyError, TypeError) as exc:
        raise CliError("input", f"{where}: missing or malformed field {exc}") from exc
    problems = validate_system(system)
    if problems:
        raise CliError("input", f"{where}: " + "; ".join(problems))
    return system


def cmd_simulate(args) -> int:
    if args.steps < 0:
        raise CliError("usage", "--steps must be >= 0")
    init = None
    if args.example:
        examples = json.loads(resources.files("tmbench.assets").joinpath("worked_examples.json").read_text("utf-8"))
        rec = examples[args.example]
        system, init = _system_from_record(rec, args.example), rec["init"]
    elif args.system:
        rec = _load_json(args.system)
        system, init = _system_from_record(rec, args.system), rec.get("init")
    else:
        if not args.id:
            raise CliError("usage", "--dataset needs --id")
        found = [inst for inst in _dataset(args.dataset) if inst.id == args.id]
        if not found:
            raise CliError("input", f"no instance {args.id!r} in {args.dataset}")
        system, init = found[0].system, found[0].init
    if args.init:
        init = parse_queue(args.init)
    if init is None:
        raise CliError("usage", "no initial queue: pass --init or include 'init' in the system file")
    try:
        trace = run(system, init, args.steps)
    except MalformedInput as exc:
        raise CliError("input", str(exc)) from exc
    print(format_trace(trace, system.m))
    return 0


# --- UTM tools ------------------------------------------------------------

def _machine(path: str):
    try:
        return parse_tm(_read_text(path))
    except TmError as exc:
        raise CliError("input", f"{path}: {exc}") from exc


def cmd_compile_tm(args) -> int:
    prog = compile_tm(_machine(args.tm))
    system, sidecar = program_to_json(prog)
    out = _writable(args.out + ".system.json")
    side = Path(args.out + ".symbols.json")
    try:
        out.write_text(json.dumps(system, ensure_ascii=False, indent=1) + "\n", "utf-8")
        side.write_text(json.dumps(sidecar, ensure_ascii=False, indent=1) + "\n", "utf-8")
    except OSError as exc:
        raise CliError("io", f"cannot write {out}: {exc.strerror}") from exc
    print(f"{len(prog.tm.states)} states -> {len(system['alphabet'])} symbols, m={system['m']}")
    print(f"wrote {out} and {side}")
    return 0


def _tm_config(text: str) -> TmConfig:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise CliError("usage", f"--config expects Q,M,N, got {text!r}")
    try:
        return TmConfig(parts[0], int(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise CliError("usage", f"--config: {exc}") from exc


def cmd_verify_utm(args) -> int:
    if args.tm_steps < 1:
        raise CliError("usage", "--tm-steps must be positive")
    failures = 0
    if args.random:
        if args.seed is None:
            raise CliError("usage", "--random needs --seed")
        rng = random.Random(args.seed)
        for k in range(args.random):
            tm = random_machine(rng, rng.randint(2, 4), rng.randint(1, 2))
            bad = []
            for _ in range(args.configs):
                cfg = TmConfig(rng.choice(tm.states), rng.randrange(args.max_counter), rng.randrange(args.max_counter))
                report = verify_equivalence(tm, cfg, args.tm_steps, engine=args.engine)
                if not report.passed:
                    bad.append(f"{cfg}: {report.summary()}")
            failures += bool(bad)
            status = "PASS" if not bad else "FAIL"
            print(f"machine {k}: {status} {len(tm.states)} states, {args.configs} configs" + ("; " + bad[0] if bad else ""))
        print(f"{args.random - failures}/{args.random} machines passed")
    else:
        if not args.tm or not args.config:
            raise CliError("usage", "give --tm and --config, or --random N --seed S")
        tm = _machine(args.tm)
        cfg = _tm_config(args.config)
        if cfg.state not in tm.quads:
            raise CliError("input", f"state {cfg.state!r} is not defined in {args.tm}")
        report = verify_equivalence(tm, cfg, args.tm_steps, engine=args.engine)
        print(report.summary())
        failures = not report.passed
    if failures:
        raise CliError("verify", f"{failures} equivalence check(s) failed")
    return 0


# --- prompts, evaluation and scoring --------------------------------------

def cmd_render(args) -> int:
    data = _dataset(args.dataset)
    if args.id:
        data = [inst for inst in data if inst.id == args.id]
        if not data:
            raise CliError("input", f"no instance {args.id!r} in {args.dataset}")
    if args.ground_truth:
        if not args.out:
            raise CliError("usage", "--ground-truth needs --out")
        write_transcripts(_writable(args.out), ground_truth_records(data))
        print(f"wrote {len(data)} ground-truth transcripts to {args.out}")
    elif args.out:
        with open(_writable(args.out), "w", encoding="utf-8", newline="\n") as fh:
            for inst in data:
                fh.write(json.dumps({"id": inst.id, "prompt": render_prompt(inst)}, ensure_ascii=False) + "\n")
        print(f"wrote {len(data)} prompts to {args.out}")
    else:
        for inst in data:
            print(render_prompt(inst))
    return 0


def _runner_config(args) -> RunnerConfig:
    base = RunnerConfig.load(args.config).to_dict() if args.config else {}
    flags = {
        "base_url": args.base_url, "model": args.model, "api_key_env": args.api_key_env,
        "temperature": args.temperature, "top_p": args.top_p,
        "max_output_tokens": args.max_output_tokens, "max_in_flight": args.jobs,
    }
    base.update({k: v for k, v in flags.items() if v is not None})
    return RunnerConfig.from_mapping(base)


def cmd_eval(args) -> int:
    try:
        cfg = _runner_config(args)
        cfg.api_key()
    except ConfigError as exc:
        raise CliError("config", str(exc)) from exc
    data = _dataset(args.dataset)
    out = _writable(args.out)
    records = run_benchmark(cfg, data, out, retry_errors=args.retry_errors)
    # sampling settings travel with the transcripts; the key itself never does
    meta = out.with_name(out.name + ".meta.json")
    meta.write_text(json.dumps({"runner": cfg.to_dict(), "dataset": str(args.dataset)}, indent=2) + "\n", "utf-8")
    errors = sum(r.error is not None for r in records)
    print(f"{len(records)} transcripts in {out}, {errors} error records")
    return 0


def cmd_score(args) -> int:
    data = _dataset(args.dataset)
    try:
        transcripts = read_transcripts(args.transcripts) if args.transcripts else {}
    except OSError as exc:
        raise CliError("io", f"cannot read {args.transcripts}: {exc.strerror}") from exc
    except (ValueError, KeyError) as exc:
        raise CliError("input", f"{args.transcripts}: {exc}") from exc
    predictions = {k: parse_transcript(r.response or "") for k, r in transcripts.items()}
    judgments = em.judge_all(data, predictions)
    T = args.T or max(inst.max_steps for inst in data)
    models = sorted({r.model for r in transcripts.values()})
    report = em.evaluate(judgments, T=T, model=args.model or ",".join(models), dataset_id=args.dataset_id or Path(args.dataset).name)
    if args.out:
        em.write_report(_writable(args.out), report)
    if args.csv:
        _writable(args.csv).write_text(report.curve_csv(), "utf-8")
    pct = report.to_dict()["percent"]
    print(f"instances: {report.n_instances}")
    print(f"SWA (uniform): {_fmt(pct['swa_uniform'])}")
    print(f"SWA (linear): {_fmt(pct['swa_linear'])}")
    print(f"pass rate: {_fmt(pct['pass_rate'])}")
    return 0


def _fmt(x: float | None) -> str:
    return "n/a" if x is None else f"{x:.1f}"


def _column(rows: list[dict], spec: str) -> list[float]:
    """``col`` or ``mean:col1,col2,...``."""
    cols = spec[5:].split(",") if spec.startswith("mean:") else [spec]
    for c in cols:
        if rows and c not in rows[0]:
            raise CliError("input", f"no column {c!r}")
    try:
        return [sum(float(r[c]) for c in cols) / len(cols) for r in rows]
    except ValueError as exc:
        raise CliError("input", str(exc)) from exc


def cmd_stats(args) -> int:
    if args.csv:
        text = _read_text(args.csv)
    else:
        text = resources.files("tmbench.assets").joinpath("reference_scores.csv").read_text("utf-8")
    rows = list(csv.DictReader(text.splitlines()))
    for cond in args.where or []:
        col, sep, val = cond.partition("=")
        if not sep:
            raise CliError("usage", f"--where expects COL=VALUE, got {cond!r}")
        if rows and col not in rows[0]:
            raise CliError("input", f"no column {col!r}")
        rows = [r for r in rows if r[col] == val]
    xs, ys = _column(rows, args.x), _column(rows, args.y)
    try:
        r = em.pearson(xs, ys)
        fit = em.linear_fit(em.minmax_normalize(xs), em.minmax_normalize(ys))
    except ValueError as exc:
        raise CliError("input", str(exc)) from exc
    print(f"n: {len(xs)}")
    print(f"pearson_r: {r:.6f}")
    print(f"normalized fit: slope={fit.slope:.6f} intercept={fit.intercept:.6f} r_squared={fit.r_squared:.6f}")
    if args.residuals:
        label = args.label if rows and args.label in rows[0] else None
        with open(_writable(args.residuals), "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([label or "row", "x", "y", "residual"])
            for k, (row, x, y, e) in enumerate(zip(rows, xs, ys, fit.residuals)):
                w.writerow([row[label] if label else k, x, y, repr(e)])
    return 0


# --- parser ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise CliError("usage", message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tmbench", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a dataset")
    g.add_argument("--config", help="YAML file with generator fields")
    g.add_argument("--m", type=int)
    g.add_argument("--alphabet-kind", choices=ALPHABET_KINDS)
    g.add_argument("--alphabet-size", type=int)
    g.add_argument("--symbols", help="space separated symbols for --alphabet-kind custom")
    g.add_argument("--rule-len", type=_span, help="N or LO-HI")
    g.add_argument("--init-len", type=_span, help="N or LO-HI")
    g.add_argument("--max-steps", type=int)
    g.add_argument("--min-steps", type=int)
    g.add_argument("--count", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)
    g.add_argument("--dump-config", action="store_true", help="print the resolved config as JSON")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("simulate", help="print a step-by-step trace")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--system", help="JSON file with m, alphabet, rules and optionally init")
    src.add_argument("--dataset")
    src.add_argument("--example", choices=("roman", "numeral", "special"))
    s.add_argument("--id")
    s.add_argument("--init", help='queue such as "[B A E E C]"')
    s.add_argument("--steps", type=int, default=30)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compile-tm", help="compile a Turing machine into a 2-tag system")
    c.add_argument("--tm", required=True)
    c.add_argument("--out", required=True, help="output prefix")
    c.set_defaults(func=cmd_compile_tm)

    v = sub.add_parser("verify-utm", help="lockstep check of a machine against its compiled system")
    v.add_argument("--tm")
    v.add_argument("--config", help="Q,M,N")
    v.add_argument("--tm-steps", type=int, default=20)
    v.add_argument("--random", type=int, default=0, help="fuzz this many random machines instead")
    v.add_argument("--configs", type=int, default=10, help="configs per random machine")
    v.add_argument("--max-counter", type=int, default=64)
    v.add_argument("--seed", type=int)
    v.add_argument("--engine", choices=("runs", "naive"), default="runs")
    v.set_defaults(func=cmd_verify_utm)

    r = sub.add_parser("render", help="render prompts or ground-truth transcripts")
    r.add_argument("--dataset", required=True)
    r.add_argument("--id")
    r.add_argument("--out")
    r.add_argument("--ground-truth", action="store_true")
    r.set_defaults(func=cmd_render)

    e = sub.add_parser("eval", help="query a chat-completion endpoint for every instance")
    e.add_argument("--dataset", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--config", help="YAML runner config")
    e.add_argument("--base-url")
    e.add_argument("--model")
    e.add_argument("--api-key-env")
    e.add_argument("--temperature", type=float)
    e.add_argument("--top-p", type=float)
    e.add_argument("--max-output-tokens", type=int)
    e.add_argument("--jobs", type=int, help="maximum requests in flight")
    e.add_argument("--retry-errors", action="store_true", help="re-request ids whose stored record is an error")
    e.set_defaults(func=cmd_eval)

    sc = sub.add_parser("score", help="score transcripts against a dataset")
    sc.add_argument("--dataset", required=True)
    sc.add_argument("--transcripts", help="transcript JSONL (omit to score empty predictions)")
    sc.add_argument("--out", help="report JSON")
    sc.add_argument("--csv", help="accuracy curve CSV")
    sc.add_argument("--T", type=int, help="evaluation horizon (default: dataset max_steps)")
    sc.add_argument("--model")
    sc.add_argument("--dataset-id")
    sc.set_defaults(func=cmd_score)

    st = sub.add_parser("stats", help="Pearson correlation and normalized linear fit over a CSV")
    st.add_argument("--csv", help="defaults to the bundled published reference table")
    st.add_argument("--x", default="pass_rate")
    st.add_argument("--y", default="mean:aime2024,math500,gpqa")
    st.add_argument("--where", action="append", help="keep rows with COL=VALUE (repeatable)")
    st.add_argument("--residuals", help="write residuals CSV here")
    st.add_argument("--label", default="model")
    st.set_defaults(func=cmd_stats)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return EXIT_CODES[exc.kind]
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CODES["config"]
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_CODES["io"]


if __name__ == "__main__":
    sys.exit(main())
