"""Command-line orchestrator: incremental pass 1, merge, resolve, report.

Pass-1 results are cached per input file, keyed on content digests of both
the input and the ruleset, so an unchanged file is never re-evaluated and a
warm run reproduces the cold-run report byte for byte.
"""

from __future__ import annotations

import argparse
import glob
import hashlib
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import builtins as builtins_mod
from .dsl_parser import LexError, ParseError, parse_rule_texts
from .engine import (EngineError, PassOneResult, evaluate_file, merge_facts,
                     parse_pass1, resolve_tests, serialize_pass1)
from .matcher import SVal, TermVal, string_projection
from .reporting import Message, emit_report
from .rule_ast import RuleSet
from .terms import Str, Var
from .xml_frontend import EncodingError, MalformedXml, parse_xml

CACHE_DIR_ENV = "SEMLINT_CACHE_DIR"


class CliError(Exception):
    pass


@dataclass
class RunConfig:
    rule_files: list[str]
    inputs: list[str]
    cache_dir: str
    format: str = "text"
    offline: bool = False
    url_timeout: float = 10.0
    max_probes: int = 8
    normalize_names: bool = False
    fail_on_warnings: bool = False
    jobs: int = 1
    output: str | None = None

    def __post_init__(self):
        if not self.rule_files:
            raise CliError("at least one rule file is required")
        if not self.inputs:
            raise CliError("at least one input file is required")
        if self.jobs < 1:
            raise CliError("jobs must be >= 1")
        if self.url_timeout <= 0:
            raise CliError("url timeout must be positive")
        if self.max_probes < 1:
            raise CliError("max probes must be >= 1")


@dataclass
class RunOutcome:
    report: str
    messages: list[Message]
    diagnostics: list[str]
    exit_code: int
    evaluated: list[str] = field(default_factory=list)
    cached: list[str] = field(default_factory=list)


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _rules_digest(rule_files: list[str]) -> str:
    digest = hashlib.sha256()
    for path in rule_files:
        digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def expand_inputs(patterns: list[str]) -> list[str]:
    out: list[str] = []
    for pattern in patterns:
        if any(c in pattern for c in "*?["):
            matches = sorted(glob.glob(pattern))
            if not matches:
                raise CliError(f"no input matches pattern {pattern!r}")
            out.extend(matches)
        else:
            out.append(pattern)
    return out


def _cache_path(cache_dir: str, input_path: str) -> Path:
    return Path(cache_dir) / (_sha256(input_path.encode("utf-8")) + ".pass1")


def _cached_result(cache_dir: str, input_path: str, input_digest: str,
                   rules_digest: str) -> PassOneResult | None:
    path = _cache_path(cache_dir, input_path)
    try:
        text = path.read_text(encoding="utf-8")
        result = parse_pass1(text, input_path)
    except (OSError, ValueError):
        return None
    if (result.input_digest != input_digest
            or result.rules_digest != rules_digest):
        return None
    return result


def plan_work(cfg: RunConfig) -> list[tuple[str, str]]:
    """Classify every input as 'cached' or 'stale' against the cache dir."""
    rules_digest = _rules_digest(cfg.rule_files)
    plan = []
    for path in expand_inputs(cfg.inputs):
        digest = _sha256(Path(path).read_bytes())
        cached = _cached_result(cfg.cache_dir, path, digest, rules_digest)
        plan.append((path, "cached" if cached is not None else "stale"))
    return plan


def _load_ruleset(cfg: RunConfig) -> RuleSet:
    pairs = []
    for path in cfg.rule_files:
        pairs.append((Path(path).read_text(encoding="utf-8"), path))
    return parse_rule_texts(pairs)


def execute(cfg: RunConfig, prober=None) -> RunOutcome:
    ruleset = _load_ruleset(cfg)
    inputs = expand_inputs(cfg.inputs)
    Path(cfg.cache_dir).mkdir(parents=True, exist_ok=True)

    digests = {path: _sha256(Path(path).read_bytes()) for path in inputs}
    results: dict[str, PassOneResult] = {}
    stale: list[str] = []
    cached: list[str] = []
    for path in inputs:
        hit = _cached_result(cfg.cache_dir, path, digests[path],
                             ruleset.source_hash)
        if hit is not None:
            results[path] = hit
            cached.append(path)
        else:
            stale.append(path)

    def evaluate(path: str) -> PassOneResult:
        doc = parse_xml(Path(path).read_bytes(), path)
        result = evaluate_file(doc, ruleset, path, digests[path])
        _cache_path(cfg.cache_dir, path).write_text(serialize_pass1(result),
                                                    encoding="utf-8")
        return result

    if stale:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            for path, result in zip(stale, pool.map(evaluate, stale)):
                results[path] = result

    ordered = [results[path] for path in inputs]
    store = merge_facts(ordered)
    tests = [dt for result in ordered for dt in result.tests]

    if prober is None:
        prober = builtins_mod.HttpProber(cfg.url_timeout, cfg.max_probes)
    if not cfg.offline:
        prober.prefetch(_test_urls(tests))
    registry = builtins_mod.make_registry(
        prober=prober, offline=cfg.offline,
        normalize_names=cfg.normalize_names)

    messages, resolve_diags = resolve_tests(tests, store, registry)
    diagnostics = [d for result in ordered for d in result.diagnostics]
    diagnostics.extend(resolve_diags)

    report = emit_report(messages, diagnostics, cfg.format)
    if cfg.fail_on_warnings and (messages or diagnostics):
        exit_code = 1
    else:
        exit_code = 0
    return RunOutcome(report, messages, diagnostics, exit_code,
                      evaluated=stale, cached=cached)


def _test_urls(tests) -> list[str]:
    urls = []
    for dt in tests:
        if dt.goal.name != "testurl" or len(dt.goal.args) != 3:
            continue
        arg = dt.goal.args[0]
        if isinstance(arg, Str):
            urls.append(arg.value)
        elif isinstance(arg, Var) and arg.name in dt.captured:
            urls.append(string_projection(dt.captured[arg.name]))
    return urls


def run(cfg: RunConfig, prober=None,
        stdout=None, stderr=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    try:
        outcome = execute(cfg, prober=prober)
    except (CliError, LexError, ParseError, EngineError, MalformedXml,
            EncodingError, OSError) as exc:
        print(f"semlint: error: {exc}", file=stderr)
        return 2
    if cfg.output:
        Path(cfg.output).write_text(outcome.report, encoding="utf-8")
    else:
        stdout.write(outcome.report)
    for diag in sorted(set(outcome.diagnostics)):
        print(f"semlint: {diag}", file=stderr)
    return outcome.exit_code


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semlint",
        description="Check XML documents against semantic consistency rules")
    parser.add_argument("--rules", nargs="+", required=True, metavar="FILE",
                        help="rule file(s), concatenated in order")
    parser.add_argument("--cache-dir", default=os.environ.get(CACHE_DIR_ENV),
                        help=f"pass-1 cache directory (or ${CACHE_DIR_ENV})")
    parser.add_argument("--format", choices=["html", "text", "machine"],
                        default="text")
    parser.add_argument("--offline", action="store_true",
                        help="never touch the network; URL tests are silent")
    parser.add_argument("--url-timeout", type=float, default=10.0,
                        metavar="SECS")
    parser.add_argument("--max-probes", type=int, default=8, metavar="N",
                        help="max concurrent URL probes")
    parser.add_argument("--normalize-names", action="store_true",
                        help="case/accent-insensitive member name matching")
    parser.add_argument("--fail-on-warnings", action="store_true")
    parser.add_argument("--jobs", type=int, default=1, metavar="N",
                        help="max concurrent pass-1 evaluations")
    parser.add_argument("--output", metavar="FILE",
                        help="write the report here instead of stdout")
    parser.add_argument("inputs", nargs="+", metavar="INPUT",
                        help="XML input files (globs allowed)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    if not args.cache_dir:
        print("semlint: error: --cache-dir is required "
              f"(or set ${CACHE_DIR_ENV})", file=sys.stderr)
        return 2
    try:
        cfg = RunConfig(
            rule_files=args.rules, inputs=args.inputs,
            cache_dir=args.cache_dir, format=args.format,
            offline=args.offline, url_timeout=args.url_timeout,
            max_probes=args.max_probes,
            normalize_names=args.normalize_names,
            fail_on_warnings=args.fail_on_warnings, jobs=args.jobs,
            output=args.output)
    except CliError as exc:
        print(f"semlint: error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
