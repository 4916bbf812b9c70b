"""Rule execution: per-file traversal (pass 1), fact merging and delayed
test resolution against the global fact store (pass 2).

Pass 1 is a depth-first pre-order walk.  At every node all applicable rules
are matched against the same inherited environment snapshot; assignments
only become visible to the node's children.  Facts and tests produced for a
file can be cached on disk and replayed bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .matcher import (Bindings, NodeListVal, NodeVal, SVal, TermVal, Value,
                      deep_contains, match_node, string_projection, unify)
from .rule_ast import (Assert, Assign, Contains, EnvRule, Eq, Pattern,
                       Polarity, Rule, RuleSet, TestRule, consequence_vars,
                       decode_pattern, encode_pattern)
from .terms import (Functor, Str, Term, Var, is_ground, term_from_text,
                    term_to_text, term_vars)
from .xml_frontend import Element, SourcePos, Text, XmlNode


class EngineError(Exception):
    pass


class NonGroundAssertion(EngineError):
    def __init__(self, pos: SourcePos, term: Term, var: str):
        super().__init__(
            f"{pos.file}:{pos.line}: assertion {term_to_text(term)} leaves "
            f"${var} unbound (ruleset bug)")
        self.pos = pos
        self.term = term


class UnknownPredicate(EngineError):
    def __init__(self, name: str, arity: int):
        super().__init__(f"unknown predicate {name}/{arity}: no builtin and "
                         f"never asserted (possible misspelling)")
        self.name = name
        self.arity = arity


class BuiltinError(EngineError):
    pass


# builtin evaluator: (goal args, bindings, store) -> solutions
BuiltinFn = Callable[[tuple[Term, ...], Bindings, "FactStore"],
                     list[Bindings]]
BuiltinRegistry = dict[tuple[str, int], BuiltinFn]


class LocalEnv:
    """Immutable name -> Value map; child scopes shadow their parent."""

    __slots__ = ("_map",)

    def __init__(self, entries: dict[str, Value] | None = None):
        self._map = dict(entries) if entries else {}

    def get(self, name: str) -> Optional[Value]:
        return self._map.get(name)

    def assign(self, name: str, value: Value) -> "LocalEnv":
        child = LocalEnv(self._map)
        child._map[name] = value
        return child


@dataclass(frozen=True)
class Fact:
    term: Functor
    origin: SourcePos  # diagnostic only, not part of fact identity


@dataclass(frozen=True)
class DelayedTest:
    rule_index: int
    polarity: Polarity
    goal: Functor
    captured: Bindings
    consequence: Union[Pattern, Term]
    pos: SourcePos


@dataclass(frozen=True)
class PassOneResult:
    source_file: str
    facts: tuple[Fact, ...]
    tests: tuple[DelayedTest, ...]
    diagnostics: tuple[str, ...]
    input_digest: str
    rules_digest: str


def evaluate_file(doc: XmlNode, rules: RuleSet, file: str,
                  input_digest: str = "") -> PassOneResult:
    facts: list[Fact] = []
    tests: list[DelayedTest] = []
    diagnostics: list[str] = []

    def visit(node: XmlNode, env: LocalEnv) -> None:
        seed = (Bindings()
                .bind("SourceFile", SVal(file))
                .bind("SourceLine", SVal(str(node.pos.line))))
        applicable: list[tuple[Rule, Bindings]] = []
        for rule in rules.rules:
            if rule.skipped:
                continue
            b = match_node(rule.pattern, node, seed)
            if b is None:
                continue
            for cond in rule.conditions:
                b = _eval_condition(cond, b, env)
                if b is None:
                    break
            if b is not None:
                applicable.append((rule, b))

        child_env = env
        assigned_by: dict[str, int] = {}
        for rule, b in applicable:
            if isinstance(rule.body, EnvRule):
                for act in rule.body.actions:
                    if isinstance(act, Assign):
                        if act.env_var in assigned_by:
                            diagnostics.append(
                                f"{file}:{node.pos.line}: conflicting "
                                f"assignments to {act.env_var!r} (rule "
                                f"{rule.index} overrides rule "
                                f"{assigned_by[act.env_var]})")
                        assigned_by[act.env_var] = rule.index
                        child_env = child_env.assign(
                            act.env_var, _ground_value(act.value, b,
                                                       node.pos))
                    else:
                        term = _ground_term(act.fact, b, node.pos)
                        assert isinstance(term, Functor)
                        facts.append(Fact(term, node.pos))
            else:
                tests.append(_capture_test(rule, b, node.pos))
        if isinstance(node, Element):
            for child in node.children:
                visit(child, child_env)

    visit(doc, LocalEnv())
    return PassOneResult(file, tuple(facts), tuple(tests),
                         tuple(diagnostics), input_digest, rules.source_hash)


def _eval_condition(cond, b: Bindings, env: LocalEnv) -> Optional[Bindings]:
    if isinstance(cond, Eq):
        value = env.get(cond.env_var)
        if value is None:
            return None
        return unify(cond.rhs, value, b)
    root = b.get(cond.var)
    if root is None:
        return None
    solutions = deep_contains(root, cond.pattern, b)
    return solutions[0] if solutions else None


def _ground_term(term: Term, b: Bindings, pos: SourcePos,
                 toplevel: Term | None = None) -> Term:
    """Substitute bindings into term, projecting node values to strings."""
    top = toplevel if toplevel is not None else term
    if isinstance(term, Str):
        return term
    if isinstance(term, Functor):
        return Functor(term.name, tuple(
            _ground_term(a, b, pos, top) for a in term.args))
    value = b.get(term.name)
    if value is None:
        raise NonGroundAssertion(pos, top, term.name)
    if isinstance(value, TermVal):
        return value.term
    return Str(string_projection(value))


def _ground_value(term: Term, b: Bindings, pos: SourcePos) -> Value:
    if isinstance(term, Str):
        return SVal(term.value)
    if isinstance(term, Functor):
        ground = _ground_term(term, b, pos)
        return TermVal(ground)
    value = b.get(term.name)
    if value is None:
        raise NonGroundAssertion(pos, term, term.name)
    return value


def _capture_test(rule: Rule, b: Bindings, pos: SourcePos) -> DelayedTest:
    assert isinstance(rule.body, TestRule)
    test = rule.body.test
    wanted = (set(term_vars(test.goal))
              | set(consequence_vars(test.consequence))
              | {"SourceFile", "SourceLine"})
    captured = Bindings()
    for name in sorted(wanted):
        value = b.get(name)
        if value is None:
            continue
        if isinstance(value, (NodeVal, NodeListVal)):
            value = SVal(string_projection(value))
        captured = captured.bind(name, value)
    return DelayedTest(rule.index, test.polarity, test.goal, captured,
                       test.consequence, pos)


# -- pass 2 -------------------------------------------------------------------

class FactStore:
    """Deduplicated ground facts indexed by functor name and arity."""

    def __init__(self):
        self._by_key: dict[tuple[str, int], dict[Functor, Fact]] = {}
        self.names: set[str] = set()

    def add(self, fact: Fact) -> None:
        key = (fact.term.name, len(fact.term.args))
        bucket = self._by_key.setdefault(key, {})
        bucket.setdefault(fact.term, fact)
        self.names.add(fact.term.name)

    def lookup(self, name: str, arity: int) -> list[Fact]:
        bucket = self._by_key.get((name, arity), {})
        return sorted(bucket.values(),
                      key=lambda f: term_to_text(f.term))

    def __len__(self) -> int:
        return sum(len(bucket) for bucket in self._by_key.values())

    def __iter__(self):
        for key in sorted(self._by_key):
            yield from self.lookup(*key)


def merge_facts(results: list[PassOneResult]) -> FactStore:
    store = FactStore()
    for result in results:
        for fact in result.facts:
            store.add(fact)
    return store


def solve(goal: Functor, b: Bindings, store: FactStore,
          builtins: BuiltinRegistry) -> list[Bindings]:
    key = (goal.name, len(goal.args))
    if key in builtins:
        return builtins[key](goal.args, b, store)
    facts = store.lookup(*key)
    if not facts and goal.name not in store.names:
        raise UnknownPredicate(*key)
    out = []
    for fact in facts:
        b2 = unify(goal, fact.term, b)
        if b2 is not None:
            out.append(b2)
    return out


def resolve_tests(tests: list[DelayedTest], store: FactStore,
                  builtins: BuiltinRegistry):
    """Solve every delayed test; returns (messages, diagnostics)."""
    from .reporting import Message, UnboundInConsequence, render_consequence

    messages: list[Message] = []
    diagnostics: list[str] = []
    unknown_reported: set[tuple[str, int]] = set()

    for dt in tests:
        try:
            solutions = solve(dt.goal, dt.captured, store, builtins)
        except UnknownPredicate as exc:
            key = (exc.name, exc.arity)
            if key not in unknown_reported:
                unknown_reported.add(key)
                diagnostics.append(str(exc))
            continue
        except BuiltinError as exc:
            diagnostics.append(f"{dt.pos.file}:{dt.pos.line}: {exc}")
            continue

        try:
            if dt.polarity is Polarity.IF_ABSENT:
                if not solutions:
                    html, text = render_consequence(dt.consequence,
                                                    dt.captured)
                    messages.append(Message(dt.pos, dt.rule_index, html,
                                            text, ""))
            else:
                seen: set[str] = set()
                for sol in solutions:
                    html, text = render_consequence(dt.consequence, sol)
                    if html in seen:
                        continue
                    seen.add(html)
                    key = _solution_key(sol, dt.captured)
                    messages.append(Message(dt.pos, dt.rule_index, html,
                                            text, key))
        except UnboundInConsequence as exc:
            diagnostics.append(
                f"{dt.pos.file}:{dt.pos.line}: message template uses "
                f"unbound variable ${exc.var}")
    return messages, diagnostics


def _solution_key(solution: Bindings, captured: Bindings) -> str:
    parts = []
    for name, value in sorted(solution.items()):
        if name in captured:
            continue
        parts.append(f"{name}={string_projection(value)}")
    return ",".join(parts)


# -- pass-1 result cache format ----------------------------------------------

_TESTS_MARK = "%tests"
_DIAGS_MARK = "%diags"


def serialize_pass1(result: PassOneResult) -> str:
    lines = [f"#input {result.input_digest}", f"#rules {result.rules_digest}"]
    for fact in result.facts:
        lines.append(term_to_text(fact.term) + ".")
    lines.append(_TESTS_MARK)
    for dt in result.tests:
        lines.append(term_to_text(_encode_test(dt)))
    lines.append(_DIAGS_MARK)
    lines.extend(result.diagnostics)
    return "\n".join(lines) + "\n"


def parse_pass1(text: str, source_file: str) -> PassOneResult:
    lines = text.splitlines()
    if (len(lines) < 2 or not lines[0].startswith("#input ")
            or not lines[1].startswith("#rules ")):
        raise ValueError("bad cache header")
    input_digest = lines[0].split(" ", 1)[1]
    rules_digest = lines[1].split(" ", 1)[1]
    facts: list[Fact] = []
    tests: list[DelayedTest] = []
    diagnostics: list[str] = []
    section = "facts"
    for line in lines[2:]:
        if line == _TESTS_MARK:
            section = "tests"
        elif line == _DIAGS_MARK:
            section = "diags"
        elif section == "facts":
            if not line.endswith("."):
                raise ValueError(f"bad fact line {line!r}")
            term = term_from_text(line[:-1])
            if not isinstance(term, Functor) or not is_ground(term):
                raise ValueError(f"bad fact line {line!r}")
            facts.append(Fact(term, SourcePos(source_file, 1)))
        elif section == "tests":
            tests.append(_decode_test(term_from_text(line)))
        else:
            diagnostics.append(line)
    return PassOneResult(source_file, tuple(facts), tuple(tests),
                         tuple(diagnostics), input_digest, rules_digest)


def _encode_value(value: Value) -> Term:
    if isinstance(value, SVal):
        return Str(value.value)
    if isinstance(value, TermVal):
        return Functor("term", (value.term,))
    raise ValueError(f"node value not serializable: {value!r}")


def _decode_value(t: Term) -> Value:
    if isinstance(t, Str):
        return SVal(t.value)
    if isinstance(t, Functor) and t.name == "term" and len(t.args) == 1:
        return TermVal(t.args[0])
    raise ValueError(f"bad value term {t!r}")


def _encode_test(dt: DelayedTest) -> Functor:
    binds = tuple(Functor("bind", (Str(name), _encode_value(value)))
                  for name, value in sorted(dt.captured.items()))
    if isinstance(dt.consequence, (Var, Str, Functor)):
        conseq: Functor = Functor("term", (dt.consequence,))
    else:
        conseq = Functor("msg", (encode_pattern(dt.consequence),))
    return Functor("dt", (Str(dt.polarity.value), Str(str(dt.rule_index)),
                          Str(dt.pos.file), Str(str(dt.pos.line)),
                          dt.goal, Functor("bindings", binds), conseq))


def _decode_test(t: Term) -> DelayedTest:
    if not isinstance(t, Functor) or t.name != "dt" or len(t.args) != 7:
        raise ValueError(f"bad test term {t!r}")
    pol_s, idx_s, file_s, line_s, goal, binds, conseq = t.args
    assert isinstance(pol_s, Str) and isinstance(idx_s, Str)
    assert isinstance(file_s, Str) and isinstance(line_s, Str)
    assert isinstance(goal, Functor) and isinstance(binds, Functor)
    assert isinstance(conseq, Functor)
    captured = Bindings()
    for bind in binds.args:
        assert isinstance(bind, Functor) and bind.name == "bind"
        name = bind.args[0]
        assert isinstance(name, Str)
        captured = captured.bind(name.value, _decode_value(bind.args[1]))
    if conseq.name == "term":
        consequence: Union[Pattern, Term] = conseq.args[0]
    else:
        consequence = decode_pattern(conseq.args[0])
    polarity = (Polarity.IF_ABSENT if pol_s.value == Polarity.IF_ABSENT.value
                else Polarity.IF_PRESENT)
    return DelayedTest(int(idx_s.value), polarity, goal, captured,
                       consequence, SourcePos(file_s.value,
                                              int(line_s.value)))
