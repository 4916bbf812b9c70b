"""semlint: semantic consistency checking of XML document collections.

Documents are matched against rules written in a small pattern/term DSL;
pass 1 walks each file collecting facts and delayed tests, pass 2 merges
the facts and resolves the tests into file/line-anchored warnings.
"""

from .dsl_parser import parse_rule_texts, parse_rules, tokenize
from .engine import (FactStore, evaluate_file, merge_facts, resolve_tests,
                     solve)
from .matcher import Bindings, deep_contains, match_children, match_node, unify
from .reporting import emit_report, render_consequence
from .xml_frontend import parse_xml

__all__ = [
    "parse_xml", "tokenize", "parse_rules", "parse_rule_texts",
    "match_node", "match_children", "deep_contains", "unify", "Bindings",
    "evaluate_file", "merge_facts", "solve", "resolve_tests", "FactStore",
    "render_consequence", "emit_report",
]

__version__ = "0.1.0"
