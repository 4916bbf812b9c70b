"""Message rendering and report assembly.

Templates are the consequence patterns written in the rule file.  Rendering
substitutes the string projection of bound variables, entity-escaping them
in the HTML form only, and normalizes whitespace so that pretty-printed
templates produce stable one-line messages.
"""

from __future__ import annotations

import html as html_mod
import json
from dataclasses import dataclass
from typing import Union

from .matcher import Bindings, normalize_ws, string_projection
from .rule_ast import PAnon, PElem, PEmptyElem, PText, PVar, Pattern
from .terms import Functor, Str, Term, Var, term_to_text
from .xml_frontend import SourcePos


class UnboundInConsequence(Exception):
    def __init__(self, var: str):
        super().__init__(f"unbound variable ${var} in message template")
        self.var = var


@dataclass(frozen=True)
class Message:
    pos: SourcePos
    rule_index: int
    html: str
    text: str
    solution_key: str

    def sort_key(self):
        return (self.pos.file, self.pos.line, self.rule_index,
                self.solution_key, self.html)


def render_consequence(c: Union[Pattern, Term],
                       b: Bindings) -> tuple[str, str]:
    """Render a test consequence into (html, text) forms."""
    if isinstance(c, (Var, Str, Functor)):
        text = term_to_text(_subst_term(c, b))
        return html_mod.escape(text, quote=False), text
    html, text = _render_pattern(c, b)
    return normalize_ws(html), normalize_ws(text)


def _subst_term(t: Term, b: Bindings) -> Term:
    if isinstance(t, Var):
        value = b.get(t.name)
        if value is None:
            raise UnboundInConsequence(t.name)
        return Str(string_projection(value))
    if isinstance(t, Functor):
        return Functor(t.name, tuple(_subst_term(a, b) for a in t.args))
    return t


def _render_pattern(p: Pattern, b: Bindings) -> tuple[str, str]:
    if isinstance(p, PText):
        return p.content, p.content
    if isinstance(p, PVar):
        value = b.get(p.name)
        if value is None:
            raise UnboundInConsequence(p.name)
        projection = string_projection(value)
        return html_mod.escape(projection, quote=False), projection
    if isinstance(p, PAnon):
        raise UnboundInConsequence("_")
    attrs = "".join(f' {a.name}="{_attr_value(a, b)}"' for a in p.attrs)
    if isinstance(p, PEmptyElem):
        return f"<{p.name}{attrs}/>", ""
    parts = [_render_pattern(c, b) for c in p.children]
    inner_html = " ".join(h for h, _ in parts)
    inner_text = " ".join(t for _, t in parts)
    return f"<{p.name}{attrs}> {inner_html} </{p.name}>", inner_text


def _attr_value(a, b: Bindings) -> str:
    if a.value is None:
        raise UnboundInConsequence("_")
    if isinstance(a.value, Str):
        return html_mod.escape(a.value.value, quote=True)
    value = b.get(a.value.name)
    if value is None:
        raise UnboundInConsequence(a.value.name)
    return html_mod.escape(string_projection(value), quote=True)


def emit_report(msgs: list[Message], diagnostics: list[str],
                format: str) -> str:
    """Assemble the final report; deterministic for identical inputs."""
    ordered = sorted(set(msgs), key=Message.sort_key)
    diags = sorted(set(diagnostics))
    lines: list[str] = []
    if format == "html":
        for d in diags:
            lines.append(f'<p class="diagnostic">'
                         f'{html_mod.escape(d, quote=False)}</p>')
        lines.append("<ul>")
        for m in ordered:
            item = m.html if m.html.startswith("<li") else f"<li>{m.html}</li>"
            lines.append(item)
        lines.append("</ul>")
        lines.append(f"<p>{len(ordered)} messages</p>")
    elif format == "text":
        for d in diags:
            lines.append(f"diagnostic: {d}")
        for m in ordered:
            lines.append(f"{m.pos.file}:{m.pos.line}: {m.text}")
        lines.append(f"{len(ordered)} messages")
    elif format == "machine":
        for d in diags:
            lines.append(json.dumps({"diagnostic": d}, sort_keys=True))
        for m in ordered:
            lines.append(json.dumps(
                {"file": m.pos.file, "line": m.pos.line,
                 "rule": m.rule_index, "text": m.text, "html": m.html},
                sort_keys=True))
        lines.append(json.dumps({"messages": len(ordered)}))
    else:
        raise ValueError(f"unknown report format {format!r}")
    return "\n".join(lines) + "\n"
