import json

import pytest

from semlint.dsl_parser import parse_rules
from semlint.matcher import Bindings, SVal
from semlint.reporting import (Message, UnboundInConsequence, emit_report,
                               render_consequence)
from semlint.terms import Functor, Str, Var
from semlint.xml_frontend import SourcePos


def consequence_of(rule_text):
    rs = parse_rules(rule_text, "r.rules")
    return rs.rules[0].body.test.consequence


STAFF_RULE = """\
<pers prenom=$P nom=$N> <$_> </pers>
? personne1($P,$N) /
  <li>
    Warning: <$P> <$N> line <$SourceLine>
    does not appear in the current staff chart.
  </li> ;
"""


def test_staff_warning_renders_to_one_line():
    b = (Bindings().bind("P", SVal("J.")).bind("N", SVal("Doe"))
         .bind("SourceLine", SVal("42")))
    html, text = render_consequence(consequence_of(STAFF_RULE), b)
    assert text == ("Warning: J. Doe line 42 does not appear in the "
                    "current staff chart.")
    assert html == ("<li> Warning: J. Doe line 42 does not appear in the "
                    "current staff chart. </li>")


def test_nested_markup_kept_in_html_dropped_in_text():
    c = consequence_of(
        "<a/> ? p($T) / <li> cite <i> \"<$T>\" </i> here <p> </p> </li> ;")
    b = Bindings().bind("T", SVal("A Title"))
    html, text = render_consequence(c, b)
    # sibling template parts are space-joined, so the quotes detach
    assert html == '<li> cite <i> " A Title " </i> here <p> </p> </li>'
    assert text == 'cite " A Title " here'


def test_substituted_values_escaped_in_html_only():
    c = consequence_of("<a/> ? p($X) / <li> got <$X> </li> ;")
    b = Bindings().bind("X", SVal("a <b> & c"))
    html, text = render_consequence(c, b)
    assert html == "<li> got a &lt;b&gt; &amp; c </li>"
    assert text == "got a <b> & c"


def test_whitespace_normalized_across_template_lines():
    c = consequence_of("<a/> ? p($X) / <li>\n\tone\n\t  two <$X> </li> ;")
    html, text = render_consequence(c, Bindings().bind("X", SVal("three")))
    assert text == "one two three"
    assert "\n" not in html and "\t" not in html


def test_unbound_variable_raises():
    c = consequence_of("<a/> ? p($X) -> <li> got <$X> </li> ;")
    with pytest.raises(UnboundInConsequence) as exc:
        render_consequence(c, Bindings())
    assert exc.value.var == "X"


def test_term_consequence_renders_as_term_text():
    html, text = render_consequence(
        Functor("missing", (Var("P"), Str("x"))),
        Bindings().bind("P", SVal("Doe")))
    assert text == 'missing("Doe","x")'
    assert html == 'missing(&quot;Doe&quot;,&quot;x&quot;)'.replace(
        "&quot;", '"')  # quotes not escaped outside attributes


def msg(file, line, rule, body, key=""):
    return Message(SourcePos(file, line), rule, f"<li> {body} </li>", body,
                   key)


def test_emit_text_sorted_by_position_then_rule():
    msgs = [msg("b.xml", 9, 0, "late"),
            msg("a.xml", 5, 2, "second"),
            msg("a.xml", 5, 1, "first"),
            msg("a.xml", 2, 7, "top")]
    out = emit_report(msgs, [], "text")
    assert out.splitlines() == [
        "a.xml:2: top",
        "a.xml:5: first",
        "a.xml:5: second",
        "b.xml:9: late",
        "4 messages",
    ]


def test_emit_deduplicates_identical_messages():
    m = msg("a.xml", 1, 0, "once")
    out = emit_report([m, m, m], [], "text")
    assert out.splitlines() == ["a.xml:1: once", "1 messages"]


def test_solution_key_separates_same_position_messages():
    msgs = [msg("a.xml", 1, 0, "co-pub with p2", key="O=p2"),
            msg("a.xml", 1, 0, "co-pub with p1", key="O=p1")]
    out = emit_report(msgs, [], "text")
    assert out.splitlines()[:2] == ["a.xml:1: co-pub with p1",
                                    "a.xml:1: co-pub with p2"]


def test_emit_html_list():
    out = emit_report([msg("a.xml", 1, 0, "warn & done")], [], "html")
    assert out == ("<ul>\n<li> warn & done </li>\n</ul>\n"
                   "<p>1 messages</p>\n")


def test_emit_html_wraps_bare_fragments_and_escapes_diagnostics():
    bare = Message(SourcePos("a.xml", 1), 0, "plain html", "plain text", "")
    out = emit_report([bare], ["diag <x>"], "html")
    lines = out.splitlines()
    assert lines[0] == '<p class="diagnostic">diag &lt;x&gt;</p>'
    assert "<li>plain html</li>" in lines


def test_emit_machine_json_lines():
    out = emit_report([msg("a.xml", 3, 1, "warn")], ["oops"], "machine")
    records = [json.loads(line) for line in out.splitlines()]
    assert records[0] == {"diagnostic": "oops"}
    assert records[1] == {"file": "a.xml", "line": 3, "rule": 1,
                          "text": "warn", "html": "<li> warn </li>"}
    assert records[2] == {"messages": 1}


def test_emit_unknown_format_rejected():
    with pytest.raises(ValueError):
        emit_report([], [], "yaml")


def test_empty_report_has_summary_only():
    assert emit_report([], [], "text") == "0 messages\n"
    assert emit_report([], [], "html") == "<ul>\n</ul>\n<p>0 messages</p>\n"
