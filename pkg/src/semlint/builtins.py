"""Host-implemented predicates: year comparison, member lookup,
co-publication search and URL liveness probing.
"""

from __future__ import annotations

import threading
import unicodedata
import urllib.error
import urllib.parse
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

from .engine import BuiltinError, BuiltinRegistry, FactStore
from .matcher import Bindings, SVal, TermVal, Value, string_projection
from .terms import Functor, Str, Term, Var


class InstantiationError(BuiltinError):
    pass


def _arg(t: Term, b: Bindings) -> Union[Value, str]:
    """Resolve a goal argument: a Value if bound, the var name if unbound."""
    if isinstance(t, Var):
        value = b.get(t.name)
        return value if value is not None else t.name
    if isinstance(t, Str):
        return SVal(t.value)
    return TermVal(t)


def _bound_text(t: Term, b: Bindings, pred: str) -> str:
    value = _arg(t, b)
    if isinstance(value, str):
        raise InstantiationError(f"{pred}: argument ${value} must be bound")
    return string_projection(value)


def _unbound_name(t: Term, b: Bindings, pred: str) -> str:
    value = _arg(t, b)
    if not isinstance(value, str):
        raise InstantiationError(f"{pred}: output argument must be unbound")
    return value


# -- URL probing ---------------------------------------------------------------

OK = "ok"
HTTP_ERROR = "http_error"
UNREACHABLE = "unreachable"
TIMEOUT = "timeout"
MALFORMED = "malformed"


@dataclass(frozen=True)
class UrlProbeResult:
    url: str
    kind: str
    status: Optional[int] = None
    detail: str = ""

    @property
    def live(self) -> bool:
        return self.kind == OK


class HttpProber:
    """HEAD probe (GET on method rejection) with memoization per URL."""

    def __init__(self, timeout: float = 10.0, max_workers: int = 8):
        self.timeout = timeout
        self.max_workers = max(1, max_workers)
        self._memo: dict[str, UrlProbeResult] = {}
        self._lock = threading.Lock()
        self.probe_count = 0

    def probe(self, url: str) -> UrlProbeResult:
        with self._lock:
            if url in self._memo:
                return self._memo[url]
        result = self._probe_uncached(url)
        with self._lock:
            self._memo.setdefault(url, result)
            return self._memo[url]

    def prefetch(self, urls: list[str]) -> None:
        pending = []
        with self._lock:
            for url in dict.fromkeys(urls):
                if url not in self._memo:
                    pending.append(url)
        if not pending:
            return
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            list(pool.map(self.probe, pending))

    def _probe_uncached(self, url: str) -> UrlProbeResult:
        parsed = urllib.parse.urlparse(url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            return UrlProbeResult(url, MALFORMED, detail="not an absolute "
                                                         "http/https URL")
        with self._lock:
            self.probe_count += 1
        result = self._request(url, "HEAD")
        # some servers reject HEAD outright; retry with GET before judging
        if result.kind == HTTP_ERROR and result.status in (405, 501):
            result = self._request(url, "GET")
        return result

    def _request(self, url: str, method: str) -> UrlProbeResult:
        req = urllib.request.Request(url, method=method)
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return UrlProbeResult(url, OK, status=resp.status)
        except urllib.error.HTTPError as exc:
            return UrlProbeResult(url, HTTP_ERROR, status=exc.code,
                                  detail=exc.reason or "")
        except TimeoutError:
            return UrlProbeResult(url, TIMEOUT, detail="timed out")
        except urllib.error.URLError as exc:
            reason = exc.reason
            if isinstance(reason, TimeoutError):
                return UrlProbeResult(url, TIMEOUT, detail="timed out")
            return UrlProbeResult(url, UNREACHABLE, detail=str(reason))
        except OSError as exc:
            return UrlProbeResult(url, UNREACHABLE, detail=str(exc))


class StubProber:
    """Canned probe results for tests; records every URL asked for."""

    def __init__(self, results: dict[str, UrlProbeResult] | None = None):
        self.results = dict(results) if results else {}
        self.calls: list[str] = []

    def probe(self, url: str) -> UrlProbeResult:
        self.calls.append(url)
        if url in self.results:
            return self.results[url]
        return UrlProbeResult(url, UNREACHABLE, detail="no stub entry")

    def prefetch(self, urls: list[str]) -> None:
        pass


def probe_answers(result: UrlProbeResult) -> Optional[tuple[str, str]]:
    """(answer1, answer2) for a failing probe; None when the URL is live."""
    if result.kind == OK:
        return None
    if result.kind == HTTP_ERROR:
        return (f"{result.url}:", f"ERROR {result.status}: {result.detail}")
    if result.kind == MALFORMED:
        return ("Malformed URL", result.url)
    return ("No answer or time out,",
            "The server seems to be down or does not exist")


# -- registry ------------------------------------------------------------------

def strip_accents(s: str) -> str:
    decomposed = unicodedata.normalize("NFD", s)
    return "".join(c for c in decomposed
                   if unicodedata.category(c) != "Mn").casefold()


def make_registry(prober=None, offline: bool = False,
                  normalize_names: bool = False) -> BuiltinRegistry:
    prober = prober if prober is not None else HttpProber()

    def sameyear(args, b, store):
        a = _bound_text(args[0], b, "sameyear").strip()
        c = _bound_text(args[1], b, "sameyear").strip()
        try:
            equal = int(a) == int(c)
        except ValueError:
            equal = a == c
        return [b] if equal else []

    def personne1(args, b, store):
        wanted = tuple(_bound_text(a, b, "personne1") for a in args)
        if normalize_names:
            wanted = tuple(strip_accents(w) for w in wanted)
        for fact in store.lookup("personne", 3):
            got = tuple(a.value if isinstance(a, Str) else ""
                        for a in fact.term.args)
            if normalize_names:
                got = tuple(strip_accents(g) for g in got)
            if got == wanted:
                return [b]
        return []

    def pubbyotherproject(args, b, store):
        title = _bound_text(args[0], b, "pubbyotherproject")
        project = _bound_text(args[1], b, "pubbyotherproject")
        other = _unbound_name(args[2], b, "pubbyotherproject")
        out = []
        for fact in store.lookup("pub", 2):
            fact_title, fact_proj = fact.term.args
            if not isinstance(fact_title, Str) or not isinstance(fact_proj,
                                                                 Str):
                continue
            if fact_title.value == title and fact_proj.value != project:
                out.append(b.bind(other, SVal(fact_proj.value)))
        return out

    def testurl(args, b, store):
        url = _bound_text(args[0], b, "testurl")
        a1 = _unbound_name(args[1], b, "testurl")
        a2 = _unbound_name(args[2], b, "testurl")
        if offline:
            return []
        answers = probe_answers(prober.probe(url))
        if answers is None:
            return []
        return [b.bind(a1, SVal(answers[0])).bind(a2, SVal(answers[1]))]

    return {
        ("sameyear", 2): sameyear,
        ("personne1", 3): personne1,
        ("pubbyotherproject", 3): pubbyotherproject,
        ("testurl", 3): testurl,
    }
