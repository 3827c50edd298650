"""Prompt construction, completion backends and response parsing.

Backends:

* ``http``: chat-completion style endpoint, retried with exponential backoff.
* ``replay``: responses read from a fixture directory keyed by prompt
  fingerprint; never touches the network.
* ``stub``: scripted text for tests and demos.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from string import Template
from typing import Callable, Iterable, Mapping, Sequence

from .kg_store import LabeledTriple, base_of, is_inverse
from .rules import Rule, RuleParseError, parse_rule, render_rule

log = logging.getLogger(__name__)

RULE_MINING = "rule_mining"
TSP = "tsp"
RULE_MINING_SECTIONS = ("background", "relations", "rule_head", "example", "notes")
TEMPLATE_VERSION = "v1"


class PromptError(ValueError):
    pass


class BackendError(RuntimeError):
    pass


class FixtureMissingError(BackendError):
    def __init__(self, fingerprint: str, directory):
        super().__init__(f"no replay fixture for prompt {fingerprint} in {directory}")
        self.fingerprint = fingerprint


# -- prompts -----------------------------------------------------------------

@dataclass(frozen=True)
class PromptDoc:
    kind: str
    sections: tuple[tuple[str, str], ...]
    rendered: str
    fingerprint: str
    empty_context: bool = False

    def section(self, name: str) -> str:
        return dict(self.sections)[name]


def _load_template(name: str) -> list[tuple[str, str]]:
    text = resources.files("llmtsp.templates").joinpath(f"{name}_{TEMPLATE_VERSION}.txt") \
        .read_text(encoding="utf-8")
    sections = []
    for chunk in re.split(r"^## ", text, flags=re.M)[1:]:
        title, _, body = chunk.partition("\n")
        sections.append((title.strip(), body.rstrip("\n")))
    return sections


def _make_prompt(kind: str, template: str, values: Mapping[str, str],
                 empty_context: bool = False) -> PromptDoc:
    sections = tuple((name, Template(body).substitute(values))
                     for name, body in _load_template(template))
    rendered = "\n\n".join(f"### {name.replace('_', ' ').title()}\n{body}"
                           for name, body in sections) + "\n"
    digest = hashlib.sha256(f"{kind}\n{rendered}".encode("utf-8")).hexdigest()[:16]
    return PromptDoc(kind, sections, rendered, digest, empty_context)


def build_rule_prompt(relations: Sequence[str], head: str) -> PromptDoc:
    relations = list(dict.fromkeys(relations))
    if head not in relations:
        raise PromptError(f"rule head {head!r} is not among the relations")
    return _make_prompt(RULE_MINING, "rule_mining", {
        "relations": "\n".join(f"- {r}" for r in relations),
        "head": head,
    })


def describe_atom(relation: str, a: str, b: str) -> str:
    if is_inverse(relation):
        return f"{b} {base_of(relation)} {a}"
    return f"{a} {relation} {b}"


def explain_rule(rule: Rule) -> str:
    """A plain-language reading of the rule, e.g. for the prediction prompt."""
    v = ["X", *(f"Z{i}" for i in range(1, rule.length)), "Y"]
    body = " and ".join(describe_atom(r, v[i], v[i + 1]) for i, r in enumerate(rule.body))
    return f"if {body}, then {describe_atom(rule.head, 'X', 'Y')}."


def format_triple(t: LabeledTriple) -> str:
    return f"({t[0]}, {t[1]}, {t[2]})"


def build_tsp_prompt(rule: Rule, explanation: str, triples: Iterable[LabeledTriple]) -> PromptDoc:
    triples = list(dict.fromkeys(triples))
    return _make_prompt(TSP, "tsp", {
        "rule": render_rule(rule),
        "explanation": explanation,
        "count": str(len(triples)),
        "triples": "\n".join(format_triple(t) for t in triples) or "(none)",
    }, empty_context=not triples)


# -- backends ----------------------------------------------------------------

Stub = str | Mapping[str, str] | Callable[[PromptDoc], str]


@dataclass
class BackendConfig:
    mode: str = "stub"
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-4o"
    temperature: float = 0.0
    max_tokens: int = 2048
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 1.0
    fixture_dir: str | None = None
    capture_dir: str | None = None
    api_key_env: str = "OPENAI_API_KEY"
    max_in_flight: int = 4
    min_interval: float = 0.0
    verbose: bool = False
    stub: Stub | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in ("http", "replay", "stub"):
            raise ValueError(f"unknown backend mode {self.mode!r}")
        if self.mode == "replay" and not self.fixture_dir:
            raise ValueError("replay mode needs a fixture directory")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def fingerprint(self) -> str:
        if self.mode == "http":
            return f"http:{self.model}:t={self.temperature}"
        return self.mode


def fixture_path(directory, fingerprint: str) -> Path:
    return Path(directory) / f"{fingerprint}.txt"


def read_fixture(directory, fingerprint: str) -> tuple[dict, str]:
    path = fixture_path(directory, fingerprint)
    if not path.is_file():
        raise FixtureMissingError(fingerprint, directory)
    meta, _, body = path.read_text(encoding="utf-8").partition("\n")
    return json.loads(meta), body


_capture_lock = threading.Lock()


def record_fixture(directory, prompt: PromptDoc, text: str, model: str,
                   timestamp: str | None = None) -> Path:
    meta = {"model": model, "kind": prompt.kind,
            "timestamp": timestamp or time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
    path = fixture_path(directory, prompt.fingerprint)
    with _capture_lock:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(meta, sort_keys=True) + "\n" + text, encoding="utf-8")
    return path


def _redact(headers: Mapping[str, str]) -> dict:
    return {k: ("***" if k.lower() == "authorization" else v) for k, v in headers.items()}


def _complete_http(prompt: PromptDoc, backend: BackendConfig, client=None,
                   sleep=time.sleep) -> str:
    import httpx

    key = os.environ.get(backend.api_key_env, "")
    headers = {"Content-Type": "application/json"}
    if key:
        headers["Authorization"] = f"Bearer {key}"
    payload = {
        "model": backend.model,
        "messages": [{"role": "user", "content": prompt.rendered}],
        "temperature": backend.temperature,
        "max_tokens": backend.max_tokens,
    }
    own = client is None
    if own:
        client = httpx.Client(timeout=backend.timeout)
    try:
        last = None
        for attempt in range(backend.max_retries + 1):
            if attempt:
                sleep(backend.backoff * 2 ** (attempt - 1))
            if backend.verbose:
                log.debug("POST %s headers=%s body=%s", backend.endpoint,
                          _redact(headers), json.dumps(payload))
            try:
                resp = client.post(backend.endpoint, json=payload, headers=headers,
                                   timeout=backend.timeout)
            except httpx.TransportError as exc:
                last = exc
                log.warning("transport failure on %s (attempt %d): %s",
                            prompt.fingerprint, attempt + 1, exc)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = BackendError(f"HTTP {resp.status_code}")
                log.warning("HTTP %d on %s (attempt %d)", resp.status_code,
                            prompt.fingerprint, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            body = resp.json()
            if backend.verbose:
                log.debug("response %s", json.dumps(body))
            try:
                return body["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError):
                raise BackendError(f"unexpected response shape: {str(body)[:200]}") from None
        raise BackendError(f"gave up after {backend.max_retries + 1} attempts: {last}")
    finally:
        if own:
            client.close()


def complete(prompt: PromptDoc, backend: BackendConfig, client=None,
             sleep=time.sleep) -> str:
    if backend.mode == "replay":
        return read_fixture(backend.fixture_dir, prompt.fingerprint)[1]
    if backend.mode == "stub":
        stub = backend.stub
        if callable(stub):
            return stub(prompt)
        if isinstance(stub, Mapping):
            if prompt.fingerprint not in stub:
                raise FixtureMissingError(prompt.fingerprint, "stub mapping")
            return stub[prompt.fingerprint]
        return stub or ""
    text = _complete_http(prompt, backend, client=client, sleep=sleep)
    if backend.capture_dir:
        record_fixture(backend.capture_dir, prompt, text, backend.model)
    return text


class _Throttle:
    def __init__(self, interval: float):
        self.interval = interval
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self):
        if self.interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            start = max(now, self._next)
            self._next = start + self.interval
        if start > now:
            time.sleep(start - now)


def complete_many(prompts: Sequence[PromptDoc], backend: BackendConfig,
                  client=None) -> list[str | Exception]:
    """Complete prompts concurrently (bounded); results keep input order.

    Failures are returned in place as exceptions rather than raised.
    """
    throttle = _Throttle(backend.min_interval)

    def one(p):
        throttle.wait()
        try:
            return complete(p, backend, client=client)
        except Exception as exc:  # noqa: BLE001 - reported per request
            return exc

    if backend.max_in_flight <= 1 or len(prompts) <= 1:
        return [one(p) for p in prompts]
    with ThreadPoolExecutor(max_workers=backend.max_in_flight) as pool:
        return list(pool.map(one, prompts))


# -- response parsing --------------------------------------------------------

@dataclass
class MinedRules:
    rules: list[Rule] = field(default_factory=list)
    rejects: list[tuple[str, str]] = field(default_factory=list)


_ARROW_HINT = re.compile(r"<-|⟵|←|:-")
_LIST_PREFIX = re.compile(r"^\s*(?:[-*•>]+|\(?\d+[.):]|rule\s*\d*\s*[:.)-])\s*", re.I)
_ATOM_START = re.compile(r"[A-Za-z_]\w*\s*\(")
_RULE_EXPR = re.compile(r"[A-Za-z_]\w*\s*\([^()]*\)(?:\s*(?:<-|⟵|←|:-|\^|∧|&)\s*[A-Za-z_]\w*\s*\([^()]*\))*")


def parse_mined_rules(text: str) -> MinedRules:
    """Pull rule lines out of a free-form response.

    Any line with an arrow and an atom is a candidate; each candidate ends up
    either in ``rules`` or in ``rejects`` with the reason.
    """
    out = MinedRules()
    for raw in text.splitlines():
        if not _ARROW_HINT.search(raw) or "(" not in raw:
            continue
        line = raw.replace("`", "").replace("*", "").strip()
        prev = None
        while prev != line:
            prev, line = line, _LIST_PREFIX.sub("", line, count=1)
        start = _ATOM_START.search(line)
        end = line.rfind(")")
        if not start or end < start.start():
            out.rejects.append((raw.strip(), "no atom found"))
            continue
        # stop at the last atom of the expression so trailing glosses are dropped
        expr = _RULE_EXPR.match(line, start.start())
        if expr and _ARROW_HINT.search(expr.group()):
            end = expr.end() - 1
        try:
            out.rules.append(parse_rule(line[start.start():end + 1]))
        except RuleParseError as exc:
            out.rejects.append((raw.strip(), str(exc)))
    return out


@dataclass(frozen=True)
class PredictionRecord:
    predicted: LabeledTriple
    premises: tuple[LabeledTriple, ...]
    rule: Rule
    subgraph_id: int
    span: tuple[int, int] = (0, 0)
    provenance: str = ""

    def to_json(self) -> str:
        return json.dumps({
            "subgraph": self.subgraph_id,
            "rule": render_rule(self.rule),
            "predicted": list(self.predicted),
            "premises": [list(p) for p in self.premises],
            "span": list(self.span),
            "provenance": self.provenance,
        }, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "PredictionRecord":
        d = json.loads(line)
        return cls(tuple(d["predicted"]), tuple(tuple(p) for p in d["premises"]),
                   parse_rule(d["rule"]), int(d["subgraph"]), tuple(d["span"]),
                   d.get("provenance", ""))


_TUPLE = re.compile(r"\(\s*([^(),;\n]+?)\s*,\s*([^(),;\n]+?)\s*,\s*([^(),;\n]+?)\s*\)")
_MARKER = re.compile(r"^[ \t>*_`#\d.)-]*(PREMISES?|PREDICTIONS?)[ \t*_`]*:(.*)$", re.I | re.M)


def _clean(label: str) -> str:
    return label.strip().strip("'\"`*").strip()


def _tuples(text: str, offset: int = 0):
    for m in _TUPLE.finditer(text):
        yield (_clean(m.group(1)), _clean(m.group(2)), _clean(m.group(3))), \
            (offset + m.start(), offset + m.end())


def parse_predictions(text: str, rule: Rule, subgraph_id: int,
                      known_relations: Iterable[str] | None = None,
                      provenance: str = "") -> list[PredictionRecord]:
    """Extract predicted triples (and cited premises) from a response.

    ``PREMISES:`` / ``PREDICTION:`` lines are used when any ``PREDICTION:``
    line exists. Otherwise every ``(h, r, t)`` tuple whose relation is in
    ``known_relations`` (default: the rule head) becomes a premise-less record.
    """
    records: list[PredictionRecord] = []
    markers = list(_MARKER.finditer(text))
    if any(m.group(1).upper().startswith("PREDICTION") for m in markers):
        pending: list[LabeledTriple] = []
        pending_start = None
        for m in markers:
            body_offset = m.start(2)
            if m.group(1).upper().startswith("PREMISE"):
                if pending_start is None:
                    pending_start = m.start()
                pending.extend(t for t, _ in _tuples(m.group(2)))
                continue
            start = pending_start if pending_start is not None else m.start()
            for triple, (_, end) in _tuples(m.group(2), body_offset):
                records.append(PredictionRecord(triple, tuple(pending), rule, subgraph_id,
                                                (start, end), provenance))
            pending, pending_start = [], None
        return records

    allowed = set(known_relations) if known_relations is not None else {rule.head}
    for triple, span in _tuples(text):
        if triple[1] in allowed:
            records.append(PredictionRecord(triple, (), rule, subgraph_id, span, provenance))
    return records
