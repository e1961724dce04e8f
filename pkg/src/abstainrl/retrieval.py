"""Implicit reasoning-information extraction.

Rule-based pieces: year-expression parsing, time-relevant sub-context
filtering, a temporal knowledge-graph store with semantic (trigram-cosine)
and lexical (keyword-overlap) top-k retrieval, and quadruple rephrasing.
An optional remote client can delegate extraction to a hosted model; every
acceptance path works without it.
"""

from __future__ import annotations

import enum
import json
import os
import re
import urllib.error
import urllib.request
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from abstainrl import prompts
from abstainrl.synthenv import YEAR_FLOOR, YEAR_HORIZON, TemporalFact, TimeInterval
from abstainrl.textmetrics import cosine, normalize_text, trigram_embedding

DEFAULT_TOP_K = 10
DEFAULT_MAX_KEYWORDS = 5

EmbeddingFn = Callable[[str], np.ndarray]


@dataclass(frozen=True)
class Quadruple:
    head: str
    relation: str
    tail: str
    timestamp: str | None = None

    def __post_init__(self) -> None:
        if not self.head or not self.relation or not self.tail:
            raise ValueError("quadruples need non-empty head, relation, and tail")


def kg_sentence(quad: Quadruple) -> str:
    """Space-joined serialization: head relation tail [timestamp]."""
    parts = [quad.head, quad.relation, quad.tail]
    if quad.timestamp is not None:
        parts.append(quad.timestamp)
    return " ".join(parts)


def fact_to_quadruple(fact: TemporalFact) -> Quadruple:
    return Quadruple(
        head=fact.subject,
        relation=fact.relation,
        tail=fact.obj,
        timestamp=f"{fact.scope.start}-{fact.scope.end}",
    )


class KGStore:
    """Append-only quadruple store with parallel serialized sentences."""

    def __init__(self, quads: Iterable[Quadruple] = ()) -> None:
        self._quads: list[Quadruple] = []
        self._sentences: list[str] = []
        for quad in quads:
            self.add(quad)

    def add(self, quad: Quadruple) -> None:
        self._quads.append(quad)
        self._sentences.append(kg_sentence(quad))

    def __len__(self) -> int:
        return len(self._quads)

    @property
    def quads(self) -> list[Quadruple]:
        return list(self._quads)

    @property
    def sentences(self) -> list[str]:
        return list(self._sentences)

    def write_jsonl(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for quad in self._quads:
                fh.write(
                    json.dumps(
                        {
                            "head": quad.head,
                            "relation": quad.relation,
                            "tail": quad.tail,
                            "timestamp": quad.timestamp,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

    @classmethod
    def read_jsonl(cls, path: str | Path) -> "KGStore":
        store = cls()
        with Path(path).open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    d = json.loads(line)
                    store.add(
                        Quadruple(d["head"], d["relation"], d["tail"], d.get("timestamp"))
                    )
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad quadruple record: {exc}") from exc
        return store


# --- time-expression parsing ---------------------------------------------------

_RANGE_RES = (
    re.compile(r"\bfrom\s+(\d{4})\s+to\s+(\d{4})\b", re.IGNORECASE),
    re.compile(r"\b(\d{4})\s*[-–—]\s*(\d{4})\b"),
)
_AFTER_RE = re.compile(r"\b(?:since|after)\s+(\d{4})\b", re.IGNORECASE)
_BEFORE_RE = re.compile(r"\b(?:before|until)\s+(\d{4})\b", re.IGNORECASE)
_YEAR_RE = re.compile(r"\b(\d{4})\b")


def parse_time_expressions(sentence: str) -> list[TimeInterval]:
    """Year-granularity intervals mentioned in a sentence, in order of
    appearance.  Open-ended phrases clamp to the supported year range."""
    found: list[tuple[int, TimeInterval]] = []
    consumed: list[tuple[int, int]] = []

    def _take(start: int, end: int, interval: TimeInterval) -> None:
        found.append((start, interval))
        consumed.append((start, end))

    def _free(start: int, end: int) -> bool:
        return all(end <= lo or start >= hi for lo, hi in consumed)

    for pattern in _RANGE_RES:
        for m in pattern.finditer(sentence):
            if _free(m.start(), m.end()):
                a, b = int(m.group(1)), int(m.group(2))
                if a <= b:
                    _take(m.start(), m.end(), TimeInterval(a, b))
    for m in _AFTER_RE.finditer(sentence):
        if _free(m.start(), m.end()):
            y = int(m.group(1))
            _take(m.start(), m.end(), TimeInterval(min(y + 1, YEAR_HORIZON), YEAR_HORIZON))
    for m in _BEFORE_RE.finditer(sentence):
        if _free(m.start(), m.end()):
            y = int(m.group(1))
            _take(m.start(), m.end(), TimeInterval(YEAR_FLOOR, max(y - 1, YEAR_FLOOR)))
    for m in _YEAR_RE.finditer(sentence):
        if _free(m.start(), m.end()):
            y = int(m.group(1))
            _take(m.start(), m.end(), TimeInterval(y, y))
    found.sort(key=lambda pair: pair[0])
    return [interval for _, interval in found]


def split_sentences(context: str) -> list[str]:
    """Split on period/semicolon boundaries, keeping each sentence's text."""
    return [s.strip() for s in re.findall(r"[^.;]+[.;]?", context) if s.strip()]


def extract_time_sentences(question_interval: TimeInterval, context: str) -> list[str]:
    """Sentences whose parsed time expressions intersect the question interval,
    in original order and with original text."""
    kept = []
    for sentence in split_sentences(context):
        for interval in parse_time_expressions(sentence):
            if interval.intersects(question_interval.start, question_interval.end):
                kept.append(sentence)
                break
    return kept


# --- top-k retrieval ------------------------------------------------------------

def default_embedding(text: str) -> np.ndarray:
    """Deterministic hashed character-trigram embedding (dimension 512)."""
    return trigram_embedding(text)


def _ranked(scores: Sequence[float], k: int) -> list[int]:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return order[: min(k, len(scores))]


def topk_semantic(
    store: KGStore,
    query: str,
    k: int = DEFAULT_TOP_K,
    embed: EmbeddingFn = default_embedding,
) -> list[tuple[Quadruple, float]]:
    """Top-k facts by cosine similarity between embedded query and embedded
    fact sentences; ties break toward earlier store entries."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(store) == 0:
        raise ValueError("cannot query an empty store")
    qv = embed(query)
    scores = [cosine(qv, embed(sentence)) for sentence in store.sentences]
    quads = store.quads
    return [(quads[i], scores[i]) for i in _ranked(scores, k)]


_STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are aren't as at be
    because been before being below between both but by can cannot could
    couldn't did didn't do does doesn't doing don't down during each few for
    from further had hadn't has hasn't have haven't having he her here hers
    herself him himself his how i if in into is isn't it its itself just me
    more most my myself no nor not of off on once only or other our ours
    ourselves out over own same she should shouldn't so some such than that
    the their theirs them themselves then there these they this those through
    to too under until up very was wasn't we were weren't what when where
    which while who whom why will with won't would wouldn't you your yours
    yourself yourselves
    """.split()
)


def extract_keywords(question: str, max_k: int = DEFAULT_MAX_KEYWORDS) -> list[str]:
    """Salient question keywords: stopword-filtered normalized tokens ranked by
    frequency, then length (longer first), then lexicographically."""
    if max_k < 1:
        raise ValueError("max_k must be >= 1")
    counts: dict[str, int] = {}
    for token in normalize_text(question):
        if token not in _STOPWORDS:
            counts[token] = counts.get(token, 0) + 1
    ranked = sorted(counts, key=lambda t: (-counts[t], -len(t), t))
    return ranked[:max_k]


def topk_lexical(
    store: KGStore, question: str, k: int = DEFAULT_TOP_K
) -> list[tuple[Quadruple, int]]:
    """Top-k facts by the number of question keywords present in the fact's
    head, relation, tail, or timestamp (token match after normalization)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(store) == 0:
        raise ValueError("cannot query an empty store")
    keywords = extract_keywords(question)
    scores: list[int] = []
    for quad in store.quads:
        tokens: set[str] = set()
        for part in (quad.head, quad.relation, quad.tail, quad.timestamp or ""):
            tokens.update(normalize_text(part))
        scores.append(sum(1 for kw in keywords if kw in tokens))
    quads = store.quads
    return [(quads[i], scores[i]) for i in _ranked([float(s) for s in scores], k)]


def rephrase_quadruples(quads: Sequence[Quadruple]) -> str:
    """One templated natural-language sentence per quadruple, newline-joined."""
    lines = []
    for quad in quads:
        if quad.timestamp is not None:
            lines.append(f"{quad.head}'s {quad.relation} was {quad.tail} during {quad.timestamp}.")
        else:
            lines.append(f"{quad.head}'s {quad.relation} was {quad.tail}.")
    return "\n".join(lines)


# --- optional remote extraction client ------------------------------------------

class PromptKind(enum.Enum):
    SUB_CONTEXT = "sub-context"
    KG = "kg"


class ExtractionError(RuntimeError):
    """Base class for remote-extraction failures."""


class TransportError(ExtractionError):
    """Network-level failure: refused connection, timeout, HTTP error."""


class ResponseFormatError(ExtractionError):
    """The service replied with something that is not the expected JSON."""


class SchemaError(ExtractionError):
    """The extraction payload is JSON but violates the expected schema."""


@dataclass(frozen=True)
class ExtractionClientConfig:
    endpoint: str
    model: str
    api_key_env: str = "ABSTAINRL_API_KEY"
    timeout: float = 30.0
    prompt_kind: PromptKind = PromptKind.SUB_CONTEXT

    def __post_init__(self) -> None:
        if not self.endpoint.startswith(("http://", "https://")):
            raise ValueError(f"endpoint must be an http(s) URL, got {self.endpoint!r}")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


_QUAD_KEYS = {"head", "head_type", "relation", "tail", "tail_type", "timestamp"}


def _parse_sub_context_payload(payload) -> list[str]:
    if not isinstance(payload, list) or any(not isinstance(s, str) for s in payload):
        raise SchemaError("expected a JSON list of sentences")
    return payload


def _parse_kg_payload(payload) -> list[Quadruple]:
    if not isinstance(payload, list):
        raise SchemaError("expected a JSON list of quadruple objects")
    quads = []
    for entry in payload:
        if not isinstance(entry, dict) or not _QUAD_KEYS.issubset(entry):
            missing = _QUAD_KEYS - set(entry) if isinstance(entry, dict) else _QUAD_KEYS
            raise SchemaError(f"quadruple object missing keys: {sorted(missing)}")
        timestamp = entry["timestamp"]
        if timestamp is not None and not isinstance(timestamp, str):
            raise SchemaError("timestamp must be a string or null")
        try:
            quads.append(
                Quadruple(str(entry["head"]), str(entry["relation"]), str(entry["tail"]), timestamp)
            )
        except ValueError as exc:
            raise SchemaError(str(exc)) from exc
    return quads


def llm_extract(
    cfg: ExtractionClientConfig, question: str, context: str
) -> list[str] | list[Quadruple]:
    """Send the extraction prompt to a hosted model and parse the reply.

    Returns sentences for SUB_CONTEXT, quadruples for KG.  Raises
    TransportError / ResponseFormatError / SchemaError so callers can fall
    back to the rule-based extractors.
    """
    api_key = os.environ.get(cfg.api_key_env)
    if not api_key:
        raise TransportError(
            f"environment variable {cfg.api_key_env} is not set; cannot authenticate"
        )
    template = (
        prompts.SUB_CONTEXT_EXTRACTION_PROMPT
        if cfg.prompt_kind is PromptKind.SUB_CONTEXT
        else prompts.KG_EXTRACTION_PROMPT
    )
    body = json.dumps(
        {
            "model": cfg.model,
            "messages": [
                {"role": "user", "content": template.format(question=question, context=context)}
            ],
        }
    ).encode("utf-8")
    request = urllib.request.Request(
        cfg.endpoint,
        data=body,
        headers={
            "Content-Type": "application/json",
            "Authorization": f"Bearer {api_key}",
        },
        method="POST",
    )
    try:
        with urllib.request.urlopen(request, timeout=cfg.timeout) as response:
            raw = response.read().decode("utf-8")
    except (urllib.error.URLError, urllib.error.HTTPError, TimeoutError, OSError) as exc:
        raise TransportError(f"request to {cfg.endpoint} failed: {exc}") from exc

    try:
        envelope = json.loads(raw)
        content = envelope["choices"][0]["message"]["content"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise ResponseFormatError(f"unexpected response envelope: {exc}") from exc
    try:
        payload = json.loads(content)
    except json.JSONDecodeError as exc:
        raise ResponseFormatError(f"message content is not JSON: {exc}") from exc

    if cfg.prompt_kind is PromptKind.SUB_CONTEXT:
        return _parse_sub_context_payload(payload)
    return _parse_kg_payload(payload)


# --- crude rule-based KG fallback ------------------------------------------------

_CAP_SPAN_RE = re.compile(r"\b(?:[A-Z][\w'-]*)(?:\s+[A-Z][\w'-]*)*")


def quadruples_from_context(question: str, context: str) -> list[Quadruple]:
    """Heuristic quadruples from time-bearing sentences: first capitalized span
    as head, last as tail, with the sentence's first time expression as the
    timestamp.  A deliberately rough offline stand-in for model extraction."""
    quads: list[Quadruple] = []
    for sentence in split_sentences(context):
        intervals = parse_time_expressions(sentence)
        if not intervals:
            continue
        spans = [m.group(0) for m in _CAP_SPAN_RE.finditer(sentence)]
        spans = [s for s in spans if not s.isdigit()]
        if len(spans) < 2:
            continue
        first = intervals[0]
        quads.append(
            Quadruple(
                head=spans[0],
                relation="associated_with",
                tail=spans[-1],
                timestamp=f"{first.start}-{first.end}",
            )
        )
    return quads
