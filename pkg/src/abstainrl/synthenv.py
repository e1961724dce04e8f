"""Synthetic temporal-QA generation, TimeQA-style ingestion, and the
abstained multiple-choice dataset builder.

Every generated item is consistent by construction: the gold answer equals
what the answerability oracle derives from the item's facts and time
specifier.  The observable context feature may hide the true evidence signal
(collapsing it to "no evidence") with a configurable probability, which is
what makes abstention a genuine decision problem for the policy.
"""

from __future__ import annotations

import enum
import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from abstainrl.policy import ContextFeature, Difficulty, Evidence
from abstainrl.textmetrics import GoldAnswer, normalize_text

YEAR_FLOOR = 1800
YEAR_HORIZON = 2100

# Fraction of unanswerable items whose facts conflict (the rest have no
# fact in the queried window).  Tests derive closed-form reward oracles
# from this constant, so keep it in sync with _generate_item.
CONTRADICT_FRACTION = 0.5


class DatasetError(ValueError):
    """Raised for malformed dataset files or invalid source records."""


@dataclass(frozen=True)
class TimeInterval:
    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"interval start {self.start} exceeds end {self.end}")

    def contains(self, year: int) -> bool:
        return self.start <= year <= self.end

    def intersects(self, lo: int, hi: int) -> bool:
        return self.start <= hi and self.end >= lo


@dataclass(frozen=True)
class TemporalFact:
    subject: str
    relation: str
    obj: str
    scope: TimeInterval

    def __post_init__(self) -> None:
        if not self.subject or not self.relation or not self.obj:
            raise ValueError("facts need non-empty subject, relation, and object")


class SpecKind(enum.Enum):
    IN_YEAR = "in_year"
    BETWEEN = "between"
    AFTER = "after"
    BEFORE = "before"
    EARLY_DECADE = "early_decade"


_EASY_KINDS = (SpecKind.IN_YEAR, SpecKind.BETWEEN)
_HARD_KINDS = (SpecKind.AFTER, SpecKind.BEFORE, SpecKind.EARLY_DECADE)


@dataclass(frozen=True)
class TimeSpecifier:
    kind: SpecKind
    years: tuple[int, ...]

    def __post_init__(self) -> None:
        expected = 2 if self.kind is SpecKind.BETWEEN else 1
        if len(self.years) != expected:
            raise ValueError(f"{self.kind.value} takes {expected} year(s)")
        if self.kind is SpecKind.BETWEEN and self.years[0] > self.years[1]:
            raise ValueError("between requires a <= b")

    @classmethod
    def in_year(cls, y: int) -> "TimeSpecifier":
        return cls(SpecKind.IN_YEAR, (y,))

    @classmethod
    def between(cls, a: int, b: int) -> "TimeSpecifier":
        return cls(SpecKind.BETWEEN, (a, b))

    @classmethod
    def after(cls, y: int) -> "TimeSpecifier":
        return cls(SpecKind.AFTER, (y,))

    @classmethod
    def before(cls, y: int) -> "TimeSpecifier":
        return cls(SpecKind.BEFORE, (y,))

    @classmethod
    def early_decade(cls, d: int) -> "TimeSpecifier":
        return cls(SpecKind.EARLY_DECADE, (d,))

    @property
    def difficulty(self) -> Difficulty:
        return Difficulty.EASY if self.kind in _EASY_KINDS else Difficulty.HARD

    def window(self) -> tuple[int, int]:
        """The inclusive year range a fact scope must intersect to match."""
        if self.kind is SpecKind.IN_YEAR:
            return self.years[0], self.years[0]
        if self.kind is SpecKind.BETWEEN:
            return self.years
        if self.kind is SpecKind.AFTER:
            return self.years[0] + 1, YEAR_HORIZON
        if self.kind is SpecKind.BEFORE:
            return YEAR_FLOOR, self.years[0] - 1
        return self.years[0], self.years[0] + 3

    def phrase(self) -> str:
        if self.kind is SpecKind.IN_YEAR:
            return f"in {self.years[0]}"
        if self.kind is SpecKind.BETWEEN:
            return f"from {self.years[0]} to {self.years[1]}"
        if self.kind is SpecKind.AFTER:
            return f"after {self.years[0]}"
        if self.kind is SpecKind.BEFORE:
            return f"before {self.years[0]}"
        return f"in the early {self.years[0]}s"


@dataclass(frozen=True)
class SynthQAItem:
    id: str
    question: str
    facts: tuple[TemporalFact, ...]
    specifier: TimeSpecifier
    gold: GoldAnswer
    candidate_a: str
    candidate_b: str
    feature: ContextFeature


@dataclass(frozen=True)
class GenConfig:
    n_items: int
    p_unans: float = 0.124
    difficulty_mix: float = 0.5
    ambiguity: float = 0.25
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_items < 1:
            raise ValueError("n_items must be >= 1")
        for name in ("p_unans", "difficulty_mix", "ambiguity"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


def answerability_oracle(
    facts: Iterable[TemporalFact], specifier: TimeSpecifier
) -> GoldAnswer:
    """Gold answer implied by the facts: the unique object whose scope matches
    the specifier window, or No-Answer when there is none or the matching
    objects conflict."""
    lo, hi = specifier.window()
    objects: list[str] = []
    for fact in facts:
        if fact.scope.intersects(lo, hi) and fact.obj not in objects:
            objects.append(fact.obj)
    if len(objects) == 1:
        return GoldAnswer.of(objects[0])
    return GoldAnswer.no_answer()


# Relation templates and object banks.  Entries within a bank are pairwise
# token-disjoint so a wrong candidate scores zero lexical overlap against
# the gold -- the closed-form reward oracles in the tests rely on that.
_RELATIONS = ("team", "position", "employer", "residence")

_QUESTION_TEMPLATES = {
    "team": "Which team did {s} play for {t}?",
    "position": "Which position did {s} hold {t}?",
    "employer": "Which company employed {s} {t}?",
    "residence": "Where did {s} live {t}?",
}

_OBJECT_BANKS = {
    "team": (
        "Caldera Wanderers",
        "Brightwater Athletic",
        "Ironvale Rangers",
        "Maplecrest United",
        "Seabrook Rovers",
        "Thornfield Albion",
    ),
    "position": (
        "Chief Engineer",
        "Deputy Curator",
        "Regional Treasurer",
        "Senior Archivist",
        "Provincial Magistrate",
        "Harbor Master",
    ),
    "employer": (
        "Veridian Mills",
        "Northgate Foundry",
        "Atlas Cartography",
        "Pembroke Instruments",
        "Solway Telegraph",
        "Kestrel Shipping",
    ),
    "residence": (
        "Ashford",
        "Belmore",
        "Corvale",
        "Dunmere",
        "Eastwick",
        "Farrowgate",
    ),
}

_FIRST_NAMES = (
    "Alma", "Boris", "Carla", "Devan", "Edna", "Farid",
    "Greta", "Hugo", "Iris", "Jonas", "Kira", "Lionel",
)
_LAST_NAMES = (
    "Arkwright", "Bellamy", "Cormier", "Dantas", "Eriksen", "Falk",
    "Giroux", "Hartman", "Ibarra", "Jansen", "Kovacs", "Lindqvist",
)


def _pick(rng: np.random.Generator, bank: Sequence[str]) -> str:
    return bank[int(rng.integers(0, len(bank)))]


def _pick_other(rng: np.random.Generator, bank: Sequence[str], taken: str) -> str:
    taken_tokens = set(normalize_text(taken))
    while True:
        candidate = _pick(rng, bank)
        if candidate != taken and not (set(normalize_text(candidate)) & taken_tokens):
            return candidate


def _make_specifier(rng: np.random.Generator, hard: bool) -> TimeSpecifier:
    base = int(rng.integers(1880, 2020))
    if not hard:
        kind = _EASY_KINDS[int(rng.integers(0, len(_EASY_KINDS)))]
        if kind is SpecKind.IN_YEAR:
            return TimeSpecifier.in_year(base)
        return TimeSpecifier.between(base, base + int(rng.integers(0, 5)))
    kind = _HARD_KINDS[int(rng.integers(0, len(_HARD_KINDS)))]
    if kind is SpecKind.AFTER:
        return TimeSpecifier.after(base)
    if kind is SpecKind.BEFORE:
        return TimeSpecifier.before(base)
    return TimeSpecifier.early_decade((base // 10) * 10)


def _scope_through(rng: np.random.Generator, lo: int, hi: int) -> TimeInterval:
    """A fact scope intersecting [lo, hi], anchored near the bounded side of
    open-ended windows so generated years stay plausible."""
    if hi >= YEAR_HORIZON:
        a_lo, a_hi = lo, lo + 8
    elif lo <= YEAR_FLOOR:
        a_lo, a_hi = hi - 8, hi
    else:
        a_lo, a_hi = lo, hi
    anchor = int(rng.integers(a_lo, a_hi + 1))
    start = max(YEAR_FLOOR, anchor - int(rng.integers(0, 5)))
    end = min(YEAR_HORIZON, anchor + int(rng.integers(0, 5)))
    return TimeInterval(start, end)


def _scope_outside(rng: np.random.Generator, lo: int, hi: int) -> TimeInterval:
    """A fact scope strictly disjoint from [lo, hi]."""
    length = int(rng.integers(1, 7))
    if lo - 2 - length >= YEAR_FLOOR:
        return TimeInterval(lo - 2 - length, lo - 2)
    return TimeInterval(hi + 2, hi + 2 + length)


def _generate_item(
    rng: np.random.Generator, item_id: str, unanswerable: bool, cfg: GenConfig
) -> SynthQAItem:
    hard = bool(rng.random() < cfg.difficulty_mix)
    specifier = _make_specifier(rng, hard)
    lo, hi = specifier.window()

    subject = f"{_pick(rng, _FIRST_NAMES)} {_pick(rng, _LAST_NAMES)}"
    relation = _RELATIONS[int(rng.integers(0, len(_RELATIONS)))]
    bank = _OBJECT_BANKS[relation]
    question = _QUESTION_TEMPLATES[relation].format(s=subject, t=specifier.phrase())

    facts: list[TemporalFact] = []
    if not unanswerable:
        gold_obj = _pick(rng, bank)
        distractor = _pick_other(rng, bank, gold_obj)
        facts.append(TemporalFact(subject, relation, gold_obj, _scope_through(rng, lo, hi)))
        if rng.random() < 0.5:
            facts.append(
                TemporalFact(subject, relation, distractor, _scope_outside(rng, lo, hi))
            )
        gold = GoldAnswer.of(gold_obj)
        evidence = Evidence.SUPPORTS
        if rng.random() < 0.5:
            candidate_a, candidate_b = gold_obj, distractor
        else:
            candidate_a, candidate_b = distractor, gold_obj
    else:
        obj_one = _pick(rng, bank)
        obj_two = _pick_other(rng, bank, obj_one)
        if rng.random() < CONTRADICT_FRACTION:
            facts.append(TemporalFact(subject, relation, obj_one, _scope_through(rng, lo, hi)))
            facts.append(TemporalFact(subject, relation, obj_two, _scope_through(rng, lo, hi)))
            evidence = Evidence.CONTRADICTS
        else:
            for obj in (obj_one, obj_two)[: int(rng.integers(0, 3))]:
                facts.append(TemporalFact(subject, relation, obj, _scope_outside(rng, lo, hi)))
            evidence = Evidence.NO_EVIDENCE
        gold = GoldAnswer.no_answer()
        candidate_a, candidate_b = obj_one, obj_two

    observed = Evidence.NO_EVIDENCE if rng.random() < cfg.ambiguity else evidence
    feature = ContextFeature(observed, Difficulty.HARD if hard else Difficulty.EASY)

    return SynthQAItem(
        id=item_id,
        question=question,
        facts=tuple(facts),
        specifier=specifier,
        gold=gold,
        candidate_a=candidate_a,
        candidate_b=candidate_b,
        feature=feature,
    )


def generate_dataset(cfg: GenConfig) -> list[SynthQAItem]:
    """Deterministic dataset with exactly round(n_items * p_unans) unanswerable items."""
    rng = np.random.default_rng(cfg.seed)
    n_unans = int(round(cfg.n_items * cfg.p_unans))
    flags = [True] * n_unans + [False] * (cfg.n_items - n_unans)
    rng.shuffle(flags)
    return [
        _generate_item(rng, f"q{i:05d}", flag, cfg) for i, flag in enumerate(flags)
    ]


# --- JSON-Lines serialization -------------------------------------------------

def item_to_dict(item: SynthQAItem) -> dict:
    return {
        "id": item.id,
        "question": item.question,
        "specifier": {"kind": item.specifier.kind.value, "years": list(item.specifier.years)},
        "facts": [
            {
                "subject": f.subject,
                "relation": f.relation,
                "object": f.obj,
                "start": f.scope.start,
                "end": f.scope.end,
            }
            for f in item.facts
        ],
        "gold": list(item.gold.aliases) if not item.gold.is_no_answer else None,
        "candidates": [item.candidate_a, item.candidate_b],
        "feature": {
            "evidence": item.feature.evidence.value,
            "difficulty": item.feature.difficulty.value,
        },
    }


def item_from_dict(payload: dict) -> SynthQAItem:
    spec = TimeSpecifier(SpecKind(payload["specifier"]["kind"]), tuple(payload["specifier"]["years"]))
    facts = tuple(
        TemporalFact(f["subject"], f["relation"], f["object"], TimeInterval(f["start"], f["end"]))
        for f in payload["facts"]
    )
    gold_aliases = payload["gold"]
    gold = GoldAnswer.no_answer() if gold_aliases is None else GoldAnswer.of(*gold_aliases)
    feature = ContextFeature(
        Evidence(payload["feature"]["evidence"]),
        Difficulty(payload["feature"]["difficulty"]),
    )
    candidates = payload["candidates"]
    return SynthQAItem(
        id=str(payload["id"]),
        question=payload["question"],
        facts=facts,
        specifier=spec,
        gold=gold,
        candidate_a=candidates[0],
        candidate_b=candidates[1],
        feature=feature,
    )


def write_dataset(items: Iterable[SynthQAItem], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for item in items:
            fh.write(json.dumps(item_to_dict(item), sort_keys=True) + "\n")


def read_dataset(path: str | Path) -> list[SynthQAItem]:
    items: list[SynthQAItem] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                items.append(item_from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError, TypeError, IndexError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad dataset record: {exc}") from exc
    return items


# --- TimeQA-style ingestion ---------------------------------------------------

_INGEST_DISTRACTOR = "unknown"


def ingest_timeqa_jsonl(path: str | Path) -> list[SynthQAItem]:
    """Map TimeQA-style records (question/context/targets, optional idx) onto
    environment items.  Empty targets (or targets of empty strings) mean the
    question is unanswerable.  Extra fields are ignored."""
    items: list[SynthQAItem] = []
    placeholder_spec = TimeSpecifier.in_year(0)
    placeholder_feature = ContextFeature(Evidence.NO_EVIDENCE, Difficulty.EASY)
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise DatasetError(f"{path}:{lineno}: record must be a JSON object")
            for field in ("question", "context", "targets"):
                if field not in record:
                    raise DatasetError(f"{path}:{lineno}: missing required field {field!r}")
            question = record["question"]
            targets = record["targets"]
            if not isinstance(question, str) or not isinstance(record["context"], str):
                raise DatasetError(f"{path}:{lineno}: question and context must be strings")
            if not isinstance(targets, list) or any(not isinstance(t, str) for t in targets):
                raise DatasetError(f"{path}:{lineno}: targets must be a list of strings")
            aliases = tuple(t for t in targets if t)
            gold = GoldAnswer.of(*aliases) if aliases else GoldAnswer.no_answer()
            candidate_a = aliases[0] if aliases else _INGEST_DISTRACTOR
            candidate_b = _INGEST_DISTRACTOR if candidate_a != _INGEST_DISTRACTOR else "n/a"
            item_id = str(record.get("idx", f"t{lineno:05d}"))
            items.append(
                SynthQAItem(
                    id=item_id,
                    question=question,
                    facts=(),
                    specifier=placeholder_spec,
                    gold=gold,
                    candidate_a=candidate_a,
                    candidate_b=candidate_b,
                    feature=placeholder_feature,
                )
            )
    return items


# --- Abstained multiple-choice construction ------------------------------------

_MC_LABELS = ("A", "B", "C", "D")


@dataclass(frozen=True)
class MCSourceRecord:
    question: str
    options: tuple[str, str, str, str]
    answer_key: str

    def __post_init__(self) -> None:
        if len(self.options) != 4:
            raise DatasetError(f"source record needs exactly 4 options, got {len(self.options)}")
        if self.answer_key not in _MC_LABELS:
            raise DatasetError(f"answer key must be one of {_MC_LABELS}, got {self.answer_key!r}")


@dataclass(frozen=True)
class MCItem:
    question: str
    options: tuple[str, str, str]
    answer_key: str
    unanswerable: bool


def build_abstained_mc(
    records: Sequence[MCSourceRecord], ratio: float = 0.12, seed: int = 0
) -> list[MCItem]:
    """Standardize 4-option records to 3 options, making floor(ratio * N) of
    them unanswerable by deleting their correct option and relabeling the
    answer to the placeholder key D."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must lie in [0, 1], got {ratio}")
    records = list(records)
    rng = np.random.default_rng(seed)
    n_unans = math.floor(ratio * len(records))
    selected = set(rng.choice(len(records), size=n_unans, replace=False).tolist()) if records else set()
    out: list[MCItem] = []
    for i, rec in enumerate(records):
        correct = _MC_LABELS.index(rec.answer_key)
        if i in selected:
            kept = [opt for j, opt in enumerate(rec.options) if j != correct]
            out.append(MCItem(rec.question, tuple(kept), "D", True))
        else:
            wrong = [j for j in range(4) if j != correct]
            drop = wrong[int(rng.integers(0, len(wrong)))]
            kept_idx = [j for j in range(4) if j != drop]
            kept = [rec.options[j] for j in kept_idx]
            new_key = _MC_LABELS[kept_idx.index(correct)]
            out.append(MCItem(rec.question, tuple(kept), new_key, False))
    return out


def mc_source_from_dict(payload: dict) -> MCSourceRecord:
    try:
        return MCSourceRecord(
            question=payload["question"],
            options=tuple(payload["options"]),
            answer_key=payload["answer_key"],
        )
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"bad multiple-choice source record: {exc}") from exc


def read_mc_sources(path: str | Path) -> list[MCSourceRecord]:
    records: list[MCSourceRecord] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(mc_source_from_dict(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            except DatasetError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
    return records


def write_mc_items(items: Iterable[MCItem], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for item in items:
            fh.write(
                json.dumps(
                    {
                        "question": item.question,
                        "options": list(item.options),
                        "answer_key": item.answer_key,
                        "unanswerable": item.unanswerable,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
