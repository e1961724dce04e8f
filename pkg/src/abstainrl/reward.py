"""Completion parsing and the rule-based reward.

A completion is well-formatted when it is exactly one ``<think>...</think>``
block followed by exactly one ``<answer>...</answer>`` block, with nothing
but whitespace outside them.  The total reward is a format component
(0.5 or 0) plus a piecewise answer component:

* 1.0 when both prediction and gold are No-Answer,
* a lexical/semantic score when neither side is No-Answer,
* 0 otherwise (hallucination and over-abstention both score zero).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from abstainrl.textmetrics import (
    GoldAnswer,
    exact_match,
    normalize_text,
    rouge_l,
    semantic_sim,
)

FORMAT_REWARD = 0.5

_TEMPLATE_RE = re.compile(
    r"\A\s*<think>(.*?)</think>\s*<answer>(.*?)</answer>\s*\Z", re.DOTALL
)

_NO_ANSWER_TOKENS = ["no", "answer"]

NO_ANSWER_TEXT = "No Answer"


@dataclass(frozen=True)
class ParsedCompletion:
    raw: str
    think: str | None
    answer: str
    format_ok: bool


class RewardVariant(enum.Enum):
    """Answer-reward composition; ROUGE_PLUS_EM is the default."""

    ROUGE_PLUS_EM = "rouge+em"
    ROUGE_ONLY = "rouge"
    ROUGE_PLUS_SEM = "rouge+sem"
    ROUGE_PLUS_SEM_PLUS_EM = "rouge+sem+em"

    @property
    def uses_em(self) -> bool:
        return self in (RewardVariant.ROUGE_PLUS_EM, RewardVariant.ROUGE_PLUS_SEM_PLUS_EM)

    @property
    def uses_sem(self) -> bool:
        return self in (RewardVariant.ROUGE_PLUS_SEM, RewardVariant.ROUGE_PLUS_SEM_PLUS_EM)

    @classmethod
    def from_name(cls, name: str) -> "RewardVariant":
        for variant in cls:
            if variant.value == name:
                return variant
        raise ValueError(
            f"unknown reward variant {name!r}; expected one of "
            f"{[v.value for v in cls]}"
        )


DEFAULT_VARIANT = RewardVariant.ROUGE_PLUS_EM


@dataclass(frozen=True)
class RewardBreakdown:
    format: float
    answer: float
    total: float


def parse_completion(raw: str) -> ParsedCompletion:
    """Split a raw completion into think/answer segments.

    Malformed input never fails: the whole trimmed text becomes the answer
    segment and ``format_ok`` is False.
    """
    match = _TEMPLATE_RE.match(raw)
    if (
        match
        and raw.count("<think>") == 1
        and raw.count("</think>") == 1
        and raw.count("<answer>") == 1
        and raw.count("</answer>") == 1
    ):
        return ParsedCompletion(raw, match.group(1).strip(), match.group(2).strip(), True)
    return ParsedCompletion(raw, None, raw.strip(), False)


def format_reward(pc: ParsedCompletion) -> float:
    return FORMAT_REWARD if pc.format_ok else 0.0


def is_no_answer(answer: str) -> bool:
    """True iff the answer normalizes to the abstention phrase."""
    return normalize_text(answer) == _NO_ANSWER_TOKENS


def answer_reward(
    pred: str, gold: GoldAnswer, variant: RewardVariant = DEFAULT_VARIANT
) -> float:
    """Piecewise answer reward on the answer segment only."""
    pred_abstains = is_no_answer(pred)
    if pred_abstains and gold.is_no_answer:
        return 1.0
    if pred_abstains or gold.is_no_answer:
        return 0.0
    score = rouge_l(pred, gold).f1
    if variant.uses_em:
        score += exact_match(pred, gold)
    if variant.uses_sem:
        score += max(semantic_sim(pred, alias) for alias in gold.aliases)
    return score


def total_reward(
    raw: str, gold: GoldAnswer, variant: RewardVariant = DEFAULT_VARIANT
) -> RewardBreakdown:
    """Parse the completion, then combine format and answer rewards."""
    pc = parse_completion(raw)
    fmt = format_reward(pc)
    ans = answer_reward(pc.answer, gold, variant)
    return RewardBreakdown(format=fmt, answer=ans, total=fmt + ans)
