"""Tabular contextual-softmax policy standing in for the language model.

The policy maps one of 6 observable context features (evidence signal x
difficulty) to a distribution over 6 discrete completion actions (answer
candidate A, answer candidate B, or abstain; each rendered either in the
``<think>/<answer>`` template or bare).  Gradients are exact, which is what
makes the optimizer checkable against finite differences.
"""

from __future__ import annotations

import enum
import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from abstainrl import kernels
from abstainrl.reward import (
    NO_ANSWER_TEXT,
    answer_reward,
    parse_completion,
)
from abstainrl.textmetrics import GoldAnswer, exact_match

if TYPE_CHECKING:
    from abstainrl.synthenv import SynthQAItem


class Evidence(enum.Enum):
    SUPPORTS = "supports"
    CONTRADICTS = "contradicts"
    NO_EVIDENCE = "no_evidence"


class Difficulty(enum.Enum):
    EASY = "easy"
    HARD = "hard"


class Choice(enum.Enum):
    ANSWER_A = "answer_a"
    ANSWER_B = "answer_b"
    ABSTAIN = "abstain"


_EVIDENCE_ORDER = (Evidence.SUPPORTS, Evidence.CONTRADICTS, Evidence.NO_EVIDENCE)
_DIFFICULTY_ORDER = (Difficulty.EASY, Difficulty.HARD)
_CHOICE_ORDER = (Choice.ANSWER_A, Choice.ANSWER_B, Choice.ABSTAIN)


@dataclass(frozen=True)
class ContextFeature:
    evidence: Evidence
    difficulty: Difficulty

    @property
    def index(self) -> int:
        return _EVIDENCE_ORDER.index(self.evidence) * 2 + _DIFFICULTY_ORDER.index(
            self.difficulty
        )

    @property
    def name(self) -> str:
        return f"{self.evidence.value}:{self.difficulty.value}"

    @classmethod
    def from_index(cls, index: int) -> "ContextFeature":
        return cls(_EVIDENCE_ORDER[index // 2], _DIFFICULTY_ORDER[index % 2])

    @classmethod
    def from_name(cls, name: str) -> "ContextFeature":
        ev, diff = name.split(":")
        return cls(Evidence(ev), Difficulty(diff))


@dataclass(frozen=True)
class ActionId:
    choice: Choice
    formatted: bool

    @property
    def index(self) -> int:
        return _CHOICE_ORDER.index(self.choice) * 2 + (0 if self.formatted else 1)

    @property
    def name(self) -> str:
        return f"{self.choice.value}:{'formatted' if self.formatted else 'bare'}"

    @classmethod
    def from_index(cls, index: int) -> "ActionId":
        return cls(_CHOICE_ORDER[index // 2], index % 2 == 0)

    @classmethod
    def from_name(cls, name: str) -> "ActionId":
        choice, style = name.split(":")
        return cls(Choice(choice), style == "formatted")


ALL_FEATURES = tuple(ContextFeature.from_index(i) for i in range(6))
ALL_ACTIONS = tuple(ActionId.from_index(i) for i in range(6))
N_FEATURES = len(ALL_FEATURES)
N_ACTIONS = len(ALL_ACTIONS)


@dataclass(frozen=True, eq=False)
class PolicyParams:
    """A 6x6 table of logits; treated as an immutable value between updates."""

    logits: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.logits, dtype=np.float64)
        if arr.shape != (N_FEATURES, N_ACTIONS):
            raise ValueError(f"logits must have shape (6, 6), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("logits must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "logits", arr)

    @classmethod
    def zeros(cls) -> "PolicyParams":
        return cls(np.zeros((N_FEATURES, N_ACTIONS)))

    def to_json_dict(self) -> dict:
        table = {
            f.name: {a.name: float(self.logits[f.index, a.index]) for a in ALL_ACTIONS}
            for f in ALL_FEATURES
        }
        return {"logits": table}

    @classmethod
    def from_json_dict(cls, payload: dict) -> "PolicyParams":
        arr = np.zeros((N_FEATURES, N_ACTIONS))
        table = payload["logits"]
        for fname, row in table.items():
            f = ContextFeature.from_name(fname)
            for aname, value in row.items():
                arr[f.index, ActionId.from_name(aname).index] = float(value)
        return cls(arr)

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)

    @classmethod
    def loads(cls, text: str) -> "PolicyParams":
        return cls.from_json_dict(json.loads(text))


def row_log_probs(params: PolicyParams, feature: ContextFeature) -> np.ndarray:
    """Log-softmax over the 6 actions for one feature row."""
    return np.asarray(kernels.log_softmax(params.logits[feature.index]))


def action_log_prob(params: PolicyParams, feature: ContextFeature, action: ActionId) -> float:
    return float(row_log_probs(params, feature)[action.index])


def action_probs(params: PolicyParams, feature: ContextFeature) -> np.ndarray:
    return np.exp(row_log_probs(params, feature))


def sample_action(
    params: PolicyParams, feature: ContextFeature, rng: np.random.Generator | int
) -> ActionId:
    """Draw an action from the softmax distribution; deterministic given the rng state."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    probs = action_probs(params, feature)
    idx = kernels.sample_categorical(probs, float(rng.random()))
    return ALL_ACTIONS[idx]


def greedy_action(params: PolicyParams, feature: ContextFeature) -> ActionId:
    return ALL_ACTIONS[int(np.argmax(params.logits[feature.index]))]


def render_completion(action: ActionId, item: "SynthQAItem") -> str:
    """Render an action as completion text for one question."""
    if action.choice is Choice.ANSWER_A:
        answer = item.candidate_a
        think = f"The facts in the queried window point to {item.candidate_a}."
    elif action.choice is Choice.ANSWER_B:
        answer = item.candidate_b
        think = f"The facts in the queried window point to {item.candidate_b}."
    else:
        answer = NO_ANSWER_TEXT
        think = "The queried window has no single supported fact."
    if action.formatted:
        return f"<think>{think}</think><answer>{answer}</answer>"
    return answer


def grad_log_prob(
    params: PolicyParams, feature: ContextFeature, action: ActionId
) -> np.ndarray:
    """Exact gradient of log pi(action | feature) with respect to the logits."""
    grad = np.zeros((N_FEATURES, N_ACTIONS))
    row = -action_probs(params, feature)
    row[action.index] += 1.0
    grad[feature.index] = row
    return grad


@dataclass(frozen=True)
class ExpertTrace:
    feature: ContextFeature
    action: ActionId
    rendered: str
    gold: GoldAnswer


def oracle_action(item: "SynthQAItem") -> ActionId:
    """The environment oracle's preferred action: the correct formatted answer,
    or a formatted abstention when the question is unanswerable."""
    if item.gold.is_no_answer:
        return ActionId(Choice.ABSTAIN, formatted=True)
    if exact_match(item.candidate_a, item.gold) == 1.0:
        return ActionId(Choice.ANSWER_A, formatted=True)
    if exact_match(item.candidate_b, item.gold) == 1.0:
        return ActionId(Choice.ANSWER_B, formatted=True)
    return ActionId(Choice.ABSTAIN, formatted=True)


def make_expert_traces(
    items: Iterable["SynthQAItem"],
    actions: Sequence[ActionId] | None = None,
) -> list[ExpertTrace]:
    """Render expert traces and keep only the ones whose answer is verifiably
    right: exact match against the gold, or a correct abstention.

    ``actions`` overrides the oracle's per-item choice, which lets callers
    exercise the correctness filter with deliberately wrong proposals.
    """
    items = list(items)
    if actions is None:
        chosen = [oracle_action(item) for item in items]
    else:
        if len(actions) != len(items):
            raise ValueError("actions must align one-to-one with items")
        chosen = list(actions)
    kept: list[ExpertTrace] = []
    for item, action in zip(items, chosen):
        rendered = render_completion(action, item)
        parsed = parse_completion(rendered)
        if answer_reward(parsed.answer, item.gold) >= 1.0:
            kept.append(ExpertTrace(item.feature, action, rendered, item.gold))
    return kept


def sft_train(
    params: PolicyParams,
    traces: Sequence[ExpertTrace],
    lr: float = 0.5,
    epochs: int = 200,
) -> PolicyParams:
    """Full-batch gradient ascent on the mean log-likelihood of trace actions."""
    if not traces:
        raise ValueError("sft_train needs at least one trace")
    logits = np.array(params.logits)
    n = len(traces)
    for _ in range(epochs):
        grad = np.zeros_like(logits)
        for trace in traces:
            row = trace.feature.index
            probs = np.exp(kernels.log_softmax(logits[row]))
            grad[row] -= probs
            grad[row, trace.action.index] += 1.0
        logits += lr * grad / n
    return PolicyParams(logits)


def sft_log_likelihood(params: PolicyParams, traces: Sequence[ExpertTrace]) -> float:
    """Mean log-likelihood of the trace actions under the policy."""
    if not traces:
        raise ValueError("no traces")
    total = 0.0
    for trace in traces:
        total += action_log_prob(params, trace.feature, trace.action)
    return total / len(traces)
