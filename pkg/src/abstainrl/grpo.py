"""Group-relative policy optimization over the tabular softmax policy.

Each outer iteration snapshots the current policy, rolls out a group of G
completions per sampled question under that snapshot, scores them with the
rule-based reward, standardizes rewards within each group into advantages,
and takes gradient-ascent steps on the clipped importance-weighted surrogate
with a k3 KL penalty against a frozen reference policy.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from abstainrl import kernels
from abstainrl.policy import (
    ALL_ACTIONS,
    ActionId,
    N_ACTIONS,
    N_FEATURES,
    PolicyParams,
    greedy_action,
    render_completion,
)
from abstainrl.reward import (
    DEFAULT_VARIANT,
    RewardBreakdown,
    RewardVariant,
    is_no_answer,
    parse_completion,
    total_reward,
)
from abstainrl.synthenv import SynthQAItem
from abstainrl.textmetrics import (
    ConfusionCounts,
    abstention_confusion,
    exact_match,
    rouge_l,
    rouge_n,
    semantic_sim,
)


class GrpoDivergenceError(RuntimeError):
    """Raised when the objective stops being finite."""


@dataclass(frozen=True)
class GrpoConfig:
    group_size: int = 4
    clip_eps: float = 0.2
    kl_beta: float = 0.01
    lr: float = 1e-2
    outer_iters: int = 200
    inner_steps: int = 1
    std_eps: float = 1e-8
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError("clip_eps must lie in (0, 1)")
        if self.kl_beta < 0.0:
            raise ValueError("kl_beta must be >= 0")
        if self.lr < 0.0:
            raise ValueError("lr must be >= 0")
        if self.outer_iters < 0:
            raise ValueError("outer_iters must be >= 0")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")
        if self.std_eps < 0.0:
            raise ValueError("std_eps must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class RolloutGroup:
    """G completions for one question under a fixed old-policy snapshot."""

    item: SynthQAItem
    actions: tuple[ActionId, ...]
    rendered: tuple[str, ...]
    logp_old: np.ndarray
    logp_ref: np.ndarray
    rewards: np.ndarray
    advantages: np.ndarray

    def __post_init__(self) -> None:
        g = len(self.actions)
        for name in ("rendered", "logp_old", "logp_ref", "rewards", "advantages"):
            if len(getattr(self, name)) != g:
                raise ValueError(f"{name} must have length {g}")


@dataclass(frozen=True)
class TrainRecord:
    iteration: int
    mean_reward: float
    abstain_rate: float
    kl: float
    objective: float
    tp: int
    fp: int
    fn: int

    def to_json_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "mean_reward": self.mean_reward,
            "abstain_rate": self.abstain_rate,
            "kl": self.kl,
            "objective": self.objective,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


@dataclass
class TrainLog:
    records: list[TrainRecord] = field(default_factory=list)

    def jsonl_lines(self) -> list[str]:
        return [json.dumps(r.to_json_dict(), sort_keys=True) for r in self.records]

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(line + "\n" for line in self.jsonl_lines()), encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> "TrainLog":
        records = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            records.append(TrainRecord(**d))
        return cls(records)


RewardFn = Callable[[str, SynthQAItem], RewardBreakdown]


@dataclass
class TrainEnv:
    """Question source plus the reward rule applied to rendered completions.

    The default rule is the rule-based QA reward against the item's gold;
    ``reward_fn`` overrides it, which is how the bandit sanity environments
    install their own payout tables.
    """

    items: Sequence[SynthQAItem]
    reward_fn: RewardFn | None = None

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("environment needs at least one item")

    def reward(
        self, raw: str, item: SynthQAItem, variant: RewardVariant = DEFAULT_VARIANT
    ) -> RewardBreakdown:
        if self.reward_fn is not None:
            return self.reward_fn(raw, item)
        return total_reward(raw, item.gold, variant)


def compute_advantages(
    rewards: Sequence[float] | np.ndarray, std_eps: float = 1e-8
) -> np.ndarray:
    """Group-standardized rewards: (r - mean) / (population std + std_eps).

    A zero-variance group maps to all-zero advantages.
    """
    r = np.asarray(rewards, dtype=np.float64)
    if r.size < 2:
        raise ValueError("advantage normalization needs a group of >= 2 rewards")
    if float(r.max()) == float(r.min()):
        # exactly zero variance (np.std of identical values can round to
        # a nonzero dust value, so compare the extremes instead)
        return np.zeros_like(r)
    mean = float(r.mean())
    std = float(r.std())
    return (r - mean) / (std + std_eps)


def importance_ratio(logp_new: float, logp_old: float) -> float:
    return math.exp(logp_new - logp_old)


def clipped_term(ratio: float, advantage: float, clip_eps: float) -> float:
    if not 0.0 < clip_eps < 1.0:
        raise ValueError("clip_eps must lie in (0, 1)")
    clipped = min(max(ratio, 1.0 - clip_eps), 1.0 + clip_eps)
    return min(ratio * advantage, clipped * advantage)


def kl_k3(logp_theta: float, logp_ref: float) -> float:
    """k3 estimator u - log(u) - 1 with u = pi_ref / pi_theta; always >= 0."""
    d = logp_ref - logp_theta
    # expm1 keeps u - 1 accurate near u = 1; the true value is nonnegative,
    # so clamp away float dust.
    return max(0.0, math.expm1(d) - d)


def _row_log_probs_table(params: PolicyParams) -> np.ndarray:
    out = np.empty((N_FEATURES, N_ACTIONS))
    for row in range(N_FEATURES):
        out[row] = kernels.log_softmax(params.logits[row])
    return out


def rollout_group(
    params_old: PolicyParams,
    params_ref: PolicyParams,
    env: TrainEnv,
    item: SynthQAItem,
    cfg: GrpoConfig,
    rng: np.random.Generator,
    variant: RewardVariant = DEFAULT_VARIANT,
) -> RolloutGroup:
    """Sample G completions for one item under the old-policy snapshot."""
    row = item.feature.index
    logp_old_row = np.asarray(kernels.log_softmax(params_old.logits[row]))
    logp_ref_row = np.asarray(kernels.log_softmax(params_ref.logits[row]))
    probs = np.exp(logp_old_row)
    actions = []
    rendered = []
    rewards = np.empty(cfg.group_size)
    logp_old = np.empty(cfg.group_size)
    logp_ref = np.empty(cfg.group_size)
    for i in range(cfg.group_size):
        idx = kernels.sample_categorical(probs, float(rng.random()))
        action = ALL_ACTIONS[idx]
        text = render_completion(action, item)
        actions.append(action)
        rendered.append(text)
        rewards[i] = env.reward(text, item, variant).total
        logp_old[i] = logp_old_row[idx]
        logp_ref[i] = logp_ref_row[idx]
    advantages = compute_advantages(rewards, cfg.std_eps)
    return RolloutGroup(
        item=item,
        actions=tuple(actions),
        rendered=tuple(rendered),
        logp_old=logp_old,
        logp_ref=logp_ref,
        rewards=rewards,
        advantages=advantages,
    )


def grpo_objective(
    params: PolicyParams, groups: Sequence[RolloutGroup], cfg: GrpoConfig
) -> float:
    """Mean over groups of the per-group mean clipped surrogate minus beta * KL."""
    if not groups:
        raise ValueError("objective needs at least one rollout group")
    log_probs = _row_log_probs_table(params)
    total = 0.0
    for group in groups:
        if len(group.actions) != cfg.group_size:
            raise ValueError("rollout group size does not match the configuration")
        row = group.item.feature.index
        acc = 0.0
        for i, action in enumerate(group.actions):
            logp_new = log_probs[row, action.index]
            ratio = importance_ratio(logp_new, float(group.logp_old[i]))
            acc += clipped_term(ratio, float(group.advantages[i]), cfg.clip_eps)
            acc -= cfg.kl_beta * kl_k3(logp_new, float(group.logp_ref[i]))
        total += acc / cfg.group_size
    return total / len(groups)


def grpo_gradient(
    params: PolicyParams, groups: Sequence[RolloutGroup], cfg: GrpoConfig
) -> np.ndarray:
    """Exact gradient of the objective with respect to the logits.

    The min/clip is handled by active-branch selection: a clipped term
    contributes no gradient through the ratio (ties go to the unclipped
    branch).
    """
    if not groups:
        raise ValueError("gradient needs at least one rollout group")
    log_probs = _row_log_probs_table(params)
    grad = np.zeros((N_FEATURES, N_ACTIONS))
    lo, hi = 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps
    scale = 1.0 / (len(groups) * cfg.group_size)
    for group in groups:
        row = group.item.feature.index
        probs = np.exp(log_probs[row])
        for i, action in enumerate(group.actions):
            logp_new = log_probs[row, action.index]
            ratio = math.exp(logp_new - float(group.logp_old[i]))
            advantage = float(group.advantages[i])
            unclipped = ratio * advantage
            clipped = min(max(ratio, lo), hi) * advantage
            coeff = 0.0
            if unclipped <= clipped:
                coeff += unclipped
            u = math.exp(float(group.logp_ref[i]) - logp_new)
            coeff += cfg.kl_beta * (u - 1.0)
            # d logpi / d logits on this row is onehot(action) - softmax(row)
            grad[row] -= scale * coeff * probs
            grad[row, action.index] += scale * coeff
    return grad


def _batch_confusion(groups: Sequence[RolloutGroup]) -> ConfusionCounts:
    pairs = []
    for group in groups:
        for text in group.rendered:
            answer = parse_completion(text).answer
            pred = None if is_no_answer(answer) else answer
            pairs.append((pred, group.item.gold))
    return abstention_confusion(pairs)


def train_rl(
    params0: PolicyParams,
    env: TrainEnv,
    variant: RewardVariant = DEFAULT_VARIANT,
    cfg: GrpoConfig = GrpoConfig(),
) -> tuple[PolicyParams, TrainLog]:
    """Run the full RL loop; the reference policy is params0, frozen.

    Deterministic given (params0, env, variant, cfg): the same seed
    reproduces an identical training log.
    """
    ref = params0
    params = params0
    rng = np.random.default_rng(cfg.seed)
    log = TrainLog()
    n_items = len(env.items)
    for iteration in range(cfg.outer_iters):
        old = params
        item_idx = rng.integers(0, n_items, size=cfg.batch_size)
        groups = [
            rollout_group(old, ref, env, env.items[int(j)], cfg, rng, variant)
            for j in item_idx
        ]
        for _ in range(cfg.inner_steps):
            step = grpo_gradient(params, groups, cfg)
            params = PolicyParams(params.logits + cfg.lr * step)
        objective = grpo_objective(params, groups, cfg)
        if not math.isfinite(objective):
            raise GrpoDivergenceError(
                f"objective became non-finite at iteration {iteration}"
            )
        rewards = np.concatenate([g.rewards for g in groups])
        abstained = 0
        kl_total = 0.0
        count = 0
        log_probs = _row_log_probs_table(params)
        for group in groups:
            row = group.item.feature.index
            for i, action in enumerate(group.actions):
                kl_total += kl_k3(
                    float(log_probs[row, action.index]), float(group.logp_ref[i])
                )
                if is_no_answer(parse_completion(group.rendered[i]).answer):
                    abstained += 1
                count += 1
        confusion = _batch_confusion(groups)
        log.records.append(
            TrainRecord(
                iteration=iteration,
                mean_reward=float(rewards.mean()),
                abstain_rate=abstained / count,
                kl=kl_total / count,
                objective=float(objective),
                tp=confusion.tp,
                fp=confusion.fp,
                fn=confusion.fn,
            )
        )
    return params, log


@dataclass(frozen=True)
class ItemEval:
    """Greedy-decoding metrics for one item.

    Lexical/semantic scores are against the gold aliases and are zero for
    unanswerable items, where only the abstention buckets are meaningful;
    ``em`` treats a correct abstention as a match.
    """

    item_id: str
    reward: float
    abstained: bool
    em: float
    rouge1: float
    rouge2: float
    rouge_l: float
    semantic: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class EvalReport:
    n_items: int
    mean_reward: float
    em_rate: float
    abstain_rate: float
    confusion: ConfusionCounts
    rouge1: float
    rouge2: float
    rouge_l: float
    semantic: float


def evaluate_items(
    params: PolicyParams,
    dataset: Sequence[SynthQAItem],
    variant: RewardVariant = DEFAULT_VARIANT,
) -> list[ItemEval]:
    """Greedy (argmax) evaluation of every item."""
    if not dataset:
        raise ValueError("evaluation needs a non-empty dataset")
    out: list[ItemEval] = []
    for item in dataset:
        action = greedy_action(params, item.feature)
        text = render_completion(action, item)
        breakdown = total_reward(text, item.gold, variant)
        answer = parse_completion(text).answer
        abstained = is_no_answer(answer)
        if item.gold.is_no_answer:
            em = 1.0 if abstained else 0.0
            r1 = r2 = rl = sem = 0.0
            tp, fp, fn = (1, 0, 0) if abstained else (0, 0, 1)
        else:
            em = exact_match(answer, item.gold)
            r1 = rouge_n(answer, item.gold, 1).f1
            r2 = rouge_n(answer, item.gold, 2).f1
            rl = rouge_l(answer, item.gold).f1
            sem = max(semantic_sim(answer, alias) for alias in item.gold.aliases)
            tp, fp, fn = (0, 1, 0) if abstained else (0, 0, 0)
        out.append(
            ItemEval(
                item_id=item.id,
                reward=breakdown.total,
                abstained=abstained,
                em=em,
                rouge1=r1,
                rouge2=r2,
                rouge_l=rl,
                semantic=sem,
                tp=tp,
                fp=fp,
                fn=fn,
            )
        )
    return out


def evaluate_policy(
    params: PolicyParams,
    dataset: Sequence[SynthQAItem],
    variant: RewardVariant = DEFAULT_VARIANT,
) -> EvalReport:
    """Aggregate greedy-decoding report; ROUGE/semantic means cover the
    answerable subset."""
    evals = evaluate_items(params, dataset, variant)
    answerable = [e for e in evals if e.tp == 0 and e.fn == 0]
    confusion = ConfusionCounts(
        tp=sum(e.tp for e in evals), fp=sum(e.fp for e in evals), fn=sum(e.fn for e in evals)
    )

    def _mean(values: list[float]) -> float:
        return sum(values) / len(values) if values else 0.0

    return EvalReport(
        n_items=len(evals),
        mean_reward=_mean([e.reward for e in evals]),
        em_rate=_mean([e.em for e in evals]),
        abstain_rate=_mean([1.0 if e.abstained else 0.0 for e in evals]),
        confusion=confusion,
        rouge1=_mean([e.rouge1 for e in answerable]),
        rouge2=_mean([e.rouge2 for e in answerable]),
        rouge_l=_mean([e.rouge_l for e in answerable]),
        semantic=_mean([e.semantic for e in answerable]),
    )
