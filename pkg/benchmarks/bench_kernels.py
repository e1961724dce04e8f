"""Benchmark the compiled kernels against the pure-Python fallback.

Runs each kernel on a training-shaped workload and prints a comparison
table.  Also times an end-to-end reward-scoring loop, which is where the
kernels sit in practice.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from abstainrl import kernels
from abstainrl.reward import total_reward
from abstainrl.synthenv import GenConfig, generate_dataset
from abstainrl.textmetrics import GoldAnswer


def _time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def _lcs_workload(backend, pairs):
    def run():
        for a, b in pairs:
            backend.lcs_length(a, b)

    return run


def _trigram_workload(backend, texts):
    def run():
        for text in texts:
            backend.trigram_counts(text, 512)

    return run


def _softmax_sample_workload(backend, rows, draws):
    def run():
        for row, u in zip(rows, draws):
            probs = np.exp(backend.log_softmax(row))
            backend.sample_categorical(probs, u)

    return run


def _reward_workload(items):
    golds = [item.gold if not item.gold.is_no_answer else GoldAnswer.of("placeholder")
             for item in items]

    def run():
        for item, gold in zip(items, golds):
            total_reward(f"<think>notes</think><answer>{item.candidate_a}</answer>", gold)
            total_reward(item.candidate_b, gold)

    return run


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5, help="timing repetitions (best-of)")
    args = parser.parse_args()

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; benchmarking the python backend only")
        print("build it with: python setup.py build_ext --inplace")

    rng = np.random.default_rng(0)
    lcs_pairs = [
        (rng.integers(0, 40, size=60).tolist(), rng.integers(0, 40, size=60).tolist())
        for _ in range(200)
    ]
    texts = ["".join(chr(97 + c) for c in rng.integers(0, 26, size=80)) for _ in range(2000)]
    rows = [rng.normal(scale=2, size=6) for _ in range(20000)]
    draws = rng.random(20000).tolist()
    items = generate_dataset(GenConfig(n_items=2000, p_unans=0.3, seed=1))

    workloads = {
        "lcs_length (200 x 60x60 tokens)": lambda b: _lcs_workload(b, lcs_pairs),
        "trigram_counts (2000 x 80 chars)": lambda b: _trigram_workload(b, texts),
        "log_softmax+sample (20000 rows)": lambda b: _softmax_sample_workload(b, rows, draws),
    }

    name_width = max(len(name) for name in workloads) + 2
    header = f"{'kernel workload':<{name_width}}"
    for backend_name in backends:
        header += f"{backend_name:>12}"
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, make in workloads.items():
        times = {bn: _time(make(module), args.repeat) for bn, module in backends.items()}
        line = f"{name:<{name_width}}"
        for backend_name in backends:
            line += f"{times[backend_name] * 1e3:>10.2f}ms"
        if len(backends) == 2:
            line += f"{times['python'] / times['compiled']:>9.1f}x"
        print(line)

    # end-to-end reward scoring under whichever backend is active
    reward_time = _time(_reward_workload(items), args.repeat)
    print(
        f"\nreward pipeline (4000 completions, active backend = {kernels.BACKEND}): "
        f"{reward_time * 1e3:.1f}ms"
    )


if __name__ == "__main__":
    main()
