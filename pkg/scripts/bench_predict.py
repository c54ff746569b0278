"""Time end-to-end prediction (feature extraction + forward pass) for a dataset.

Run with BLAS pinned to one thread for the single-threaded figure:

    OPENBLAS_NUM_THREADS=1 OMP_NUM_THREADS=1 python3 scripts/bench_predict.py \
        --model runs/20k/ann.json --data runs/20k/data.jsonl
"""
import argparse
import json
import time

from qotml.features import extract_many, inverse_target, normalize
from qotml.linkmodel import read_scenarios
from qotml.neural import MlpModel


def predict(model, scenarios):
    X = normalize(extract_many(scenarios), model.norm_stats)
    return inverse_target(model.forward(X), model.norm_stats)


def main():
    p = argparse.ArgumentParser(description="prediction latency benchmark")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--n", type=int, default=20000)
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args()

    model = MlpModel.load(args.model)
    scenarios = read_scenarios(args.data)[: args.n]
    times = []
    for _ in range(args.repeats):
        t0 = time.perf_counter()
        predict(model, scenarios)
        times.append(time.perf_counter() - t0)
    best = min(times)
    print(json.dumps({"model": model.model_id, "n": len(scenarios), "best_s": best,
                      "all_s": times, "us_per_case": best / len(scenarios) * 1e6}))


if __name__ == "__main__":
    main()
