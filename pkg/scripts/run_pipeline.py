"""Generate -> train (ANN and SNN) -> evaluate -> sweep, all through the CLI.

    python3 scripts/run_pipeline.py --config configs/gen_20k.json --work runs/20k
"""
import argparse
import sys
from pathlib import Path

from qotml.cli import main as qotml

ROOT = Path(__file__).resolve().parents[1]


def run(*argv):
    print("$ qotml", " ".join(map(str, argv)), flush=True)
    code = qotml([str(a) for a in argv])
    if code:
        sys.exit(code)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=ROOT / "configs/gen_20k.json")
    p.add_argument("--sweep-config", default=ROOT / "configs/sweep_live22.json")
    p.add_argument("--work", default=ROOT / "runs/20k")
    p.add_argument("--archs", nargs="+", default=["ann", "snn"])
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()

    work = Path(args.work)
    data = work / "data.jsonl"
    run("generate", "--config", args.config, "--out", data, "--threads", args.threads)
    for arch in args.archs:
        model = work / f"{arch}.json"
        run("train", "--data", data, "--arch", arch, "--out", model, "--epochs", args.epochs, "--quiet")
        run("evaluate", "--model", model, "--data", data, "--exclude-fit-records",
            "--out", work / f"eval_{arch}")
        run("sweep", "--model", model, "--sweep-config", args.sweep_config,
            "--out", work / f"sweep_{arch}", "--quiet")
        run("predict", "--model", model, "--scenario", data, "--out", work / f"pred_{arch}.csv")


if __name__ == "__main__":
    main()
