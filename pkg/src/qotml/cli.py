"""Command-line entry point: ``qotml {generate,train,predict,evaluate,sweep,oracle}``.

Exit codes: 0 success, 1 data/validation failure, 2 usage/config error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import datagen, evalharness, neural, physics
from .features import extract_many, inverse_target, normalize
from .linkmodel import link_from_dict, plan_from_dict, read_records, read_scenarios, validate_plan

log = logging.getLogger("qotml")

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _say(msg: str) -> None:
    print(msg, flush=True)


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


# --- subcommands ---------------------------------------------------------------

def cmd_generate(args) -> int:
    path = _require_file(args.config, "config file")
    try:
        config = datagen.load_gen_config(path)
    except (ValueError, TypeError, json.JSONDecodeError) as e:
        raise UsageError(f"bad config {path}: {e}") from e
    if args.seed is not None:
        config = replace(config, base_seed=args.seed)
    t0 = time.perf_counter()
    n = datagen.generate_dataset(config, args.out, threads=args.threads)
    _say(f"wrote {n} records to {args.out} in {time.perf_counter() - t0:.2f} s")
    return EXIT_OK


def cmd_train(args) -> int:
    records = read_records(_require_file(args.data, "dataset"))
    config = neural.TrainConfig(epochs=args.epochs, seed=args.seed if args.seed is not None else 0)

    def progress(row):
        if not args.quiet:
            _say(f"epoch {row.epoch:3d}  lr {row.lr:.0e}  train {row.train_loss:.5f}  val {row.val_loss:.5f}")

    t0 = time.perf_counter()
    try:
        model, history, (tr, va, te) = neural.train(records, args.arch, config, progress)
    except neural.TrainingDiverged as e:
        raise DataError(str(e)) from e
    except ValueError as e:
        raise DataError(str(e)) from e
    model.save(args.out)
    loss_log = args.loss_log or str(Path(args.out).with_suffix(".loss.csv"))
    neural.write_loss_log(history, loss_log)
    _say(f"trained {args.arch} ({model.n_hidden} hidden layers) on {len(tr)}/{len(va)}/{len(te)} "
         f"records in {time.perf_counter() - t0:.1f} s; final val loss {history[-1].val_loss:.5f}; "
         f"model -> {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = neural.MlpModel.load(_require_file(args.model, "model file"))
    scenarios = read_scenarios(_require_file(args.scenario, "scenario file"))
    t0 = time.perf_counter()
    if scenarios:
        X = normalize(extract_many(scenarios), model.norm_stats)
        eta = inverse_target(model.forward(X), model.norm_stats)
    else:
        eta = np.zeros(0)
    elapsed = time.perf_counter() - t0
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario_id", "eta", "snr_db"])
        for i, (s, e) in enumerate(zip(scenarios, eta)):
            sigma2 = physics.linear_noise(s.link, s.plan.cut, args.nf_db)
            snr = physics.combine_snr(s.plan.cut.launch_power, sigma2, e, physics.penalties_for(s.plan))
            w.writerow([i, repr(float(e)), repr(float(snr))])
    per_case = elapsed / len(scenarios) * 1e6 if scenarios else 0.0
    _say(f"predicted {len(scenarios)} scenarios in {elapsed:.3f} s ({per_case:.1f} us/case)")
    return EXIT_OK


def _summary_line(report) -> str:
    return (f"{report.reference}-referenced: n={report.n_cases} mean dSNR {report.mean_delta_db:.4f} dB, "
            f"max dSNR {report.max_delta_db:.4f} dB (model {report.model_id})")


def cmd_evaluate(args) -> int:
    model = neural.MlpModel.load(_require_file(args.model, "model file"))
    records = read_records(_require_file(args.data, "dataset"))
    if args.exclude_fit_records:
        records = evalharness.unseen_records(model, records)
    if not records:
        raise DataError("no records to evaluate")
    try:
        report = evalharness.evaluate(model, records)
    except evalharness.SplitLeakError as e:
        raise DataError(f"{e}; pass --exclude-fit-records to score only unseen records") from e
    evalharness.emit_report(report, args.out)
    _say(_summary_line(report))
    return EXIT_OK


def cmd_sweep(args) -> int:
    model = neural.MlpModel.load(_require_file(args.model, "model file"))
    path = _require_file(args.sweep_config, "sweep config")
    try:
        config = evalharness.load_sweep_config(path)
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as e:
        raise UsageError(f"bad sweep config {path}: {e}") from e
    measurements = None
    if args.measurements:
        try:
            measurements = evalharness.ingest_measurements(_require_file(args.measurements, "measurement CSV"))
        except evalharness.MeasurementFormatError as e:
            raise DataError(str(e)) from e
    try:
        report = evalharness.sweep(config, model, use_oracle_ref=measurements is None,
                                   measurements=measurements)
    except evalharness.MissingMeasurements as e:
        raise DataError(str(e)) from e
    evalharness.emit_report(report, args.out)
    if not args.quiet:
        for row in report.rows:
            _say(f"  {row.case_id}: model {row.snr_model_db:.3f} dB, ref {row.snr_ref_db:.3f} dB")
    _say(_summary_line(report))
    return EXIT_OK


def _load_json(path: str, what: str) -> dict:
    try:
        with open(_require_file(path, what)) as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise UsageError(f"{what} {path} is not valid JSON: {e}") from e


def cmd_oracle(args) -> int:
    link_d = _load_json(args.link, "link file")
    plan_d = _load_json(args.plan, "plan file")
    try:
        link = link_from_dict(link_d)
        plan = plan_from_dict(plan_d)
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"malformed link/plan: {e}") from e
    violations = validate_plan(plan)
    if violations:
        for v in violations:
            print(f"invalid plan: {v}", file=sys.stderr)
        return EXIT_USAGE
    eta = physics.eta_closed_form(link, plan)
    sigma2 = physics.linear_noise(link, plan.cut, args.nf_db)
    pen = physics.penalties_for(plan)
    snr = physics.combine_snr(plan.cut.launch_power, sigma2, eta, pen)
    _say(f"eta_closed_form  {eta:.12g} 1/W^2")
    _say(f"sigma2           {sigma2:.12g} W")
    _say(f"penalties        {pen:.12g} dB")
    _say(f"snr              {snr:.12g} dB")
    _say(f"optimal_power    {physics.optimal_power(sigma2, eta):.12g} dBm")
    if args.numerical is not None:
        try:
            eta_num = physics.eta_numerical(link, plan, args.numerical)
        except ValueError as e:
            raise UsageError(str(e)) from e
        _say(f"eta_numerical    {eta_num:.12g} 1/W^2")
        _say(f"gap              {10 * math.log10(eta / eta_num):.12g} dB")
    return EXIT_OK


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the RNG seed")
    common.add_argument("--threads", type=int, default=1, help="worker processes for generation")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    p = argparse.ArgumentParser(prog="qotml", description="GN-labelled QoT estimation with dense networks")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="generate a labelled dataset")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", parents=[common], help="train an ANN or SNN preset")
    t.add_argument("--data", required=True)
    t.add_argument("--arch", required=True, choices=sorted(neural.PRESETS))
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int, default=neural.TrainConfig.epochs)
    t.add_argument("--loss-log", default=None, help="CSV loss log (default: <out>.loss.csv)")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", parents=[common], help="predict eta and SNR for scenarios")
    pr.add_argument("--model", required=True)
    pr.add_argument("--scenario", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--nf-db", type=float, default=physics.DEFAULT_NF_DB)
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("evaluate", parents=[common], help="dSNR against oracle labels")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--exclude-fit-records", action="store_true",
                   help="drop records used for training/validation instead of failing")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", parents=[common], help="on/off neighbour sweep")
    s.add_argument("--model", required=True)
    s.add_argument("--sweep-config", required=True)
    s.add_argument("--measurements", default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", parents=[common], help="evaluate the GN oracle for one link/plan")
    o.add_argument("--link", required=True)
    o.add_argument("--plan", required=True)
    o.add_argument("--numerical", type=int, default=None, metavar="N",
                   help="also integrate the GN integral with N quadrature points")
    o.add_argument("--nf-db", type=float, default=physics.DEFAULT_NF_DB)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"qotml {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as e:
        print(f"qotml {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
