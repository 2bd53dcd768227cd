"""Command-line interface: ``mitarget {generate,train,detect,eval,experiment}``.

Exit codes: 0 success, 2 invalid input/config, 3 I/O failure, 4 degenerate data.
Every command writes a JSON manifest with the resolved configuration, seeds
and SHA-256 digests of its inputs and outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import DDConcept, emdd_predict, emdd_train
from .detectors import Mode, TargetSignature, score_dataset
from .errors import DegenerateError, ValidationError
from .evalkit import auc, nauc, roc_curve
from .experiment import ExperimentSpec, preset, run_experiment
from .io import (
    load_kv_config,
    parse_value,
    read_bags_csv,
    read_scores_csv,
    read_signature_json,
    read_truth_csv,
    sha256_file,
    write_bags_csv,
    write_concept_json,
    write_results_csv,
    write_roc_csv,
    write_scores_csv,
    write_signature_json,
    write_trace_csv,
    write_truth_csv,
)
from .spectral import compute_background_stats
from .synthgen import SyntheticConfig, generate, make_endmembers
from .training import TrainConfig, train

logger = logging.getLogger("mitarget")

OUTPUT_DIR_ENV = "MITARGET_OUTPUT_DIR"

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_DEGENERATE = 0, 2, 3, 4

GENERATE_DEFAULTS = {
    "endmembers": "smooth-spectra",
    "d": 64,
    "n_endmembers": 4,
    "endmember_seed": 0,
    "n_pos_bags": 25,
    "n_neg_bags": 25,
    "instances_per_bag": 10,
    "targets_per_positive_bag": 2,
    "mean_target_proportion": 0.05,
    "target_concentration": 20.0,
    "snr_db": 20.0,
    "background_mask": None,
    "seed": 0,
}

TRAIN_DEFAULTS = {
    "mode": "ace",
    "whitening": "negative",
    "max_iterations": 100,
    "regularization": None,
    "seed": 0,
}

EXPERIMENT_DEFAULTS = {
    "preset": "table1",
    "algorithms": ["mi-smf", "mi-ace"],
    "runs": 10,
    "metric": "auc",
    "far_max": 1e-3,
    "seed": 0,
    "whitening": "negative",
    "test_scale": 0.1,
    "d": 64,
    "endmember_seed": 0,
    "proportions": None,
    "snr_db": 20.0,
}


def _out_dir(arg) -> Path:
    if arg:
        return Path(arg)
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


def _resolve(defaults: dict, config_path, overrides: dict) -> dict:
    cfg = dict(defaults)
    if config_path:
        loaded = load_kv_config(config_path)
        unknown = sorted(set(loaded) - set(defaults))
        if unknown:
            raise ValidationError(f"unknown config keys: {unknown}", [f"{k}: unknown key" for k in unknown])
        cfg.update(loaded)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


def _set_pairs(pairs) -> dict:
    out = {}
    for p in pairs or ():
        if "=" not in p:
            raise ValidationError(f"--set expects key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = parse_value(v.strip())
    return out


def _write_manifest(path: Path, command: str, config: dict, seeds: dict, inputs, outputs, started: float):
    doc = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(p): sha256_file(p) for p in outputs},
        "tool_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_clock_s": round(time.perf_counter() - started, 6),
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, float) and math.isinf(o):
        return str(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    return str(o)


def _jsonable(cfg: dict) -> dict:
    return {k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in cfg.items()}


# -- generate ----------------------------------------------------------------

def _synthetic_config(cfg: dict) -> SyntheticConfig:
    kind = cfg["endmembers"]
    if isinstance(kind, list):
        E = np.array(kind, dtype=float)
    elif kind == "simplex-2d":
        E = make_endmembers("simplex-2d", d=2, count=3)
    else:
        E = make_endmembers(kind, d=int(cfg["d"]), count=int(cfg["n_endmembers"]), seed=int(cfg["endmember_seed"]))
    snr = cfg["snr_db"]
    snr = math.inf if isinstance(snr, str) and snr.lower() in ("inf", "+inf") else float(snr)
    return SyntheticConfig(
        endmembers=E,
        n_pos_bags=cfg["n_pos_bags"],
        n_neg_bags=cfg["n_neg_bags"],
        instances_per_bag=cfg["instances_per_bag"],
        targets_per_positive_bag=cfg["targets_per_positive_bag"],
        mean_target_proportion=cfg["mean_target_proportion"],
        target_concentration=cfg["target_concentration"],
        snr_db=snr,
        background_mask=cfg["background_mask"],
        seed=cfg["seed"],
    )


def cmd_generate(args) -> int:
    started = time.perf_counter()
    cfg = _resolve(GENERATE_DEFAULTS, args.config, {**_set_pairs(args.set), "seed": args.seed})
    syn = _synthetic_config(cfg)
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = generate(syn)
    bags_path, truth_path, sig_path = out / "bags.csv", out / "truth.csv", out / "true_signature.json"
    write_bags_csv(data.bags, bags_path)
    write_truth_csv(data, truth_path)
    stats = compute_background_stats(data.bags)
    write_signature_json(TargetSignature.from_original(data.target, stats, Mode.ACE, name="true"), sig_path,
                         iterations=0, objective=None, kind="true")
    inputs = [args.config] if args.config else []
    _write_manifest(out / "manifest.json", "generate", _jsonable(cfg), {"seed": cfg["seed"]},
                    inputs, [bags_path, truth_path, sig_path], started)
    print(f"wrote {data.bags.n_instances} instances in {len(data.bags)} bags to {out}")
    return EXIT_OK


# -- train -------------------------------------------------------------------

def cmd_train(args) -> int:
    started = time.perf_counter()
    cfg = _resolve(TRAIN_DEFAULTS, args.config, {
        "mode": args.mode, "whitening": args.whitening, "max_iterations": args.max_iterations,
        "regularization": args.regularization, "seed": args.seed,
    })
    bags = read_bags_csv(args.data)
    out = Path(args.out) if args.out else _out_dir(None) / "signature.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    mode = cfg["mode"]
    outputs = [out]
    if mode in ("emdd", "emddp"):
        fit = emdd_train(bags, estimate_scales=mode == "emdd")
        write_concept_json(fit.concept, out)
        summary = {"iterations": fit.iterations, "log_likelihood": fit.log_likelihood, "converged": True}
        print(f"{mode}: {fit.iterations} EM iterations, log-likelihood {fit.log_likelihood:.6g}")
    else:
        if mode not in ("smf", "ace", "lindisc"):
            raise ValidationError(f"unknown mode {mode!r}")
        tc = TrainConfig(mode=Mode(mode), max_iterations=int(cfg["max_iterations"]), scope=cfg["whitening"],
                         regularization=cfg["regularization"])
        result = train(bags, tc)
        write_signature_json(result.signature, out, iterations=result.iterations, objective=result.objective,
                             converged=result.converged, whitening=cfg["whitening"])
        if args.trace:
            write_trace_csv(result, args.trace)
            outputs.append(Path(args.trace))
        summary = {"iterations": result.iterations, "objective": result.objective, "converged": result.converged}
        print(f"mi-{mode}: converged={str(result.converged).lower()} iterations={result.iterations} "
              f"objective={result.objective:.6g}")
    cfg = {**cfg, **summary}
    _write_manifest(out.with_suffix(".manifest.json"), "train", _jsonable(cfg), {"seed": cfg["seed"]},
                    [args.data] + ([args.config] if args.config else []), outputs, started)
    return EXIT_OK


# -- detect ------------------------------------------------------------------

def cmd_detect(args) -> int:
    started = time.perf_counter()
    bags = read_bags_csv(args.data)
    sig = read_signature_json(args.signature)
    X = bags.instances("all")
    if isinstance(sig, DDConcept):
        if X.shape[1] != sig.point.shape[0]:
            raise ValidationError(f"data dimension {X.shape[1]} does not match concept dimension {sig.point.shape[0]}")
        scores = emdd_predict(X, sig)
    else:
        if X.shape[1] != sig.d:
            raise ValidationError(f"data dimension {X.shape[1]} does not match signature dimension {sig.d}")
        scores = score_dataset(X, sig).scores
    truth = None
    inputs = [args.data, args.signature]
    if args.truth:
        t = read_truth_csv(args.truth)
        if t["instance_label"].shape[0] != X.shape[0]:
            raise ValidationError(f"truth file has {t['instance_label'].shape[0]} rows for {X.shape[0]} instances")
        truth = t["instance_label"][np.argsort(t["instance_id"], kind="mergesort")]
        inputs.append(args.truth)
    out = Path(args.out) if args.out else _out_dir(None) / "scores.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_scores_csv(out, scores, truth)
    _write_manifest(out.with_suffix(".manifest.json"), "detect", {"seed": args.seed}, {"seed": args.seed},
                    inputs, [out], started)
    print(f"scored {len(scores)} instances -> {out}")
    return EXIT_OK


# -- eval --------------------------------------------------------------------

def cmd_eval(args) -> int:
    scores, labels = read_scores_csv(args.scores)
    if labels is None:
        raise ValidationError("scores file lacks truth_label values")
    curve = roc_curve(scores, labels)
    if args.metric == "auc":
        value = auc(curve)
    else:
        value = nauc(curve, args.far_max)
    if args.roc_out:
        write_roc_csv(curve, args.roc_out)
    print(f"{args.metric} {value!r}")
    return EXIT_OK


# -- experiment --------------------------------------------------------------

def cmd_experiment(args) -> int:
    started = time.perf_counter()
    cfg = _resolve(EXPERIMENT_DEFAULTS, args.spec, {**_set_pairs(args.set), "seed": args.seed, "runs": args.runs})
    name = cfg["preset"]
    kwargs = {}
    if name != "contextual":
        kwargs = {"test_scale": float(cfg["test_scale"]), "d": int(cfg["d"]),
                  "endmember_seed": int(cfg["endmember_seed"]), "snr_db": float(cfg["snr_db"])}
        if cfg["proportions"] is not None:
            kwargs["proportions"] = tuple(cfg["proportions"])
    spec = ExperimentSpec(
        cells=preset(name, **kwargs),
        algorithms=tuple(cfg["algorithms"]),
        runs=int(cfg["runs"]),
        metric=cfg["metric"],
        far_max=float(cfg["far_max"]),
        seed=int(cfg["seed"]),
        scope=cfg["whitening"],
    )
    result = run_experiment(spec)
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results_path = out / "results.csv"
    write_results_csv(result.rows, results_path)
    outputs = [results_path]
    for (cell, alg), curve in sorted(result.rocs.items()):
        p = out / f"roc_{cell}_{alg}.csv".replace("=", "-")
        write_roc_csv(curve, p)
        outputs.append(p)
    if result.failures:
        p = out / "failures.txt"
        p.write_text("".join(f"{c}\t{a}\t{msg}\n" for c, a, msg in result.failures), encoding="utf-8")
        outputs.append(p)
    _write_manifest(out / "manifest.json", "experiment", _jsonable(cfg), {"master_seed": spec.seed},
                    [args.spec] if args.spec else [], outputs, started)
    width = max(len(r.cell) for r in result.rows)
    for r in result.rows:
        print(f"{r.cell:<{width}}  {r.algorithm:<10} {r.mean:.3f} +/- {r.std:.3f}  ({r.mean_runtime_s:.4f} s)")
    if result.failures:
        print(f"{len(result.failures)} run(s) failed; see {out / 'failures.txt'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mitarget", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a synthetic bag dataset")
    g.add_argument("--config", help="key = value config file")
    g.add_argument("--out", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    g.add_argument("--seed", type=int)
    g.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="learn a target signature / concept from a bag CSV")
    t.add_argument("data")
    t.add_argument("--mode", choices=["smf", "ace", "lindisc", "emdd", "emddp"])
    t.add_argument("--whitening", choices=["negative", "global"])
    t.add_argument("--max-iterations", type=int)
    t.add_argument("--regularization", type=float)
    t.add_argument("--config")
    t.add_argument("--trace", help="write the per-iteration trace CSV here")
    t.add_argument("--out")
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_train)

    d = sub.add_parser("detect", help="score every instance of a bag CSV")
    d.add_argument("data")
    d.add_argument("signature")
    d.add_argument("--truth", help="ground-truth CSV supplying truth_label")
    d.add_argument("--out")
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_detect)

    e = sub.add_parser("eval", help="AUC / NAUC of a scores file")
    e.add_argument("scores")
    e.add_argument("--metric", choices=["auc", "nauc"], default="auc")
    e.add_argument("--far-max", type=float, default=1e-3)
    e.add_argument("--roc-out")
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("experiment", help="run a simulated-table experiment")
    x.add_argument("spec", nargs="?", help="key = value experiment spec")
    x.add_argument("--out")
    x.add_argument("--runs", type=int)
    x.add_argument("--seed", type=int)
    x.add_argument("--set", action="append", metavar="KEY=VALUE")
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DegenerateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
