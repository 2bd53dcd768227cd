"""File formats: bag CSV, ground truth, signature/concept JSON, scores, ROC dumps.

Floats are written with ``repr`` so every value round-trips exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .baselines import DDConcept
from .detectors import Mode, TargetSignature
from .errors import FormatError
from .spectral import Bag, BagSet, BackgroundStats, whiten_signature

__all__ = [
    "write_bags_csv",
    "read_bags_csv",
    "write_truth_csv",
    "read_truth_csv",
    "signature_document",
    "write_signature_json",
    "read_signature_json",
    "write_concept_json",
    "write_scores_csv",
    "read_scores_csv",
    "write_roc_csv",
    "write_results_csv",
    "write_trace_csv",
    "load_kv_config",
    "sha256_file",
]


def _f(x) -> str:
    return repr(float(x))


def write_bags_csv(bags: BagSet, path) -> None:
    d = bags.d
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bag_id", "label"] + [f"f{k}" for k in range(d)])
        for j, bag in enumerate(bags):
            bag_id = bag.bag_id or f"bag{j:03d}"
            for row in bag.instances:
                w.writerow([bag_id, int(bag.label)] + [_f(v) for v in row])


def read_bags_csv(path) -> BagSet:
    """Rows sharing a ``bag_id`` form one bag; bags keep first-appearance order."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if header[:2] != ["bag_id", "label"] or len(header) < 3:
            raise FormatError(f"{path}: header must start with bag_id,label followed by f0..f{{d-1}}")
        feats = header[2:]
        if feats != [f"f{k}" for k in range(len(feats))]:
            raise FormatError(f"{path}: feature columns must be named f0..f{len(feats) - 1} in order")
        rows, labels, order = {}, {}, []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            bag_id, label = rec[0], rec[1].strip()
            if label not in ("0", "1"):
                raise FormatError(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
            try:
                values = [float(v) for v in rec[2:]]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in values):
                raise FormatError(f"{path}:{lineno}: non-finite feature value")
            if bag_id not in rows:
                rows[bag_id] = []
                labels[bag_id] = label
                order.append(bag_id)
            elif labels[bag_id] != label:
                raise FormatError(f"{path}:{lineno}: bag {bag_id!r} has conflicting labels")
            rows[bag_id].append(values)
    if not order:
        raise FormatError(f"{path}: no instances")
    return BagSet(Bag(label=labels[b] == "1", instances=np.array(rows[b]), bag_id=b) for b in order)


def write_truth_csv(dataset, path) -> None:
    """``instance_id, bag_id, alpha_target, instance_label``; ids follow bag CSV row order."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance_id", "bag_id", "alpha_target", "instance_label"])
        i = 0
        for bag, alphas, labels in zip(dataset.bags, dataset.alphas, dataset.instance_labels):
            for a, lab in zip(alphas, labels):
                w.writerow([i, bag.bag_id, _f(a), int(lab)])
                i += 1


def read_truth_csv(path) -> dict:
    ids, bag_ids, alphas, labels = [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"instance_id", "bag_id", "alpha_target", "instance_label"}
        if not need.issubset(reader.fieldnames or ()):
            raise FormatError(f"{path}: ground truth needs columns {sorted(need)}")
        try:
            for rec in reader:
                ids.append(int(rec["instance_id"]))
                bag_ids.append(rec["bag_id"])
                alphas.append(float(rec["alpha_target"]))
                labels.append(int(rec["instance_label"]))
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None
    return {
        "instance_id": np.array(ids, dtype=int),
        "bag_id": bag_ids,
        "alpha_target": np.array(alphas),
        "instance_label": np.array(labels, dtype=int),
    }


def signature_document(sig: TargetSignature, iterations: int = 0, objective=None, **extra) -> dict:
    stats = sig.stats
    doc = {
        "mode": sig.mode.value,
        "d": int(sig.d),
        "signature": [float(v) for v in sig.s],
        "mu_b": [float(v) for v in stats.mean] if stats is not None else None,
        "sigma_b": [float(v) for v in stats.cov.ravel()] if stats is not None else None,
        "iterations": int(iterations),
        "objective": None if objective is None else float(objective),
    }
    doc.update(extra)
    return doc


def _dump_json(doc, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")


def write_signature_json(sig: TargetSignature, path, iterations: int = 0, objective=None, **extra) -> None:
    _dump_json(signature_document(sig, iterations, objective, **extra), path)


def write_concept_json(concept: DDConcept, path, **extra) -> None:
    doc = concept.to_dict()
    doc.update(extra)
    _dump_json(doc, path)


def read_signature_json(path):
    """Return a :class:`TargetSignature`, or a :class:`DDConcept` for EM-DD files."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if "point" in doc:
        return DDConcept.from_dict(doc)
    try:
        mode = Mode(doc["mode"])
        d = int(doc["d"])
        s = np.array(doc["signature"], dtype=float)
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"{path}: malformed signature document ({exc})") from None
    if mode is Mode.LINEAR:
        if s.shape != (d + 1,):
            raise FormatError(f"{path}: linear discriminant needs d+1={d + 1} weights")
        return TargetSignature(s=s, whitened=None, mode=mode, stats=None, name="lindisc")
    if s.shape != (d,) or doc.get("mu_b") is None or doc.get("sigma_b") is None:
        raise FormatError(f"{path}: signature, mu_b and sigma_b must be present with dimension d={d}")
    mean = np.array(doc["mu_b"], dtype=float)
    cov = np.array(doc["sigma_b"], dtype=float)
    if mean.shape != (d,) or cov.size != d * d:
        raise FormatError(f"{path}: mu_b/sigma_b sizes do not match d={d}")
    stats = BackgroundStats.from_moments(mean, cov.reshape(d, d))
    if abs(np.linalg.norm(s) - 1.0) > 1e-9:
        return TargetSignature.from_original(s, stats, mode, name=str(doc.get("name", mode.value)))
    # stored signatures are unit norm already; keep them bit-exact
    return TargetSignature(s=s, whitened=whiten_signature(s, stats), mode=mode, stats=stats,
                           name=str(doc.get("name", mode.value)))


def write_scores_csv(path, scores, truth=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance_id", "score", "truth_label"])
        for i, s in enumerate(scores):
            w.writerow([i, _f(s), "" if truth is None else int(truth[i])])


def read_scores_csv(path):
    """Return ``(scores, labels)``; ``labels`` is ``None`` when any row lacks truth."""
    scores, labels = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not {"instance_id", "score"}.issubset(reader.fieldnames or ()):
            raise FormatError(f"{path}: scores file needs instance_id and score columns")
        try:
            for rec in reader:
                scores.append(float(rec["score"]))
                t = (rec.get("truth_label") or "").strip()
                labels.append(int(t) if t else None)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None
    if any(lab is None for lab in labels):
        return np.array(scores), None
    return np.array(scores), np.array(labels, dtype=int)


def write_roc_csv(curve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["far", "pd", "threshold"])
        for far, pd, th in zip(curve.far, curve.pd, curve.thresholds):
            w.writerow([_f(far), _f(pd), _f(th)])


def write_results_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", "algorithm", "mean", "std", "mean_runtime_s"])
        for r in rows:
            w.writerow([r.cell, r.algorithm, _f(r.mean), _f(r.std), _f(r.mean_runtime_s)])


def write_trace_csv(result, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "objective", "selection_hash"])
        for it, obj, digest in result.trace_rows():
            w.writerow([it, _f(obj), digest])


def load_kv_config(path) -> dict:
    """Parse ``key = value`` lines; values are JSON when they parse, else strings.

    Blank lines and ``#`` comments are ignored.
    """
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (p.strip() for p in line.split("=", 1))
            if not key:
                raise FormatError(f"{path}:{lineno}: empty key")
            out[key] = parse_value(value)
    return out


def parse_value(value: str):
    if value in ("inf", "+inf", "Infinity"):
        return math.inf
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        return value.strip("\"'")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(Path(path), "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
