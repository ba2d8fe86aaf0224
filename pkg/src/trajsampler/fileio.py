"""Line-delimited JSON scenario files and candidate-set output.

One scenario per line::

    {"scenario_id": "s00000", "horizon": 12,
     "ground_truth": [[x, y], ...] | null,
     "models": [{"model_id": "a",
                 "proposals": [{"weight": 0.7, "points": [[x, y], ...]}, ...]},
                ...]}

Blank lines are skipped. Floats are written with ``repr`` so a file parses
back to exactly the arrays that were written.
"""
from __future__ import annotations

import json
import math
import os
from typing import Iterable, Iterator, Optional, Sequence, TextIO

import numpy as np

from .errors import AllZeroWeights, EmptyEnsemble, InconsistentHorizon, Malformed
from .types import CandidateSet, ModelPrediction, Scenario, build_mixture


def _require(obj, key, kind, line, where="record"):
    if not isinstance(obj, dict):
        raise Malformed(line, f"{where} must be a JSON object")
    if key not in obj:
        raise Malformed(line, f"{where} is missing {key!r}")
    value = obj[key]
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise Malformed(line, f"{where}.{key} has the wrong type ({type(value).__name__})")
    return value


def _points(raw, horizon: int, line: int, where: str) -> np.ndarray:
    if not isinstance(raw, list) or not all(
        isinstance(p, list) and len(p) == 2
        and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in p)
        for p in raw
    ):
        raise Malformed(line, f"{where} must be a list of [x, y] number pairs")
    if len(raw) != horizon:
        raise InconsistentHorizon(f"{where} has {len(raw)} points, horizon is {horizon}", line=line)
    arr = np.array(raw, dtype=np.float64).reshape(horizon, 2)
    if not np.all(np.isfinite(arr)):
        raise Malformed(line, f"{where} contains non-finite coordinates")
    return arr


def parse_record(text: str, line: int = 1) -> Scenario:
    """Parse one JSON line into a :class:`Scenario`."""
    try:
        rec = json.loads(text, parse_constant=lambda c: float("nan"))
    except json.JSONDecodeError as exc:
        raise Malformed(line, f"invalid JSON: {exc.msg}") from None
    sid = _require(rec, "scenario_id", str, line)
    horizon = _require(rec, "horizon", int, line)
    if horizon < 1:
        raise Malformed(line, "horizon must be >= 1")
    gt_raw = rec.get("ground_truth")
    gt = None if gt_raw is None else _points(gt_raw, horizon, line, "ground_truth")
    models_raw = _require(rec, "models", list, line)
    if not models_raw:
        raise EmptyEnsemble(f"scenario {sid!r} has no models", line=line)
    models = []
    for m, mod in enumerate(models_raw):
        where = f"models[{m}]"
        mid = _require(mod, "model_id", str, line, where)
        props = _require(mod, "proposals", list, line, where)
        if not props:
            raise Malformed(line, f"{where} has no proposals")
        weights, trajs = [], []
        for n, prop in enumerate(props):
            pw = f"{where}.proposals[{n}]"
            w = float(_require(prop, "weight", float, line, pw))
            if not math.isfinite(w) or w < 0:
                raise Malformed(line, f"{pw}.weight must be finite and >= 0")
            weights.append(w)
            trajs.append(_points(prop.get("points"), horizon, line, f"{pw}.points"))
        models.append(ModelPrediction(mid, np.array(weights), np.stack(trajs)))
    try:
        mixture = build_mixture(models)
    except AllZeroWeights as exc:
        raise Malformed(line, str(exc)) from None
    return Scenario(sid, mixture, gt)


def iter_scenarios(stream: TextIO) -> Iterator[Scenario]:
    seen = set()
    for line, text in enumerate(stream, start=1):
        if not text.strip():
            continue
        sc = parse_record(text, line)
        if sc.scenario_id in seen:
            raise Malformed(line, f"duplicate scenario_id {sc.scenario_id!r}")
        seen.add(sc.scenario_id)
        yield sc


def parse_scenario_file(path) -> list[Scenario]:
    """Strictly parse a scenario file; errors carry the 1-based line number."""
    with open(path, "r", encoding="utf-8") as fh:
        return list(iter_scenarios(fh))


def _pairs(arr: np.ndarray) -> list:
    return [[float(x), float(y)] for x, y in arr]


def scenario_record(sc: Scenario) -> dict:
    return {
        "scenario_id": sc.scenario_id,
        "horizon": sc.horizon,
        "ground_truth": None if sc.ground_truth is None else _pairs(sc.ground_truth),
        "models": [
            {
                "model_id": m.model_id,
                "proposals": [
                    {"weight": float(w), "points": _pairs(y)} for w, y in zip(m.weights, m.trajectories)
                ],
            }
            for m in sc.mixture.models
        ],
    }


def serialize(scenarios: Iterable[Scenario]) -> str:
    return "".join(json.dumps(scenario_record(sc), allow_nan=False) + "\n" for sc in scenarios)


def write_scenario_file(path, scenarios: Iterable[Scenario]) -> None:
    _atomic_write(path, serialize(scenarios))


def candidate_record(scenario_id: str, sampler: str, candidates: CandidateSet) -> dict:
    src = candidates.source_indices
    return {
        "scenario_id": scenario_id,
        "sampler": sampler,
        "candidates": [_pairs(y) for y in candidates.trajectories],
        "source_indices": None if src is None else [int(i) for i in src],
    }


def write_candidates(path, records: Sequence[dict]) -> None:
    _atomic_write(path, "".join(json.dumps(r, allow_nan=False) + "\n" for r in records))


def read_candidates(path) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                rec = json.loads(text)
                rec["candidates"] = CandidateSet(rec["candidates"], rec.get("source_indices"))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise Malformed(line, f"bad candidate record: {exc}") from None
            out.append(rec)
    return out


def _atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_text(path: Optional[str], text: str, stream: Optional[TextIO] = None) -> None:
    """Write ``text`` to ``path`` or, when path is None or "-", to ``stream``."""
    if path is None or path == "-":
        if stream is not None:
            stream.write(text)
        return
    _atomic_write(path, text)

