"""Command-line entry point: ``trajsampler <command> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error. On
failure a single JSON object is printed to stderr, e.g.
``{"error": "ConfigError", "field": "samplers[0]", "message": "..."}``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from typing import Optional, Sequence

from . import config as cfgmod
from . import fileio, harness, synth, verify
from .errors import ConfigError, TrajSamplerError

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class _UsageError(Exception):
    def __init__(self, message, field="argv"):
        self.field = field
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_common(p, *, dataset=True, optimizer=True):
    p.add_argument("--config", help="JSON config file (default: $%s)" % cfgmod.CONFIG_ENV)
    p.add_argument("--output", "-o", help="output path ('-' for stdout)")
    p.add_argument("--master-seed", type=int, dest="master_seed")
    p.add_argument("--workers", type=int)
    p.add_argument("--executor", choices=("process", "thread"))
    if dataset:
        p.add_argument("--input", "-i", help="scenario file; the synthetic benchmark when omitted")
        p.add_argument("--count", type=int, help="scenes to generate when no input is given")
        p.add_argument("--proposals-per-model", type=int, dest="proposals_per_model")
    p.add_argument("-S", type=int, dest="S", help="candidates per scenario")
    p.add_argument("--ks", type=_ints, help="comma-separated k values")
    if optimizer:
        p.add_argument("--loss", choices=("minade", "minfde"))
        p.add_argument("--loss-k", type=int, dest="loss_k")
        p.add_argument("--steps", type=int)
        p.add_argument("--learning-rate", type=float, dest="learning_rate")
        p.add_argument("--restarts", type=int)
        p.add_argument("--init", choices=("categorical", "uniform", "gaussian"))
        p.add_argument("--schedule", choices=("constant", "anneal"))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trajsampler", description="Select S trajectories from pooled ensemble proposals.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("generate", help="write a synthetic scenario file")
    g.add_argument("--config")
    g.add_argument("--output", "-o")
    g.add_argument("--count", type=int)
    g.add_argument("--proposals-per-model", type=int, dest="proposals_per_model")
    g.add_argument("--master-seed", type=int, dest="master_seed")

    s = sub.add_parser("sample", help="run one sampler and write candidate sets")
    _add_common(s)
    s.add_argument("--sampler")

    c = sub.add_parser("compare", help="comparison table as CSV")
    _add_common(c)
    c.add_argument("--samplers", type=_names)
    c.add_argument("--timings", help="also write per-sampler wall-clock seconds here")

    sp = sub.add_parser("sweep-proposals", help="minADE/minFDE as the proposal count grows")
    _add_common(sp, dataset=False)
    sp.add_argument("--count", type=int)
    sp.add_argument("--counts", type=_ints)
    sp.add_argument("--samplers", type=_names)

    sn = sub.add_parser("sweep-nms", help="NMS+KMeans as a function of the NMS threshold")
    _add_common(sn, optimizer=False)
    sn.add_argument("--thresholds", type=_floats)

    v = sub.add_parser("verify", help="oracle checks on small scenarios")
    v.add_argument("--config")
    v.add_argument("--input", "-i", help="scenario file; the bundled fixture when omitted")
    v.add_argument("--output", "-o", help="report path ('-' for stdout, the default)")
    v.add_argument("--master-seed", type=int, dest="master_seed")
    return parser


_OPT_FLAGS = ("steps", "learning_rate", "restarts", "init", "schedule")
_SKIP = {"command", "config"} | set(_OPT_FLAGS)


def _resolve(args) -> cfgmod.RunConfig:
    ns = vars(args)
    overrides = {k: v for k, v in ns.items() if k not in _SKIP}
    for key in ("ks", "counts", "thresholds", "samplers"):
        if overrides.get(key) is not None:
            overrides[key] = tuple(overrides[key])
    opt = {k: ns[k] for k in _OPT_FLAGS if ns.get(k) is not None}
    if opt:
        overrides["optimizer"] = opt
    if args.command != "sample":
        overrides.pop("sampler", None)
    # the sweeps default to S = k = 5 unless a config file or flag says otherwise
    sweep = args.command in ("sweep-proposals", "sweep-nms")
    if sweep and overrides.get("S") is None and not (args.config or _env_config()):
        overrides["S"], overrides["ks"] = 5, overrides.get("ks") or (5,)
    return cfgmod.resolve(args.config, overrides)


def _env_config():
    return os.environ.get(cfgmod.CONFIG_ENV)


def _dataset(cfg: cfgmod.RunConfig):
    if cfg.input:
        try:
            return fileio.parse_scenario_file(cfg.input)
        except OSError as exc:
            raise _DataError("input", f"cannot read {cfg.input}: {exc.strerror}") from None
    return synth.default_benchmark(cfg.count, cfg.proposals_per_model, cfg.master_seed)


class _DataError(Exception):
    def __init__(self, field, message):
        self.field = field
        super().__init__(message)


def _require_gt(dataset):
    for sc in dataset:
        if sc.ground_truth is None:
            raise _DataError("input", f"scenario {sc.scenario_id!r} has no ground truth")
    if not dataset:
        raise _DataError("input", "no scenarios to evaluate")


def cmd_generate(args, out) -> int:
    cfg = _resolve(args)
    data = synth.default_benchmark(cfg.count, cfg.proposals_per_model, cfg.master_seed)
    fileio.write_text(cfg.output, fileio.serialize(data), out)
    return EXIT_OK


def cmd_sample(args, out) -> int:
    cfg = _resolve(args)
    data = _dataset(cfg)
    spec = cfg.spec_for(cfg.sampler)
    records = []
    for sc in data:
        cands = harness.run_sampler(sc.mixture, spec, cfg.S, harness.scenario_seed(cfg.master_seed, sc.scenario_id))
        records.append(fileio.candidate_record(sc.scenario_id, spec.display, cands))
    text = "".join(json.dumps(r) + "\n" for r in records)
    fileio.write_text(cfg.output, text, out)
    return EXIT_OK


def cmd_compare(args, out) -> int:
    cfg = _resolve(args)
    data = _dataset(cfg)
    _require_gt(data)
    table = harness.compare_samplers(data, cfg.sampler_specs(), cfg.S, cfg.ks, cfg.master_seed,
                                     cfg.workers, cfg.executor)
    fileio.write_text(cfg.output, table.to_csv(), out)
    if cfg.timings:
        fileio.write_text(cfg.timings, table.timings_csv(), out)
    return EXIT_OK


def cmd_sweep_proposals(args, out) -> int:
    cfg = _resolve(args)
    specs = cfg.sampler_specs() if cfg.samplers else [cfg.spec_for("topk"), cfg.spec_for("ours")]

    def make(n):
        return synth.default_benchmark(cfg.count, n, cfg.master_seed)

    result = harness.proposal_count_sweep(cfg.counts, specs, cfg.S, cfg.ks, make, 3, cfg.master_seed,
                                          cfg.workers, cfg.executor)
    fileio.write_text(cfg.output, result.to_csv(), out)
    return EXIT_OK


def cmd_sweep_nms(args, out) -> int:
    cfg = _resolve(args)
    data = _dataset(cfg)
    _require_gt(data)
    result = harness.nms_threshold_sweep(data, cfg.thresholds, cfg.S, cfg.ks, cfg.master_seed,
                                         cfg.workers, cfg.executor)
    fileio.write_text(cfg.output, result.to_csv(), out)
    return EXIT_OK


FIXTURE = "fixture_small.jsonl"


def fixture_path():
    return resources.files("trajsampler").joinpath("data", FIXTURE)


def cmd_verify(args, out) -> int:
    cfg = _resolve(args)
    if cfg.input:
        data = _dataset(cfg)
    else:
        with resources.as_file(fixture_path()) as path:
            data = fileio.parse_scenario_file(path)
    results = verify.run_oracle_suite(data, seed=0)
    rep = verify.report(results)
    fileio.write_text(cfg.output, json.dumps(rep, indent=2) + "\n", out)
    if not rep["passed"]:
        _emit_error("VerificationFailed", "checks", f"{rep['failures']} of {rep['checks']} checks failed")
        return EXIT_DATA
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "sample": cmd_sample,
    "compare": cmd_compare,
    "sweep-proposals": cmd_sweep_proposals,
    "sweep-nms": cmd_sweep_nms,
    "verify": cmd_verify,
}


def _emit_error(kind, field, message):
    sys.stderr.write(json.dumps({"error": kind, "field": field, "message": str(message)}) + "\n")


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out)
    except _UsageError as exc:
        _emit_error("UsageError", exc.field, exc)
        return EXIT_USAGE
    except ConfigError as exc:
        _emit_error("ConfigError", exc.field, exc.message)
        return EXIT_USAGE
    except _DataError as exc:
        _emit_error("DataError", exc.field, exc)
        return EXIT_DATA
    except TrajSamplerError as exc:
        field = f"line {exc.line}" if getattr(exc, "line", None) is not None else "input"
        _emit_error(type(exc).__name__, field, exc)
        return EXIT_DATA


def main_exit() -> None:  # pragma: no cover - console-script shim
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    main_exit()
