"""Command-line entry point: train, eval, grad-check, loss-demo, sweep.

Exit codes: 0 ok, 1 check failure, 2 config error, 3 data error,
4 model/data dimension mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import head
from .data import DataError, SynthSpec, check_consistent, dump_jsonl, parse_jsonl, split_dataset, synth_generate
from .gradcheck import REL_TOL, run_gradcheck
from .modelio import ModelFormatError, load_model, save_model
from .taxonomy import mikel_default
from .training import ConfigError, TrainConfig, desk_config, evaluate, run_training

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_DATA, EXIT_MODEL = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _log(msg: str):
    print(msg, file=sys.stderr, flush=True)


def _read_json(path, code: int, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(code, f"cannot read {what} {path}: {exc}") from None


def load_config(args) -> TrainConfig:
    try:
        cfg = desk_config() if args.config is None else TrainConfig.from_dict(_read_json(args.config, EXIT_CONFIG, "config"))
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, f"invalid config: {exc}") from None
    return cfg


def synth_spec(args, cfg: TrainConfig) -> SynthSpec:
    obj = {}
    if args.synth not in (None, "default"):
        obj = _read_json(args.synth, EXIT_CONFIG, "synthetic spec")
        if not isinstance(obj, dict):
            raise CliError(EXIT_CONFIG, "synthetic spec must be a JSON object")
    obj.setdefault("taxonomy", cfg.taxonomy)
    if args.seed is not None:
        obj["seed"] = args.seed
    try:
        spec = SynthSpec.from_dict(obj)
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, f"invalid synthetic spec: {exc}") from None
    if spec.taxonomy != cfg.resolved_taxonomy():
        raise CliError(EXIT_CONFIG, "synthetic spec and config use different taxonomies")
    return spec


def load_splits(args, cfg: TrainConfig):
    """Return (train, val, test) from --synth or --data."""
    if args.synth is not None:
        spec = synth_spec(args, cfg)
        return synth_generate(spec, "train"), [], synth_generate(spec, "test")
    if args.data is None:
        raise CliError(EXIT_CONFIG, "one of --data or --synth is required")
    records = _parse_data(args.data, cfg.resolved_taxonomy(), cfg.n_max)
    train, val, test = split_dataset(records, cfg.split, cfg.seed)
    if not train:
        raise CliError(EXIT_DATA, "the training split is empty")
    return train, val, test


def _parse_data(path, taxonomy, n_max=None):
    try:
        records = parse_jsonl(path, taxonomy, n_max)
        check_consistent(records)
    except OSError as exc:
        raise CliError(EXIT_DATA, f"cannot read data: {exc}") from None
    except DataError as exc:
        raise CliError(EXIT_DATA, f"data error: {exc}") from None
    return records


def _train(cfg, train, val, test):
    try:
        return run_training(cfg, train, val, test, log=_log)
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, f"invalid config: {exc}") from None
    except DataError as exc:
        raise CliError(EXIT_DATA, f"data error: {exc}") from None


def _summary(metrics: dict) -> str:
    return f"emotion_acc={metrics['emotion_acc']:.4f} polarity_acc={metrics['polarity_acc']:.4f}"


def cmd_train(args) -> int:
    cfg = load_config(args)
    train, val, test = load_splits(args, cfg)
    model, report = _train(cfg, train, val, test)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model_path = Path(args.model) if args.model else out / "model.bin"
    save_model(model, model_path)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if test:
        dump_jsonl(test, out / "test_split.jsonl")
    _log(f"trained in {report.wall_clock:.1f}s; model -> {model_path}")
    print(_summary(report.final))
    return EXIT_OK


def _check_dims(model, records):
    g, f, e = check_consistent(records)
    problems = []
    if g != model.global_enc.raw_size:
        problems.append(f"global length {g} != {model.global_enc.raw_size}")
    if f is not None and f != model.dims.F:
        problems.append(f"object length {f} != {model.dims.F}")
    if e is not None and e != model.face_enc.raw_size:
        problems.append(f"face length {e} != {model.face_enc.raw_size}")
    if problems:
        raise CliError(EXIT_MODEL, "model/data mismatch: " + "; ".join(problems))


def cmd_eval(args) -> int:
    if not args.model:
        raise CliError(EXIT_CONFIG, "--model is required")
    try:
        model = load_model(args.model)
    except OSError as exc:
        raise CliError(EXIT_MODEL, f"cannot read model: {exc}") from None
    except (ModelFormatError, ValueError, KeyError) as exc:
        raise CliError(EXIT_MODEL, f"bad model file: {exc}") from None
    lam = 1.0
    if args.config is not None:
        cfg = load_config(args)
        if cfg.dims != model.dims or cfg.resolved_taxonomy() != model.taxonomy:
            raise CliError(EXIT_MODEL, "config dims/taxonomy do not match the model")
        lam = cfg.lam
    if args.synth is not None:
        cfg = desk_config(taxonomy=model.taxonomy.to_dict())
        records = synth_generate(synth_spec(args, cfg), "test")
    elif args.data is not None:
        records = _parse_data(args.data, model.taxonomy)
    else:
        raise CliError(EXIT_CONFIG, "one of --data or --synth is required")
    _check_dims(model, records)
    metrics = evaluate(model, records, lam=lam).to_dict()
    text = json.dumps(metrics, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    seed = 0 if args.seed is None else args.seed
    results = run_gradcheck(seed=seed, n_seeds=args.seeds)
    print(f"{'component':32s} {'max_rel_error':>14s}  result")
    for r in results:
        print(f"{r.component:32s} {r.max_rel_error:14.3e}  {'PASS' if r.passed else 'FAIL'}")
    failed = [r.component for r in results if not r.passed]
    if failed:
        print(f"FAILED (tolerance {REL_TOL:g}): {', '.join(failed)}")
        return EXIT_CHECK
    print(f"all {len(results)} components within {REL_TOL:g}")
    return EXIT_OK


def loss_demo_rows(lam: float = 1.0) -> list[dict]:
    tax = mikel_default()
    rows = []
    for name, (p, y) in head.loss_scenarios(tax).items():
        b = head.hierarchical_loss(tax, p, y, lam)
        rows.append({"scenario": name, "L_emo": b.L_emo, "L_pol": b.L_pol, "lambda": lam, "L_total": b.L_total})
    return rows


def cmd_lossdemo(args) -> int:
    print(f"{'scenario':12s} {'L_emo':>8s} {'L_pol':>8s} {'L_total':>8s}")
    for r in loss_demo_rows(args.lam):
        print(f"{r['scenario']:12s} {r['L_emo']:8.4f} {r['L_pol']:8.4f} {r['L_total']:8.4f}")
    return EXIT_OK


SWEEP_COLUMNS = ["value", "emotion_acc", "polarity_acc", "L_emo", "L_pol", "L_total"]


def parse_values(param: str, text: str | None) -> list:
    if param not in ("lambda", "N"):
        raise CliError(EXIT_CONFIG, f"--param must be 'lambda' or 'N', got {param!r}")
    items = [v.strip() for v in (text or "").split(",") if v.strip()]
    if not items:
        raise CliError(EXIT_CONFIG, "--values is empty")
    try:
        values = [float(v) if param == "lambda" else int(v) for v in items]
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"bad --values: {exc}") from None
    if any(v < 0 for v in values):
        raise CliError(EXIT_CONFIG, "--values must be non-negative")
    return values


def run_sweep(param: str, values, cfg: TrainConfig, train, val, test) -> list[dict]:
    rows = []
    for v in values:
        run_cfg = cfg.replace(lam=v) if param == "lambda" else cfg.replace(n_max=v)
        _log(f"sweep {param}={v}")
        _, report = _train(run_cfg, train, val, test)
        last = report.epochs[-1]
        rows.append({
            "value": v,
            "emotion_acc": report.final["emotion_acc"],
            "polarity_acc": report.final["polarity_acc"],
            "L_emo": last["L_emo"],
            "L_pol": last["L_pol"],
            "L_total": last["L_total"],
        })
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def cmd_sweep(args) -> int:
    values = parse_values(args.param, args.values)
    cfg = load_config(args)
    train, val, test = load_splits(args, cfg)
    text = sweep_csv(run_sweep(args.param, values, cfg, train, val, test))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emostim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("--config", help="training config JSON (default: desk preset)")
        p.add_argument("--seed", type=int, help="override the config/synthetic seed")
        if data:
            p.add_argument("--data", help="JSON-lines fixture file")
            p.add_argument("--synth", nargs="?", const="default",
                           help="use synthetic data; optionally a SynthSpec JSON file")

    p = sub.add_parser("train", help="train a model and write report.json + model.bin")
    common(p)
    p.add_argument("--out", default="run", help="output directory")
    p.add_argument("--model", help="model file path (default: OUT/model.bin)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model")
    common(p)
    p.add_argument("--model", help="model file")
    p.add_argument("--out", help="also write metrics JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grad-check", help="finite-difference check of every backward pass")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--seeds", type=int, default=10, help="random instances per component")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("loss-demo", help="hierarchical loss on constructed true/false predictions")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.set_defaults(func=cmd_lossdemo)

    p = sub.add_parser("sweep", help="train+eval once per value of lambda or N")
    common(p)
    p.add_argument("--param", required=True, help="lambda or N")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", help="CSV output path")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
