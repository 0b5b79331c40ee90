"""Pipeline driver: prepare data, train a model, evaluate it, compare all four.

Subcommands
    prepare   ingest raw OHLCV CSV, label it, write dataset.csv + summary JSON
    train     fit lr | dt | rf | fnn on the prepared dataset's train range
    evaluate  score a saved model file on a dataset split
    compare   train all four models and emit one combined report

Exit statuses: 0 success, 1 usage error, 2 data error, 3 training error.
Every command is deterministic given (inputs, config, master seed); per-model
seeds fan out from the master seed through seeding.mix64.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataset, logistic, metrics, neural, trees
from .errors import DataError, TrainingDivergedError
from .seeding import mix64

DATA_DIR_ENV = "CANDLEBIAS_DATA_DIR"
DATA_FILE_NAME = "stock_prices.csv"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TRAINING = 3

MODEL_NAMES = ("lr", "dt", "rf", "fnn")
MODEL_LABELS = {"lr": "LR", "dt": "DT", "rf": "RF", "fnn": "FNN"}
_MODEL_SEED_STREAM = {"lr": 0, "dt": 1, "rf": 2, "fnn": 3}

DEFAULT_CONFIG = {
    "data": None,
    "code": 6758,
    "split": [0.70, 0.15],
    "seed": 42,
    "out": "out",
    "format": "table",
    "lr": {"alpha": 0.01, "epochs": 1000},
    "dt": {"max_depth": 100, "min_samples_split": 100},
    "rf": {"n_estimators": 250, "max_features": 5, "max_depth": 100,
           "min_samples_split": 100},
    "fnn": {"epochs": 10, "batch_size": 32, "validation_fraction": 0.20,
            "layer_dims": [5, 128, 64, 1]},
}


@dataclass
class RunConfig:
    data_path: str | None
    securities_code: int
    train_frac: float
    val_frac: float
    master_seed: int
    out_dir: Path
    report_format: str
    lr: dict
    dt: dict
    rf: dict
    fnn: dict

    def model_seed(self, name: str) -> int:
        return mix64(self.master_seed, _MODEL_SEED_STREAM[name])


def _merge_config(args) -> RunConfig:
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise DataError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"config {args.config} is not valid JSON: {exc}") from exc
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise DataError(f"config {args.config}: unknown keys {sorted(unknown)}")
        for key, value in file_cfg.items():
            if isinstance(cfg[key], dict):
                cfg[key].update(value)
            else:
                cfg[key] = value

    if getattr(args, "data", None):
        cfg["data"] = args.data
    if getattr(args, "code", None) is not None:
        cfg["code"] = args.code
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "split", None):
        cfg["split"] = args.split
    if getattr(args, "format", None):
        cfg["format"] = args.format
    if getattr(args, "out", None):
        cfg["out"] = args.out

    if cfg["data"] is None:
        data_dir = os.environ.get(DATA_DIR_ENV)
        if data_dir:
            cfg["data"] = os.path.join(data_dir, DATA_FILE_NAME)

    if cfg["format"] not in ("csv", "json", "table"):
        raise DataError(f"unknown report format {cfg['format']!r}")
    train_frac, val_frac = cfg["split"]
    return RunConfig(
        data_path=cfg["data"],
        securities_code=int(cfg["code"]),
        train_frac=float(train_frac),
        val_frac=float(val_frac),
        master_seed=int(cfg["seed"]),
        out_dir=Path(cfg["out"]),
        report_format=cfg["format"],
        lr=cfg["lr"],
        dt=cfg["dt"],
        rf=cfg["rf"],
        fnn=cfg["fnn"],
    )


def _parse_split(text: str):
    parts = text.replace("/", ",").split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected TRAIN,VAL e.g. 0.7,0.15")
    return [float(parts[0]), float(parts[1])]


# ---------------------------------------------------------------------------
# dataset plumbing

def _dataset_path(config: RunConfig, args) -> Path:
    explicit = getattr(args, "dataset", None)
    return Path(explicit) if explicit else config.out_dir / "dataset.csv"


def _load_split_dataset(config: RunConfig, args) -> dataset.LabeledDataset:
    path = _dataset_path(config, args)
    if not path.exists():
        raise DataError(f"prepared dataset {path} not found; run `prepare` first")
    ds = dataset.read_labeled_csv(path)
    return dataset.split_chronological(ds, config.train_frac, config.val_frac)


def _split_range(ds: dataset.LabeledDataset, split_name: str) -> range:
    ranges = {
        "train": ds.split.train,
        "validation": ds.split.validation,
        "test": ds.split.test,
    }
    rng = ranges[split_name]
    if len(rng) == 0:
        raise DataError(f"{split_name} split is empty")
    return rng


# ---------------------------------------------------------------------------
# training / evaluation shared by `train`, `evaluate` and `compare`

def _train_doc(name: str, ds: dataset.LabeledDataset, config: RunConfig):
    """Train one model on the train range; returns (model JSON doc, history)."""
    train_rng = ds.split.train
    X_raw = ds.rows(train_rng)
    y = ds.labels(train_rng)
    seed = config.model_seed(name)

    try:
        if name == "lr":
            std = dataset.fit_standardizer(ds)
            model = logistic.train(
                dataset.apply_standardizer(std, X_raw), y,
                alpha=float(config.lr["alpha"]), epochs=int(config.lr["epochs"]),
            )
            model.standardizer = std
            return logistic.to_dict(model), model.cost_history
        if name == "dt":
            params = trees.TreeParams(
                max_depth=int(config.dt["max_depth"]),
                min_samples_split=int(config.dt["min_samples_split"]),
            )
            root = trees.fit_tree(X_raw, y, params)
            return trees.node_to_dict(root), None
        if name == "rf":
            params = trees.TreeParams(
                max_depth=int(config.rf["max_depth"]),
                min_samples_split=int(config.rf["min_samples_split"]),
                max_features=int(config.rf["max_features"]),
            )
            forest = trees.fit_forest(
                X_raw, y, n_estimators=int(config.rf["n_estimators"]),
                params=params, seed=seed,
            )
            return trees.forest_to_dict(forest), None
        if name == "fnn":
            std = dataset.fit_standardizer(ds)
            train_config = neural.TrainConfig(
                epochs=int(config.fnn["epochs"]),
                batch_size=int(config.fnn["batch_size"]),
                validation_fraction=float(config.fnn["validation_fraction"]),
                shuffle_seed=mix64(seed, 1),
            )
            model, history = neural.train_network(
                dataset.apply_standardizer(std, X_raw), y, train_config,
                seed=seed, layer_dims=tuple(config.fnn["layer_dims"]),
            )
            model.standardizer = std
            return neural.to_dict(model, train_config), history
    except ValueError as exc:
        raise TrainingDivergedError(f"cannot train {name}: {exc}") from exc
    raise ValueError(f"unknown model {name!r}")


def detect_model_kind(doc: dict) -> str:
    if "theta" in doc:
        return "lr"
    if "layer_dims" in doc:
        return "fnn"
    if "trees" in doc:
        return "rf"
    if "p_up" in doc or "feature" in doc:
        return "dt"
    raise DataError("unrecognized model file format")


def _evaluate_doc(doc: dict, ds: dataset.LabeledDataset, split_name: str) -> metrics.EvalReport:
    kind = detect_model_kind(doc)
    rng = _split_range(ds, split_name)
    X_raw = ds.rows(rng)
    y = ds.labels(rng)

    if kind == "lr":
        model = logistic.from_dict(doc)
        if model.standardizer is None:
            raise DataError("lr model file has no standardizer")
        proba = logistic.predict_proba(
            model, dataset.apply_standardizer(model.standardizer, X_raw))
        return metrics.evaluate("LR", y, (proba >= 0.5).astype(np.int64),
                                loss=neural.bce_loss(proba, y.astype(float)))
    if kind == "dt":
        root = trees.node_from_dict(doc)
        return metrics.evaluate("DT", y, trees.tree_predict(root, X_raw))
    if kind == "rf":
        forest = trees.forest_from_dict(doc)
        return metrics.evaluate("RF", y, trees.predict_forest(forest, X_raw))
    model, _ = neural.from_dict(doc)
    if model.standardizer is None:
        raise DataError("fnn model file has no standardizer")
    proba = neural.forward(model, dataset.apply_standardizer(model.standardizer, X_raw))
    return metrics.evaluate("FNN", y, (proba >= 0.5).astype(np.int64),
                            loss=neural.bce_loss(proba, y.astype(float)))


def _write_report(config: RunConfig, stem: str, text: str) -> Path:
    ext = {"csv": "csv", "json": "json", "table": "txt"}[config.report_format]
    path = config.out_dir / f"{stem}.{ext}"
    path.write_text(text, encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# subcommands

def cmd_prepare(config: RunConfig, args) -> int:
    if not config.data_path:
        raise DataError(
            f"no input CSV: pass --data, set it in the config file, or set ${DATA_DIR_ENV}")
    records, stats = dataset.ingest_csv(config.data_path, config.securities_code)
    ds = dataset.label(records)
    ds = dataset.split_chronological(ds, config.train_frac, config.val_frac)

    config.out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = config.out_dir / "dataset.csv"
    dataset.write_labeled_csv(ds, csv_path)

    n_up = int(ds.targets.sum())
    summary = {
        "securities_code": config.securities_code,
        "input_rows": stats.total_rows,
        "matched_rows": stats.matched_rows,
        "dropped_missing": stats.dropped_missing,
        "dropped_malformed": stats.dropped_malformed,
        "labeled_rows": len(ds),
        "class_balance": {"up": n_up, "down": len(ds) - n_up,
                          "prevalence": n_up / len(ds)},
        "split": ds.split.as_dict(),
    }
    summary_path = config.out_dir / "dataset_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {csv_path} ({len(ds)} rows) and {summary_path}")
    return EXIT_OK


def cmd_train(config: RunConfig, args) -> int:
    ds = _load_split_dataset(config, args)
    name = args.model
    doc, history = _train_doc(name, ds, config)

    config.out_dir.mkdir(parents=True, exist_ok=True)
    model_path = config.out_dir / f"model_{name}.json"
    model_path.write_text(json.dumps(doc) + "\n", encoding="utf-8")
    written = [model_path]

    if name == "lr":
        hist_path = config.out_dir / "lr_cost_history.csv"
        with open(hist_path, "w", encoding="utf-8") as fh:
            fh.write("epoch,cost\n")
            for i, cost in enumerate(history):
                fh.write(f"{i + 1},{cost}\n")
        written.append(hist_path)
    elif name == "fnn":
        hist_path = config.out_dir / "fnn_loss_history.csv"
        neural.write_loss_history_csv(history, hist_path)
        written.append(hist_path)

    print(f"trained {name}: " + ", ".join(str(p) for p in written))
    return EXIT_OK


def cmd_evaluate(config: RunConfig, args) -> int:
    ds = _load_split_dataset(config, args)
    model_path = Path(args.model_file) if args.model_file \
        else config.out_dir / f"model_{args.model}.json"
    if not model_path.exists():
        raise DataError(f"model file {model_path} not found")
    doc = json.loads(model_path.read_text(encoding="utf-8"))
    report = _evaluate_doc(doc, ds, args.eval_split)

    text = metrics.render([report], config.report_format,
                          metadata={"split": args.eval_split})
    config.out_dir.mkdir(parents=True, exist_ok=True)
    _write_report(config, f"report_{report.model_name.lower()}_{args.eval_split}", text)
    print(text, end="")
    return EXIT_OK


def cmd_compare(config: RunConfig, args) -> int:
    ds = _load_split_dataset(config, args)
    eval_split = {name: "test" if (args.eval_all_test or name == "fnn") else "validation"
                  for name in MODEL_NAMES}

    config.out_dir.mkdir(parents=True, exist_ok=True)
    reports = []
    for name in MODEL_NAMES:
        doc, history = _train_doc(name, ds, config)
        (config.out_dir / f"model_{name}.json").write_text(
            json.dumps(doc) + "\n", encoding="utf-8")
        if name == "fnn" and history is not None:
            neural.write_loss_history_csv(history, config.out_dir / "fnn_loss_history.csv")
        reports.append(_evaluate_doc(doc, ds, eval_split[name]))

    metadata = {
        "securities_code": config.securities_code,
        "master_seed": config.master_seed,
        "split_fractions": [config.train_frac, config.val_frac],
        "evaluation_splits": {MODEL_LABELS[n]: eval_split[n] for n in MODEL_NAMES},
        "note": "all models share one chronological split; scores on different "
                "ranges are not directly comparable",
    }
    footnote = ("all models scored on the test range" if args.eval_all_test else
                "LR, DT, RF scored on the validation range; FNN scored on the test range")
    text = metrics.render(reports, config.report_format, metadata=metadata,
                          footnote=footnote)
    path = _write_report(config, "report_compare", text)
    print(text, end="")
    print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", help="raw OHLCV CSV (default: $%s/%s)"
                        % (DATA_DIR_ENV, DATA_FILE_NAME))
    common.add_argument("--code", type=int, help="securities code to keep (default 6758)")
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--seed", type=int, help="master seed (default 42)")
    common.add_argument("--split", type=_parse_split,
                        help="train,validation fractions, e.g. 0.7,0.15")
    common.add_argument("--format", choices=["csv", "json", "table"],
                        help="report format (default table)")
    common.add_argument("--out", help="output directory (default ./out)")
    common.add_argument("--dataset", help="prepared dataset CSV "
                        "(default <out>/dataset.csv)")

    parser = _Parser(prog="candlebias",
                     description="Label OHLCV candles up/down and compare four "
                                 "from-scratch classifiers.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", parents=[common],
                       help="ingest, label and split the raw CSV")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", parents=[common], help="train one model")
    p.add_argument("--model", choices=MODEL_NAMES, required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="score a saved model")
    p.add_argument("--model", choices=MODEL_NAMES,
                   help="model trained into <out>/model_<name>.json")
    p.add_argument("--model-file", help="explicit model JSON path")
    p.add_argument("--eval-split", choices=["train", "validation", "test"],
                   default="validation")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", parents=[common],
                       help="train all four models and emit one report")
    p.add_argument("--eval-all-test", action="store_true",
                   help="score every model on the test range")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "evaluate" and not (args.model or args.model_file):
            parser.error("evaluate needs --model or --model-file")
        config = _merge_config(args)
        return args.func(config, args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingDivergedError, ValueError) as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING


if __name__ == "__main__":
    sys.exit(main())
