"""
Command-line entry point

    python -m src.cli synth --n 2000 --positive-rate 0.05 --seed 7 --out data
    python -m src.cli preprocess --data data/cohort.csv --out prep
    python -m src.cli evaluate --data data/cohort.csv --classifier brf --seed 7 --out run
    python -m src.cli report --out run

Values come from, in order of precedence: command-line flags, the JSON file
given with --config, BALENS_* environment variables, built-in defaults.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .config import (
    ALL_CLASSIFIERS,
    CsvFormat,
    ExperimentConfig,
    SyntheticSpec,
    default_out_dir,
    env_seed,
    env_threads,
)
from .data_model import load_csv, select_features, write_csv
from .errors import BalensError, ConfigInvalid
from .evaluation import load_domains, metrics_document, rank_importances, run_experiment, write_report
from .log import get_logger, set_level
from .preprocess import apply_imputation, build_imputation_plan, export_preprocessed, one_hot_encode
from .report import build_report, format_metrics_table
from .synthetic import generate_synthetic

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Keys a --config file may set, per subcommand
_CONFIG_KEYS = {
    "synth": {
        "n", "p_numeric", "p_categorical", "n_informative", "n_categories",
        "positive_rate", "class_separation", "missing_rate", "seed", "out",
    },
    "preprocess": {
        "data", "target", "categorical", "threshold", "seed", "out",
        "positive_token", "negative_token", "missing_tokens",
    },
    "evaluate": {
        "data", "target", "categorical", "folds", "classifier", "seed", "threads", "paper_mode",
        "threshold", "features", "feature_prefix", "domains", "save_models", "top_k", "out", "hyperparams",
        "positive_token", "negative_token", "missing_tokens",
    },
    "report": {"out", "top_k"},
}

_SPEC_KEYS = ["n", "p_numeric", "p_categorical", "n_informative", "n_categories",
              "positive_rate", "class_separation", "missing_rate"]


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON file supplying any flag of this subcommand")
    parser.add_argument("--out", help="Output directory (default: $BALENS_OUT or balens_out)")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")


def _data_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", help="Cohort CSV with a header row")
    parser.add_argument("--target", help="Target column name (default: dropout)")
    parser.add_argument("--categorical", action="append", help="Categorical column(s), comma-separated; repeatable")
    parser.add_argument("--threshold", type=float, help="Drop features missing in more than this fraction (default 0.30)")
    parser.add_argument("--seed", type=int, help="Experiment seed (default: $BALENS_SEED or 0)")
    parser.add_argument(
        "--positive-token",
        action="append",
        help="Target value meaning dropout (label 1); comma-separated, repeatable (default: $BALENS_POSITIVE_TOKENS or 1)",
    )
    parser.add_argument(
        "--negative-token",
        action="append",
        help="Target value meaning non-dropout (label 0); comma-separated, repeatable (default: $BALENS_NEGATIVE_TOKENS or 0)",
    )
    parser.add_argument(
        "--missing-tokens",
        help="Comma-separated cell values read as Missing, e.g. ',NA,?' (default: $BALENS_MISSING_TOKENS or ',NA,NaN')",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="balens", description="Balanced ensembles for imbalanced binary outcomes")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="Write a synthetic cohort to cohort.csv")
    _common(synth)
    synth.add_argument("--n", type=int, help="Number of rows (required)")
    synth.add_argument("--p-numeric", type=int)
    synth.add_argument("--p-categorical", type=int)
    synth.add_argument("--n-informative", type=int)
    synth.add_argument("--n-categories", type=int)
    synth.add_argument("--positive-rate", type=float)
    synth.add_argument("--class-separation", type=float)
    synth.add_argument("--missing-rate", type=float)
    synth.add_argument("--seed", type=int, help="Generator seed (default: $BALENS_SEED or 0)")

    prep = sub.add_parser("preprocess", help="Filter, impute and one-hot encode a cohort")
    _common(prep)
    _data_flags(prep)

    ev = sub.add_parser("evaluate", help="Stratified K-fold evaluation of the balanced ensembles")
    _common(ev)
    _data_flags(ev)
    ev.add_argument("--folds", type=int, help="Number of folds K (default 6)")
    ev.add_argument(
        "--classifier",
        action="append",
        choices=[k.value for k in ALL_CLASSIFIERS] + ["all"],
        help="Classifier to evaluate; repeatable (default: all four)",
    )
    ev.add_argument("--threads", type=int, help="Worker count (default: $BALENS_THREADS or all cores)")
    ev.add_argument("--paper-mode", action="store_true", default=None, help="Impute once on the full dataset before CV")
    ev.add_argument("--features", type=Path, help="File listing the feature columns to keep, one per line")
    ev.add_argument("--feature-prefix", action="append", help="Keep only features starting with this prefix; repeatable")
    ev.add_argument("--domains", type=Path, help="CSV of feature,domain for domain_importance.csv")
    ev.add_argument("--save-models", action="store_true", default=None, help="Write the last fold's models as JSON")
    ev.add_argument("--top-k", type=int, help="Features in the ranked view (default 20)")

    rep = sub.add_parser("report", help="Render roc.svg and top_features.txt from an evaluate directory")
    _common(rep)
    rep.add_argument("--top-k", type=int, help="Features per classifier (default 20)")
    return parser


def _load_config_file(path: Optional[Path], command: str) -> Dict[str, Any]:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigInvalid(f"{path}: not valid JSON ({e})")
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{path}: expected a JSON object")
    data = {key.replace("-", "_"): value for key, value in data.items()}
    unknown = set(data) - _CONFIG_KEYS[command]
    if unknown:
        raise ConfigInvalid(f"{path}: unknown key(s) for {command}: {', '.join(sorted(unknown))}")
    return data


def _resolve(args: argparse.Namespace, file_values: Dict[str, Any], key: str, default: Any = None) -> Any:
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in file_values:
        return file_values[key]
    return default


def _categorical(args, file_values) -> set:
    raw = _resolve(args, file_values, "categorical", [])
    if isinstance(raw, str):
        raw = [raw]
    return {name.strip() for item in raw for name in str(item).split(",") if name.strip()}


def _token_list(raw: Any, keep_empty: bool) -> List[str]:
    if isinstance(raw, str):
        raw = [raw]
    tokens = [token.strip() for item in raw for token in str(item).split(",")]
    return tokens if keep_empty else [token for token in tokens if token]


def _csv_format(args, file_values) -> CsvFormat:
    values = {}
    positive = _resolve(args, file_values, "positive_token")
    if positive is not None:
        values["positive_tokens"] = _token_list(positive, keep_empty=False)
    negative = _resolve(args, file_values, "negative_token")
    if negative is not None:
        values["negative_tokens"] = _token_list(negative, keep_empty=False)
    missing = _resolve(args, file_values, "missing_tokens")
    if missing is not None:
        # ",?" means the empty cell and "?"
        values["missing_tokens"] = _token_list(missing, keep_empty=True)
    return CsvFormat.from_mapping(values)


def _load_dataset(args, file_values, csv_format: Optional[CsvFormat] = None):
    data = _resolve(args, file_values, "data")
    if data is None:
        raise ConfigInvalid("--data is required")
    fmt = csv_format or _csv_format(args, file_values)
    return load_csv(
        data,
        target_column=_resolve(args, file_values, "target", "dropout"),
        categorical_columns=_categorical(args, file_values),
        missing_tokens=set(fmt.missing_tokens),
        positive_tokens=set(fmt.positive_tokens),
        negative_tokens=set(fmt.negative_tokens),
    )


def _out_dir(args, file_values) -> Path:
    out = Path(_resolve(args, file_values, "out", default_out_dir()))
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args, file_values) -> int:
    values = {key: _resolve(args, file_values, key) for key in _SPEC_KEYS}
    if values["n"] is None:
        raise ConfigInvalid("--n is required")
    values = {key: value for key, value in values.items() if value is not None}
    values["seed"] = _resolve(args, file_values, "seed", env_seed())
    spec = SyntheticSpec.from_mapping(values)

    ds = generate_synthetic(spec)
    path = _out_dir(args, file_values) / "cohort.csv"
    write_csv(ds, path)
    negatives, positives = ds.class_counts()
    print(f"Wrote {path}")
    print(f"  rows: {ds.n_rows}  features: {ds.n_features}  positives: {positives} ({positives / ds.n_rows:.2%})")
    return EXIT_OK


def cmd_preprocess(args, file_values) -> int:
    ds = _load_dataset(args, file_values)
    seed = _resolve(args, file_values, "seed", env_seed())
    threshold = _resolve(args, file_values, "threshold", 0.30)
    if not 0.0 <= threshold <= 1.0:
        raise ConfigInvalid("--threshold must lie in [0, 1]")
    plan = build_imputation_plan(ds, seed, threshold)
    encoded = one_hot_encode(apply_imputation(ds, plan))
    csv_path, sidecar_path = export_preprocessed(encoded, plan, _out_dir(args, file_values))
    print(f"Wrote {csv_path} ({encoded.values.shape[0]} rows x {encoded.n_columns} columns)")
    print(f"Wrote {sidecar_path} ({len(plan.dropped_features)} feature(s) dropped)")
    return EXIT_OK


def _feature_subset(ds, args, file_values):
    features_file = _resolve(args, file_values, "features")
    prefixes = _resolve(args, file_values, "feature_prefix")
    if isinstance(prefixes, str):
        prefixes = [prefixes]
    if features_file is None and not prefixes:
        return ds
    keep = list(ds.feature_names)
    if features_file is not None:
        with open(features_file, "r", encoding="utf-8") as f:
            wanted = [line.strip() for line in f if line.strip() and not line.startswith("#")]
        ds = select_features(ds, wanted)
        keep = ds.feature_names
    if prefixes:
        keep = [name for name in keep if any(name.startswith(p) for p in prefixes)]
        if not keep:
            raise ConfigInvalid(f"no feature starts with {', '.join(prefixes)}")
        ds = select_features(ds, keep)
    logger.info(f"Restricted to {ds.n_features} feature(s)")
    return ds


def _classifiers(args, file_values) -> List[str]:
    chosen = _resolve(args, file_values, "classifier")
    if chosen is None:
        return [k.value for k in ALL_CLASSIFIERS]
    if isinstance(chosen, str):
        chosen = [chosen]
    known = {k.value for k in ALL_CLASSIFIERS}
    unknown = set(chosen) - known - {"all"}
    if unknown:
        raise ConfigInvalid(f"unknown classifier(s): {', '.join(sorted(unknown))}")
    if "all" in chosen:
        return [k.value for k in ALL_CLASSIFIERS]
    # Report order, duplicates removed
    return [k.value for k in ALL_CLASSIFIERS if k.value in set(chosen)]


def cmd_evaluate(args, file_values) -> int:
    csv_format = _csv_format(args, file_values)
    config = ExperimentConfig.from_mapping(
        {
            "classifiers": _classifiers(args, file_values),
            "K": _resolve(args, file_values, "folds", 6),
            "seed": _resolve(args, file_values, "seed", env_seed()),
            "paper_mode": bool(_resolve(args, file_values, "paper_mode", False)),
            "missingness_threshold": _resolve(args, file_values, "threshold", 0.30),
            "hyperparams": file_values.get("hyperparams", {}),
            "top_k": _resolve(args, file_values, "top_k", 20),
            "threads": _resolve(args, file_values, "threads", env_threads()),
            "dataset": str(_resolve(args, file_values, "data", "")) or None,
            "csv_format": csv_format,
        }
    )
    ds = _feature_subset(_load_dataset(args, file_values, csv_format), args, file_values)
    domains_file = _resolve(args, file_values, "domains")
    domains = load_domains(domains_file) if domains_file is not None else None
    save_models = bool(_resolve(args, file_values, "save_models", False))
    out_dir = _out_dir(args, file_values)

    report = run_experiment(config, ds, keep_models=save_models)
    write_report(report, out_dir, domains=domains, save_models=save_models)

    print(format_metrics_table(metrics_document(report)))
    top = rank_importances(report, config.top_k)
    print(f"\nTop {len(top)} feature(s): {', '.join(name for name, _ in top)}")
    print(f"\nResults written to {out_dir}")
    return EXIT_OK


def cmd_report(args, file_values) -> int:
    out_dir = Path(_resolve(args, file_values, "out", default_out_dir()))
    if not out_dir.is_dir():
        raise FileNotFoundError(f"{out_dir} is not an evaluate output directory")
    top_k = _resolve(args, file_values, "top_k", 20)
    if top_k < 1:
        raise ConfigInvalid("--top-k must be >= 1")
    for path in build_report(out_dir, top_k):
        print(f"Wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK

    if args.log_level:
        set_level(args.log_level)

    try:
        file_values = _load_config_file(args.config, args.command)
        return _COMMANDS[args.command](args, file_values)
    except ConfigInvalid as e:
        print(f"balens {args.command}: configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (BalensError, OSError) as e:
        print(f"balens {args.command}: error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
