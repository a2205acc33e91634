"""
Rendering of evaluation outputs

- metrics table (Classifier, Accuracy, Balanced Accuracy, Recall, Precision, F1-Score) printed by `evaluate`
- roc.svg: per-fold ROC curves, the pooled curve and the chance diagonal
- top_features.txt: top-k source features per classifier

Everything here reads the files written by evaluation.write_report, so a
report can be rebuilt from an output directory alone.
"""

import json
import re
from pathlib import Path
from typing import Any, Dict, List, Mapping, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from .config import ClassifierKind  # noqa: E402
from .errors import EmptyReport  # noqa: E402
from .log import get_logger  # noqa: E402
from .metrics import read_roc_csv  # noqa: E402

logger = get_logger(__name__)

TABLE_COLUMNS = ["Classifier", "Accuracy", "Balanced Accuracy", "Recall", "Precision", "F1-Score"]
TABLE_FIELDS = ["accuracy", "balanced_accuracy", "recall", "precision_macro", "f1_macro"]

# Fixed SVG ids and no date stamp so the same inputs give the same file
_SVG_RC = {"svg.hashsalt": "balens", "svg.fonttype": "none"}


def format_metrics_table(metrics: Mapping[str, Any]) -> str:
    """
    Fixed-width table of fold-mean metrics, one row per classifier

    Precision and F1-Score are macro averages over the two classes.
    """
    rows = [TABLE_COLUMNS]
    for key, entry in metrics["classifiers"].items():
        mean = entry["mean"]
        rows.append([entry.get("label", key)] + [f"{mean[name]:.3f}" for name in TABLE_FIELDS])
    widths = [max(len(row[i]) for row in rows) for i in range(len(TABLE_COLUMNS))]

    lines = []
    for n, row in enumerate(rows):
        lines.append(" | ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        if n == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines)


def load_metrics(out_dir: Union[str, Path]) -> Dict[str, Any]:
    path = Path(out_dir) / "metrics.json"
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run `evaluate` first")
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _label(key: str) -> str:
    try:
        return ClassifierKind(key).label
    except ValueError:
        return key


def _fold_files(out_dir: Path) -> List[Path]:
    found = []
    for path in out_dir.glob("roc_fold*.csv"):
        match = re.fullmatch(r"roc_fold(\d+)\.csv", path.name)
        if match:
            found.append((int(match.group(1)), path))
    return [path for _, path in sorted(found)]


def render_roc_svg(out_dir: Union[str, Path], path: Union[str, Path, None] = None) -> Path:
    """
    Plot every classifier's fold curves (thin) and pooled curve (bold) with its mean AUC

    Returns:
        Path of the written SVG
    """
    out_dir = Path(out_dir)
    path = Path(path) if path else out_dir / "roc.svg"
    pooled_file = out_dir / "roc_pooled.csv"
    if not pooled_file.exists():
        raise FileNotFoundError(f"{pooled_file} not found; run `evaluate` first")
    pooled = read_roc_csv(pooled_file)
    folds = [read_roc_csv(p) for p in _fold_files(out_dir)]
    metrics = load_metrics(out_dir)

    with plt.rc_context(_SVG_RC):
        fig, ax = plt.subplots(figsize=(6, 6))
        colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
        for i, (key, curve) in enumerate(pooled.items()):
            color = colors[i % len(colors)]
            for fold in folds:
                if key in fold:
                    ax.plot(fold[key].fpr, fold[key].tpr, color=color, alpha=0.3, linewidth=0.8)
            entry = metrics["classifiers"].get(key, {})
            mean_auc = entry.get("mean", {}).get("auc", curve.auc)
            ax.plot(curve.fpr, curve.tpr, color=color, linewidth=2.0, label=f"{_label(key)} (AUC = {mean_auc:.2f})")
        ax.plot([0, 1], [0, 1], linestyle="--", color="grey", linewidth=1.0, label="Chance", gid="chance-diagonal")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.01)
        ax.set_xlabel("False positive rate")
        ax.set_ylabel("True positive rate")
        ax.set_title("ROC curves from cross-validation")
        ax.legend(loc="lower right")
        fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
        plt.close(fig)

    logger.info(f"Wrote {path}")
    return path


def format_top_features(importance: pd.DataFrame, top_k: int = 20) -> str:
    """Ranked text table per classifier, truncated to top_k"""
    if importance.empty:
        raise EmptyReport("importance table is empty")
    blocks = []
    for key, group in importance.groupby("classifier", sort=False):
        group = group.sort_values("rank").head(top_k)
        width = max(len("Feature"), group["feature"].str.len().max())
        lines = [f"{_label(str(key))} (top {len(group)})", f"{'Rank':>4}  {'Feature'.ljust(width)}  Score"]
        for row in group.itertuples(index=False):
            lines.append(f"{int(row.rank):>4}  {str(row.feature).ljust(width)}  {float(row.score):.4f}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def write_top_features(out_dir: Union[str, Path], top_k: int = 20) -> Path:
    out_dir = Path(out_dir)
    source = out_dir / "importance.csv"
    if not source.exists():
        raise FileNotFoundError(f"{source} not found; run `evaluate` first")
    importance = pd.read_csv(source, dtype={"classifier": str, "feature": str}, keep_default_na=False, float_precision="round_trip")
    path = out_dir / "top_features.txt"
    with open(path, "w", encoding="utf-8") as f:
        f.write(format_top_features(importance, top_k))
    logger.info(f"Wrote {path}")
    return path


def build_report(out_dir: Union[str, Path], top_k: int = 20) -> List[Path]:
    """roc.svg and top_features.txt from an evaluate output directory"""
    return [render_roc_svg(out_dir), write_top_features(out_dir, top_k)]
