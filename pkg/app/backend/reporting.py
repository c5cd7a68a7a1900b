"""
Result files of a benchmark run: results.csv (per seed), table.txt (per-row
medians, rendered from app/templates/table.txt.j2) and plot-data CSVs.
"""
import csv
import logging
import math
import os
import re
from typing import Dict, List

from jinja2 import Environment, FileSystemLoader

from schemas import BenchConfig, ExperimentResult
from settings import reference_value
from signal_lab import write_columns
from utils import format_float

logger = logging.getLogger(__name__)

templates_path = os.path.join(os.path.dirname(__file__), "..", "templates")
templates = Environment(
    loader=FileSystemLoader(templates_path),
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)


def format_rmse(value, digits: int = 4) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "n/a"
    return f"{value:.{digits}f}"

SCENARIO_TITLES = {
    "full": "Full-interval scenario (RMSE over t >= T/3)",
    "online": "Online scenario (endpoint RMSE over t >= T/3)",
}


def slugify(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9.]+", "_", label.replace("=", "")).strip("_")


# ============== results.csv ==============

def write_results_csv(results: List[ExperimentResult], path: str) -> None:
    """One line per (row, method, scenario, seed), in grid order."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row", "h", "sigma", "method", "scenario", "seed", "rmse", "hgo_eps"])
        for result in results:
            eps = "" if result.hgo_eps is None else format_float(result.hgo_eps)
            for scenario, values in (("full", result.per_seed_full), ("online", result.per_seed_online)):
                for seed, value in zip(result.seeds, values):
                    if math.isnan(value):
                        continue
                    writer.writerow([
                        result.label, format_float(result.scenario.h), format_float(result.scenario.sigma),
                        result.method, scenario, seed, format_float(value), eps,
                    ])
    logger.info(f"Wrote {path}")


# ============== table.txt ==============

def rank_marks(medians: Dict[str, float]) -> Dict[str, str]:
    """'*' for the lowest median, '+' for the second lowest; NaN never ranks."""
    finite = sorted((v, m) for m, v in medians.items() if not math.isnan(v))
    marks = {m: "" for m in medians}
    for mark, (_, method) in zip(("*", "+"), finite):
        marks[method] = mark
    return marks


def _table(results: List[ExperimentResult], config: BenchConfig, scenario: str) -> dict:
    labels = [row.label for row in config.rows]
    by_key = {(r.label, r.method): r for r in results}
    cells = {}
    for row in config.rows:
        medians = {}
        for method in config.methods:
            result = by_key.get((row.label, method))
            medians[method] = float("nan") if result is None else (
                result.rmse_full if scenario == "full" else result.rmse_online
            )
        marks = rank_marks(medians)
        for method in config.methods:
            text = format_rmse(medians[method]) + (marks[method] or " ")
            ref = reference_value(row.h, row.sigma, method, scenario)
            if ref is not None:
                text += f" [{format_rmse(ref)}]"
            cells[(row.label, method)] = text

    label_width = max(len("h, sigma"), *(len(label) for label in labels))
    col_width = max([len(m) for m in config.methods] + [len(c) for c in cells.values()])
    header = "  ".join(["h, sigma".ljust(label_width)] + [m.rjust(col_width) for m in config.methods])
    lines = [
        "  ".join([label.ljust(label_width)] + [cells[(label, m)].rjust(col_width) for m in config.methods])
        for label in labels
    ]
    return {"title": SCENARIO_TITLES[scenario], "header": header, "rule": "-" * len(header), "lines": lines}


def render_table(results: List[ExperimentResult], config: BenchConfig) -> str:
    failures = [f"{r.label} / {r.method}: {r.error}" for r in results if r.error]
    return templates.get_template("table.txt.j2").render(
        seeds=config.seeds,
        lam=format_float(config.lam),
        levant_L=config.levant_L,
        tables=[_table(results, config, scenario) for scenario in config.scenarios],
        failures=failures,
    )


def write_table(results: List[ExperimentResult], config: BenchConfig, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(render_table(results, config))
    logger.info(f"Wrote {path}")


# ============== Plot data ==============

def write_plot_data(out_dir: str, label: str, traces: dict) -> List[str]:
    """
    plot_<scenario>_<row>.csv with columns t, z_true, z_<method>... for each
    scenario of one row.
    """
    paths = []
    for scenario, (times, z_true, columns) in traces.items():
        path = os.path.join(out_dir, f"plot_{scenario}_{slugify(label)}.csv")
        names = ["t", "z_true"] + [f"z_{method}" for method in columns]
        write_columns(path, names, [times, z_true] + list(columns.values()))
        paths.append(path)
    return paths
