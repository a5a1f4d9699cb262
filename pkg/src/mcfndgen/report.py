"""Diagnostic report for a generated stochastic instance file.

Reads the superposed per-scenario blocks back, detects which parameters
actually vary, and writes a delimited summary of the achieved
probability-weighted moments next to a set of figures: value histograms
for a sample of varying parameters, the achieved correlation matrix, and
(when target files are supplied) achieved-versus-target moment errors.

Everything lands in one output directory; nothing is displayed
interactively.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .cli import CliConfig, Option, UsageError, _HelpRequested, _usage, resolve_config
from .errors import McfndError
from .formats import read_corr, read_moments, read_stochastic
from .model import DetInstance, ParamFamily
from .moments import CorrelationMatrix, MomentTargets

REPORT_OPTIONS: list[Option] = [
    Option("-I", str, None, "stochastic instance file to analyze", "FILE"),
    Option("-O", str, "report", "output directory for the report", "DIR"),
    Option("-MO", str, None, "target moments file to compare against", "FILE"),
    Option("-CO", str, None, "target correlations file to compare against", "FILE"),
    Option("-maxHist", int, 12, "histogram panels to draw", "INT"),
    Option("-V", int, 1, "verbosity", "INT"),
]


@dataclass(frozen=True)
class VaryingParameter:
    family: ParamFamily
    indices: tuple[int, ...]
    values: np.ndarray  # one value per scenario

    @property
    def label(self) -> str:
        pos = "_".join(str(i + 1) for i in self.indices)
        return f"{self.family.name.lower()}_{pos}"


def _parameter_matrix(instances: list[DetInstance]) -> list[VaryingParameter]:
    """All parameters that take more than one value across the scenarios."""
    first = instances[0]
    n_a, n_k = first.arc_count, first.commodity_count
    varying: list[VaryingParameter] = []

    demands = np.array([[inst.commodities[k].demand for inst in instances] for k in range(n_k)])
    for k in range(n_k):
        if np.ptp(demands[k]) > 0:
            varying.append(VaryingParameter(ParamFamily.DEMAND, (k,), demands[k]))
    capacity = np.array([inst.capacity for inst in instances]).T
    for a in range(n_a):
        if np.ptp(capacity[a]) > 0:
            varying.append(VaryingParameter(ParamFamily.ARC_CAPACITY, (a,), capacity[a]))
    if first.use_com_capacity:
        com = np.array([inst.com_capacity for inst in instances])  # (s, a, k)
        for a in range(n_a):
            for k in range(n_k):
                if np.ptp(com[:, a, k]) > 0:
                    varying.append(
                        VaryingParameter(ParamFamily.COM_CAPACITY, (a, k), com[:, a, k])
                    )
    fixed = np.array([inst.fixed_cost for inst in instances]).T
    for a in range(n_a):
        if np.ptp(fixed[a]) > 0:
            varying.append(VaryingParameter(ParamFamily.FIXED_COST, (a,), fixed[a]))
    var_cost = np.array([inst.var_cost for inst in instances])  # (s, a, k)
    for a in range(n_a):
        for k in range(n_k):
            if np.ptp(var_cost[:, a, k]) > 0:
                varying.append(VaryingParameter(ParamFamily.VAR_COST, (a, k), var_cost[:, a, k]))
    return varying


def _weighted_moments(values: np.ndarray, probs: np.ndarray) -> tuple[float, float, float, float]:
    mean = float(probs @ values)
    centered = values - mean
    var = float(probs @ centered**2)
    sd = var**0.5
    skew = float(probs @ centered**3) / sd**3 if sd > 0 else 0.0
    kurt = float(probs @ centered**4) / var**2 if var > 0 else 0.0
    return mean, sd, skew, kurt


def write_summary_csv(
    path: Path,
    varying: list[VaryingParameter],
    probs: np.ndarray,
    targets: Optional[MomentTargets],
) -> None:
    header = "parameter,family,mean,std_dev,skewness,kurtosis"
    if targets is not None:
        header += ",target_mean,target_std_dev,target_skewness,target_kurtosis,max_moment_error"
    lines = [header]
    for i, param in enumerate(varying):
        mean, sd, skew, kurt = _weighted_moments(param.values, probs)
        row = f"{param.label},{param.family.name},{mean!r},{sd!r},{skew!r},{kurt!r}"
        if targets is not None:
            tm, ts = float(targets.mean[i]), float(targets.std_dev[i])
            tg1, tg2 = float(targets.skewness[i]), float(targets.kurtosis[i])
            err = max(
                abs(mean - tm) / ts, abs(sd - ts) / ts, abs(skew - tg1), abs(kurt - tg2)
            )
            row += f",{tm!r},{ts!r},{tg1!r},{tg2!r},{err!r}"
        lines.append(row)
    path.write_text("\n".join(lines) + "\n")


def _figure_histograms(path: Path, varying: list[VaryingParameter], limit: int) -> None:
    sample = varying[:limit]
    cols = min(4, len(sample))
    rows = (len(sample) + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 2.4 * rows), squeeze=False)
    for ax in axes.ravel():
        ax.set_visible(False)
    for ax, param in zip(axes.ravel(), sample):
        ax.set_visible(True)
        ax.hist(param.values, bins=min(30, max(8, param.values.size // 12)), color="#4878d0")
        ax.set_title(param.label, fontsize=8)
        ax.tick_params(labelsize=7)
    fig.suptitle("scenario value distributions")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _figure_correlation(
    path: Path,
    varying: list[VaryingParameter],
    probs: np.ndarray,
    target: Optional[CorrelationMatrix],
) -> None:
    matrix = np.vstack([p.values for p in varying])
    means = matrix @ probs
    centered = matrix - means[:, None]
    cov = (centered * probs) @ centered.T
    sd = np.sqrt(np.diag(cov))
    corr = cov / np.outer(sd, sd)
    panels = 1 if target is None else 2
    fig, axes = plt.subplots(1, panels, figsize=(5.2 * panels, 4.4), squeeze=False)
    im = axes[0, 0].imshow(corr, vmin=-1, vmax=1, cmap="RdBu_r")
    axes[0, 0].set_title("achieved correlation")
    fig.colorbar(im, ax=axes[0, 0], fraction=0.046)
    if target is not None:
        err = np.abs(corr - target.matrix)
        im = axes[0, 1].imshow(err, vmin=0, cmap="magma")
        axes[0, 1].set_title(f"|achieved - target| (max {err.max():.2e})")
        fig.colorbar(im, ax=axes[0, 1], fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _figure_moment_errors(
    path: Path, varying: list[VaryingParameter], probs: np.ndarray, targets: MomentTargets
) -> None:
    achieved = np.array([_weighted_moments(p.values, probs) for p in varying])
    errors = np.column_stack(
        [
            np.abs(achieved[:, 0] - targets.mean) / targets.std_dev,
            np.abs(achieved[:, 1] - targets.std_dev) / targets.std_dev,
            np.abs(achieved[:, 2] - targets.skewness),
            np.abs(achieved[:, 3] - targets.kurtosis),
        ]
    )
    fig, ax = plt.subplots(figsize=(7.0, 3.6))
    x = np.arange(len(varying))
    for col, label in enumerate(("mean", "std dev", "skewness", "kurtosis")):
        ax.plot(x, errors[:, col], marker=".", linestyle="none", markersize=4, label=label)
    ax.set_yscale("log")
    ax.set_xlabel("parameter (canonical order)")
    ax.set_ylabel("abs error (variance-1 scale)")
    ax.legend(fontsize=8)
    ax.set_title("moment matching errors")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def run_report(argv: list[str]) -> int:
    program = "scenreport"
    summary = "summarize a stochastic instance file as CSV tables and figures"
    try:
        cfg = resolve_config(REPORT_OPTIONS, argv)
    except _HelpRequested:
        print(_usage(program, summary, REPORT_OPTIONS))
        return 0
    except UsageError as exc:
        print(f"{program}: {exc}", file=sys.stderr)
        print(_usage(program, summary, REPORT_OPTIONS), file=sys.stderr)
        return 2

    try:
        if cfg["I"] is None:
            raise UsageError("a stochastic instance file is required (-I)")
        blocks = read_stochastic(Path(cfg["I"]).read_text())
        numbers, probs, instances = zip(*blocks)
        probs = np.array(probs, dtype=float)
        probs = probs / probs.sum()
        varying = _parameter_matrix(list(instances))
        if not varying:
            raise McfndError("no parameter varies across the scenarios; nothing to report")

        targets = read_moments(Path(cfg["MO"]).read_text()) if cfg["MO"] else None
        corr_target = read_corr(Path(cfg["CO"]).read_text()) if cfg["CO"] else None
        if targets is not None and targets.variable_count != len(varying):
            raise McfndError(
                f"target moments cover {targets.variable_count} variables but "
                f"{len(varying)} parameters vary in the file"
            )
        if corr_target is not None and corr_target.size != len(varying):
            raise McfndError(
                f"target correlations cover {corr_target.size} variables but "
                f"{len(varying)} parameters vary in the file"
            )

        out_dir = Path(cfg["O"])
        out_dir.mkdir(parents=True, exist_ok=True)
        write_summary_csv(out_dir / "summary.csv", varying, probs, targets)
        _figure_histograms(out_dir / "histograms.png", varying, cfg["maxHist"])
        _figure_correlation(out_dir / "correlation.png", varying, probs, corr_target)
        written = ["summary.csv", "histograms.png", "correlation.png"]
        if targets is not None:
            _figure_moment_errors(out_dir / "moment_errors.png", varying, probs, targets)
            written.append("moment_errors.png")
        if cfg["V"] >= 1:
            print(
                f"{len(instances)} scenarios, {len(varying)} varying parameters -> "
                f"{out_dir}/{{{', '.join(written)}}}"
            )
        return 0
    except UsageError as exc:
        print(f"{program}: {exc}", file=sys.stderr)
        return 2
    except (McfndError, OSError, ValueError) as exc:
        print(f"{program}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_report(sys.argv[1:]))
