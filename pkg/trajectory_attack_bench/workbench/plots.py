"""
Графики результатов: SVG и исходные ряды в CSV рядом с ними
"""

import csv
import logging
from pathlib import Path
from typing import Any, List, Mapping, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..metrics.report import HEADLINE_METRICS  # noqa: E402

logger = logging.getLogger(__name__)

# Стабильные id элементов SVG
matplotlib.rcParams["svg.hashsalt"] = "trajbench"


def stamp(config_hash: str, seed: int) -> str:
    return f"config_hash={config_hash} seed={seed}"


def _with(stem: Path, extension: str) -> Path:
    return stem.parent / f"{stem.name}.{extension}"


def _save_svg(fig, path: Path, label: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None, "Description": label})
    plt.close(fig)
    return path


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]], label: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# {label}\n")
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _track_rows(series: str, agent: str, points: np.ndarray) -> List[List[Any]]:
    return [[series, agent, step, repr(float(x)), repr(float(y))] for step, (x, y) in enumerate(points)]


def plot_attack(scene_id: str, arrays: Mapping[str, np.ndarray], stem: Path, label: str) -> List[Path]:
    """
    Атакованная сцена: истории, исходная и состязательная плотные траектории,
    истинное будущее и предсказания до и после атаки

    Args:
        scene_id: Идентификатор сцены
        arrays: Содержимое .npz сцены (histories, futures, adv_index, benign_dense,
            adv_dense, benign_pred, adv_pred)
        stem: Путь без расширения
        label: Метка с хешем конфигурации и зерном
    """
    adv = int(arrays["adv_index"])
    histories, futures = arrays["histories"], arrays["futures"]
    fig, ax = plt.subplots(figsize=(7, 5))
    rows: List[List[Any]] = []
    for i in range(histories.shape[0]):
        color = "tab:blue" if i == adv else "0.6"
        ax.plot(histories[i, :, 0], histories[i, :, 1], "o-", color=color, ms=3, lw=1)
        ax.plot(futures[i, :, 0], futures[i, :, 1], ":", color=color, lw=1)
        rows += _track_rows("history", str(i), histories[i])
        rows += _track_rows("future", str(i), futures[i])

    ax.plot(arrays["benign_dense"][:, 0], arrays["benign_dense"][:, 1], "-", color="tab:green", lw=1.5, label="D*")
    ax.plot(arrays["adv_dense"][:, 0], arrays["adv_dense"][:, 1], "-", color="tab:red", lw=1.5, label="D_adv")
    ax.plot(arrays["benign_pred"][adv, :, 0], arrays["benign_pred"][adv, :, 1], "--", color="tab:green", label="прогноз")
    ax.plot(arrays["adv_pred"][adv, :, 0], arrays["adv_pred"][adv, :, 1], "--", color="tab:red", label="прогноз под атакой")
    rows += _track_rows("benign_dense", str(adv), arrays["benign_dense"])
    rows += _track_rows("adv_dense", str(adv), arrays["adv_dense"])
    rows += _track_rows("benign_pred", str(adv), arrays["benign_pred"][adv])
    rows += _track_rows("adv_pred", str(adv), arrays["adv_pred"][adv])

    ax.set_title(scene_id)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x, м")
    ax.set_ylabel("y, м")
    ax.legend(loc="best", fontsize=8)
    paths = [_save_svg(fig, _with(stem, "svg"), label)]
    paths.append(_write_csv(_with(stem, "csv"), ["series", "agent", "step", "x", "y"], rows, label))
    return paths


def plot_metric_bars(aggregate: Mapping[str, Any], stem: Path, label: str) -> List[Path]:
    """Средние ADE/FDE/MR/ORR до и после атаки"""
    benign = aggregate.get("benign", {})
    adversarial = aggregate.get("adversarial", {})
    names = [n for n in HEADLINE_METRICS if n in benign and n in adversarial]
    b = np.array([benign[n] for n in names], dtype=float)
    a = np.array([adversarial[n] for n in names], dtype=float)
    x = np.arange(len(names))

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(x - 0.2, b, 0.4, label="benign", color="tab:green")
    ax.bar(x + 0.2, a, 0.4, label="adversarial", color="tab:red")
    ax.set_xticks(x)
    ax.set_xticklabels(names)
    ax.legend()
    rows = [[n, repr(float(bv)), repr(float(av))] for n, bv, av in zip(names, b, a)]
    return [
        _save_svg(fig, _with(stem, "svg"), label),
        _write_csv(_with(stem, "csv"), ["metric", "benign", "adversarial"], rows, label),
    ]


def plot_transfer_heatmap(rates: Mapping[str, Mapping[str, Optional[float]]], stem: Path, label: str) -> List[Path]:
    """Тепловая карта коэффициентов переноса; неопределённые значения пустые"""
    names = sorted(rates)
    matrix = np.array(
        [[np.nan if rates[s].get(t) is None else rates[s][t] for t in names] for s in names], dtype=float
    )
    fig, ax = plt.subplots(figsize=(1.5 + 1.2 * len(names), 1.2 + 1.0 * len(names)))
    image = ax.imshow(matrix, cmap="viridis", vmin=0.0)
    for i in range(len(names)):
        for j in range(len(names)):
            if np.isfinite(matrix[i, j]):
                ax.text(j, i, f"{matrix[i, j]:.2f}", ha="center", va="center", color="white", fontsize=8)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names)
    ax.set_xlabel("цель")
    ax.set_ylabel("источник")
    fig.colorbar(image, ax=ax)
    fig.tight_layout()
    rows = [[s, t, "" if np.isnan(matrix[i, j]) else repr(float(matrix[i, j]))] for i, s in enumerate(names) for j, t in enumerate(names)]
    return [
        _save_svg(fig, _with(stem, "svg"), label),
        _write_csv(_with(stem, "csv"), ["source", "target", "rate"], rows, label),
    ]
