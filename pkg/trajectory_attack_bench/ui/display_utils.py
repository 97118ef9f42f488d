"""
Утилиты отображения результатов в терминале (rich)
"""

import math
from typing import Any, Dict, List, Mapping, Optional, Sequence

from rich import box
from rich.align import Align
from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from ..utils.constants import APP_NAME, APP_VERSION


def _fmt(value: Any, digits: int = 4) -> str:
    if value is None:
        return "—"
    if isinstance(value, bool):
        return "да" if value else "нет"
    if isinstance(value, float):
        if math.isnan(value):
            return "n/a"
        return f"{value:.{digits}f}"
    return str(value)


class DisplayUtils:
    """Таблицы и панели для итогов команд"""

    def __init__(self, console: Console):
        self.console = console

    def print_header(self, command: str = ""):
        header_text = Text(f"🎯 {APP_NAME} v{APP_VERSION}", style="bold white")
        subtitle = Text(command or "Realistic adversarial trajectories", style="dim white")
        self.console.print(Panel(Align.center(f"{header_text}\n{subtitle}"), style="bold blue", box=box.DOUBLE))

    def display_report(self, report: Mapping[str, Any]):
        """Сводка отчёта кампании: метрики до/после атаки, VR, ΔSensitivity, сходство"""
        aggregate = report.get("aggregate", {})
        table = Table(title="[bold]📊 Метрики предсказания[/bold]", box=box.ROUNDED)
        table.add_column("Метрика", style="cyan")
        table.add_column("Benign", style="green", justify="right")
        table.add_column("Adversarial", style="red", justify="right")
        table.add_column("Δ, %", style="yellow", justify="right")
        benign = aggregate.get("benign", {})
        adversarial = aggregate.get("adversarial", {})
        for name in sorted(set(benign) | set(adversarial)):
            b, a = benign.get(name), adversarial.get(name)
            change = None
            if isinstance(b, float) and isinstance(a, float) and b > 0:
                change = 100.0 * (a - b) / b
            table.add_row(name, _fmt(b), _fmt(a), _fmt(change, 1))
        self.console.print(table)

        extra = Table(box=box.SIMPLE)
        extra.add_column("Показатель", style="cyan")
        extra.add_column("Значение", style="green", justify="right")
        extra.add_row("Сцен", _fmt(aggregate.get("scenes")))
        extra.add_row("VR", _fmt(aggregate.get("VR")))
        extra.add_row("ΔSensitivity", _fmt(aggregate.get("delta_sensitivity")))
        for name, value in sorted(aggregate.get("similarity", {}).items()):
            extra.add_row(f"Сходство {name}", _fmt(value))
        self.console.print(extra)

        failures = report.get("failures", [])
        if failures:
            self.display_failures(failures)

    def display_failures(self, failures: Sequence[Mapping[str, Any]]):
        table = Table(title="[bold red]⚠️ Сбойные сцены[/bold red]", box=box.ROUNDED)
        table.add_column("Сцена", style="cyan")
        table.add_column("Тип", style="magenta")
        table.add_column("Ошибка", style="red")
        for failure in failures:
            table.add_row(str(failure.get("scene_id")), str(failure.get("error_type")), str(failure.get("error")))
        self.console.print(table)

    def display_transfer(self, rates: Mapping[str, Mapping[str, Optional[float]]]):
        """Матрица коэффициентов переноса: строки - исходная модель, столбцы - целевая"""
        names = sorted(rates)
        table = Table(title="[bold]🔁 Перенос атаки[/bold]", box=box.ROUNDED)
        table.add_column("источник \\ цель", style="cyan")
        for name in names:
            table.add_column(name, justify="right")
        for source in names:
            table.add_row(source, *[_fmt(rates[source].get(target), 3) for target in names])
        self.console.print(table)

    def display_simulation(self, outcomes: Sequence[Mapping[str, Any]]):
        table = Table(title="[bold]🚗 Замкнутый цикл[/bold]", box=box.ROUNDED)
        table.add_column("Эпизод", style="cyan")
        table.add_column("Планировщик")
        table.add_column("Атака")
        table.add_column("Столкновения", justify="right")
        table.add_column("Съезды", justify="right")
        table.add_column("Перепланирований", justify="right")
        table.add_column("Ошибка", style="red")
        for o in outcomes:
            failed = bool(o.get("collisions") or o.get("offroad"))
            style = "bold red" if failed else None
            table.add_row(
                str(o.get("episode_id")),
                str(o.get("planner")),
                _fmt(o.get("attacked")),
                str(len(o.get("collisions", []))),
                str(len(o.get("offroad", []))),
                str(o.get("replans")),
                str(o.get("error") or ""),
                style=style,
            )
        self.console.print(table)

    def display_rows(self, title: str, columns: List[str], rows: List[List[Any]]):
        """Произвольная таблица (реконструкция, обучение)"""
        table = Table(title=f"[bold]{title}[/bold]", box=box.ROUNDED)
        for i, column in enumerate(columns):
            table.add_column(column, style="cyan" if i == 0 else None, justify="left" if i == 0 else "right")
        for row in rows:
            table.add_row(*[_fmt(v) for v in row])
        self.console.print(table)

    def display_metrics_summary(self, summary: Dict[str, Any]):
        table = Table(title="[bold]⏱️ Исполнение[/bold]", box=box.SIMPLE)
        table.add_column("Показатель", style="cyan")
        table.add_column("Значение", style="green", justify="right")
        for key in ("total_scenes", "successful_scenes", "failed_scenes", "skipped_scenes", "average_duration"):
            table.add_row(key, _fmt(summary.get(key), 2))
        for stage, value in summary.get("stage_averages", {}).items():
            table.add_row(f"{stage}, с", _fmt(value, 3))
        self.console.print(table)

    def display_error(self, error_message: str):
        self.console.print(Panel(f"❌ {error_message}", title="[bold red]Error[/bold red]", border_style="red"))

    def display_success(self, message: str):
        self.console.print(Panel(f"✅ {message}", title="[bold green]Success[/bold green]", border_style="green"))

    def display_info(self, message: str):
        self.console.print(Panel(f"ℹ️ {message}", title="[bold blue]Info[/bold blue]", border_style="blue"))
