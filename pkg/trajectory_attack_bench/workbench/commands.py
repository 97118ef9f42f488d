"""
Подкоманды CLI верстака: разбор аргументов, переопределения конфигурации и обработчики
"""

import argparse
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from rich.console import Console

from ..attack import DIRECTION_NAMES
from ..config import CampaignConfig
from ..core.errors import ConfigError, InvalidInputError
from ..predictors import (
    PredictionModel,
    Scene,
    build_surrogate,
    load_model,
    save_model,
    train_surrogate,
    training_ade,
)
from ..predictors.adversarial import adversarial_train
from ..ui import DisplayUtils
from ..utils.constants import DEFAULT_HISTORY_LEN, REPORT_FORMAT
from .campaign import (
    REPORT_FILE,
    Campaign,
    augment_dataset,
    build_predictor,
    reconstruct_scenes,
    evaluation_window,
    run_campaign,
    run_simulations,
    transfer_matrix,
    write_json,
)
from .plots import plot_transfer_heatmap, stamp
from .scenario_io import ScenarioFile, load_map, load_scenario, save_scenario
from .synth import SynthSpec, synthesize_scenes

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_CONFIG = 2

BUILTIN_MODELS = ("constant-velocity", "kinematic-extrapolation", "social-mlp")

# флаг CLI → (секция, поле)
CLI_OVERRIDES: Dict[str, Tuple[str, str]] = {
    "scenario": ("campaign", "scenario"),
    "map": ("campaign", "map"),
    "out": ("campaign", "out"),
    "seed": ("campaign", "seed"),
    "workers": ("campaign", "workers"),
    "method": ("campaign", "method"),
    "simulate": ("campaign", "simulate"),
    "model": ("predictor", "model_path"),
    "bridge_cmd": ("predictor", "bridge_cmd"),
    "predictor": ("predictor", "kind"),
    "variant": ("attack", "variant"),
    "alpha": ("attack", "alpha"),
    "beta": ("attack", "beta"),
    "gamma": ("attack", "gamma"),
    "eps": ("attack", "eps"),
    "steps": ("attack", "pgd_steps"),
    "lp": ("attack", "lp"),
    "planner": ("planner", "kind"),
    "sim_mode": ("simulation", "mode"),
}


@dataclass
class CommandContext:
    cfg: CampaignConfig
    args: argparse.Namespace
    console: Console
    display: DisplayUtils

    @property
    def out_dir(self) -> Path:
        return Path(self.cfg.campaign.out)

    def document(self, **payload: Any) -> Dict[str, Any]:
        """Выходной документ с хешем конфигурации и зерном"""
        return {
            "format": REPORT_FORMAT,
            "config_hash": self.cfg.config_hash(),
            "seed": self.cfg.campaign.seed,
            **payload,
        }

    def scenario(self) -> ScenarioFile:
        if not self.cfg.campaign.scenario:
            raise ConfigError("не задан файл сценария (--scenario или campaign.scenario)")
        scenario = load_scenario(self.cfg.campaign.scenario)
        if self.cfg.campaign.map:
            scenario.map_model = load_map(self.cfg.campaign.map)
        return scenario


def cli_overrides(args: argparse.Namespace) -> Dict[Tuple[str, str], Any]:
    """Заданные флаги CLI в виде переопределений конфигурации"""
    overrides = {}
    for name, key in CLI_OVERRIDES.items():
        value = getattr(args, name, None)
        if value is not None:
            overrides[key] = value
    return overrides


def _add_common(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("общие параметры")
    group.add_argument("--scenario", help="файл сценария (JSON)")
    group.add_argument("--map", help="файл карты вместо указанной в сценарии")
    group.add_argument("--model", help="файл модели (.npz)")
    group.add_argument("--bridge-cmd", dest="bridge_cmd", help="команда внешнего предсказателя (JSON по stdin/stdout)")
    group.add_argument("--predictor", choices=["constant-velocity", "kinematic-extrapolation", "social-mlp", "oracle"])
    group.add_argument("--variant", choices=["opt-init", "opt-end"])
    group.add_argument("--alpha", type=float, help="вес l_col")
    group.add_argument("--beta", type=float, help="вес l_bh")
    group.add_argument("--gamma", type=float, help="вес l_dyn")
    group.add_argument("--eps", type=float, help="допуск отклонения узлов, м")
    group.add_argument("--steps", type=int, help="число шагов PGD")
    group.add_argument("--lp", type=int, help="кадров последовательной атаки")
    group.add_argument("--seed", type=int)
    group.add_argument("--out", help="каталог результатов")
    group.add_argument("--workers", type=int, help="число потоков (по умолчанию число CPU)")


def build_parser(prog: str, description: str, epilog: str, config_default: str) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=prog,
        description=description,
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=epilog,
    )
    parser.add_argument("--config", default=config_default, help=f"файл конфигурации (по умолчанию: {config_default})")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text)
        _add_common(p)
        return p

    p = command("synth", "генерация синтетического набора сцен")
    p.add_argument("--count", type=int, help="число сцен (по умолчанию campaign.synth_count)")
    p.add_argument("--history-len", dest="history_len", type=int, help="H_obs (по умолчанию H + L_p − 1)")
    p.add_argument("--name", default="scenario.json", help="имя файла сценария в каталоге --out")

    command("reconstruct", "реконструкция плотных траекторий атакующих агентов")

    p = command("attack", "кампания: реконструкция → атака → оценка")
    p.add_argument("--method", choices=["pgd", "random", "search"])
    p.add_argument("--simulate", action="store_true", default=None, help="добавить замкнутый цикл")
    p.add_argument("--planner", choices=["rule", "lattice-mpc"])

    command("eval", "пересчёт отчёта из сохранённых результатов сцен")

    p = command("simulate", "замкнутый цикл на наборе эпизодов без атаки и под атакой")
    p.add_argument("--planner", choices=["rule", "lattice-mpc"])
    p.add_argument("--sim-mode", dest="sim_mode", choices=["open", "closed"])

    p = command("augment", "расширение набора направленными состязательными траекториями")
    p.add_argument(
        "--directions",
        default=",".join(DIRECTION_NAMES),
        help=f"направления через запятую из {', '.join(DIRECTION_NAMES)}",
    )
    p.add_argument("--name", default="augmented.json", help="имя файла сценария в каталоге --out")

    p = command("train", "обучение суррогата на наборе сцен")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--save", help="куда сохранить модель (по умолчанию <out>/model.npz)")

    p = command("advtrain", "состязательное дообучение social-mlp (--model)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--save", help="куда сохранить модель (по умолчанию <out>/robust_model.npz)")

    p = command("transfer", "матрица переноса атаки между моделями")
    p.add_argument(
        "--models",
        nargs="+",
        required=True,
        help=f"файлы моделей или встроенные суррогаты ({', '.join(BUILTIN_MODELS)})",
    )

    command("report", "вывод сохранённого отчёта")
    return parser


def _resolve_model(entry: str, ctx: CommandContext) -> Tuple[str, PredictionModel]:
    if entry in BUILTIN_MODELS:
        spec = ctx.cfg.predictor.spec.model_copy(update={"kind": entry})
        return entry, build_surrogate(spec)
    path = Path(entry)
    return path.stem, load_model(path)


def cmd_synth(ctx: CommandContext) -> int:
    args = ctx.args
    history_len = args.history_len or DEFAULT_HISTORY_LEN + ctx.cfg.attack.lp - 1
    try:
        spec = SynthSpec(history_len=history_len)
    except ValueError as e:
        raise ConfigError(f"параметры генератора: {e}") from e
    count = args.count or ctx.cfg.campaign.synth_count
    with ctx.console.status(f"[bold green]Генерация {count} сцен...", spinner="dots"):
        scenario = synthesize_scenes(spec, count, ctx.cfg.campaign.seed)
        path = save_scenario(scenario, ctx.out_dir / args.name)
    ctx.display.display_success(f"Сценарий записан: {path} ({count} сцен, H={history_len})")
    return EXIT_OK


def cmd_reconstruct(ctx: CommandContext) -> int:
    scenario = ctx.scenario()
    with ctx.console.status("[bold green]Реконструкция...", spinner="dots"):
        summaries = reconstruct_scenes(scenario.scenes, ctx.cfg.effective_attack())
    ctx.display.display_rows(
        "🧩 Реконструкция",
        ["Сцена", "MSE узлов, м²", "Шагов", "Нарушение", "v≈0"],
        [s.row() for s in summaries],
    )
    write_json(ctx.out_dir / "reconstruction.json", ctx.document(scenes=[s.__dict__ for s in summaries]))
    return EXIT_FAILURES if any(s.violating for s in summaries) else EXIT_OK


def cmd_attack(ctx: CommandContext) -> int:
    with ctx.console.status("[bold green]Кампания...", spinner="dots"):
        run = run_campaign(ctx.cfg)
    ctx.display.display_report(run.document)
    if run.simulation:
        ctx.display.display_simulation(run.document.get("simulation", []))
    ctx.display.display_metrics_summary(run.metrics.get_summary())
    if run.partial:
        ctx.display.display_error(f"Кампания частичная, отчёт: {run.report_path}")
        return EXIT_FAILURES
    ctx.display.display_success(f"Отчёт: {run.report_path}")
    return EXIT_OK


def cmd_eval(ctx: CommandContext) -> int:
    scenario = ctx.scenario()
    run = Campaign(ctx.cfg, scenario, None, scenario.map_model).finish()
    ctx.display.display_report(run.document)
    return EXIT_FAILURES if run.partial else EXIT_OK


def cmd_simulate(ctx: CommandContext) -> int:
    predictor = build_predictor(ctx.cfg.predictor)
    try:
        with ctx.console.status("[bold green]Замкнутый цикл...", spinner="dots"):
            outcomes = run_simulations(ctx.cfg, predictor)
    finally:
        predictor.close()
    rows = []
    for outcome in outcomes:
        data = outcome.to_dict()
        data.pop("ego", None)
        rows.append(data)
    ctx.display.display_simulation(rows)
    write_json(ctx.out_dir / "simulation.json", ctx.document(planner=ctx.cfg.planner.kind, episodes=rows))
    return EXIT_FAILURES if any(o.error for o in outcomes) else EXIT_OK


def _directions(raw: str) -> List[str]:
    directions = [d.strip() for d in raw.split(",") if d.strip()]
    unknown = [d for d in directions if d not in DIRECTION_NAMES]
    if unknown or not directions:
        raise ConfigError(f"неизвестные направления: {', '.join(unknown) or '(пусто)'}")
    return directions


def cmd_augment(ctx: CommandContext) -> int:
    directions = _directions(ctx.args.directions)
    scenario = ctx.scenario()
    with ctx.console.status("[bold green]Аугментация...", spinner="dots"):
        scenes, results = augment_dataset(scenario.scenes, directions, ctx.cfg.effective_attack())
    scenario.scenes = scenes
    path = save_scenario(scenario, ctx.out_dir / ctx.args.name)
    violating = sum(r.is_violating for r in results)
    ctx.display.display_rows(
        "🧭 Аугментация",
        ["Показатель", "Значение"],
        [["Исходных сцен", len(scenes) - len(results)], ["Новых сцен", len(results)], ["Нарушают границы", violating]],
    )
    ctx.display.display_success(f"Сценарий записан: {path}")
    return EXIT_FAILURES if violating else EXIT_OK


def _training_summary(ctx: CommandContext, title: str, model: PredictionModel, trace: List[float], scenes) -> None:
    ade = float(np.mean([training_ade(model, s) for s in scenes]))
    rows = [["Эпох", len(trace)], ["ADE на наборе, м", ade]]
    if trace:
        rows += [["Потеря (начало)", trace[0]], ["Потеря (конец)", trace[-1]]]
    ctx.display.display_rows(title, ["Показатель", "Значение"], rows)


def _training_scenes(ctx: CommandContext) -> List[Scene]:
    """Последние окна длины H: модель обучается на тех же входах, что видит атака"""
    scenario = ctx.scenario()
    return [evaluation_window(s, ctx.cfg.attack.lp) for s in scenario.scenes]


def cmd_train(ctx: CommandContext) -> int:
    if ctx.cfg.predictor.kind == "oracle":
        raise ConfigError("оракул не обучается")
    scenes = _training_scenes(ctx)
    campaign = ctx.cfg.campaign
    spec = ctx.cfg.predictor.spec.model_copy(
        update={
            "kind": ctx.cfg.predictor.kind,
            "seed": campaign.seed,
            "history_len": scenes[0].history_len,
            "horizon": scenes[0].future_len,
        }
    )
    epochs = ctx.args.epochs if ctx.args.epochs is not None else campaign.train_epochs
    lr = ctx.args.lr if ctx.args.lr is not None else campaign.train_lr
    with ctx.console.status(f"[bold green]Обучение {spec.kind}...", spinner="dots"):
        model, trace = train_surrogate(scenes, spec, epochs, lr)
    path = save_model(model, ctx.args.save or ctx.out_dir / "model.npz")
    _training_summary(ctx, f"🔧 Обучение {spec.kind}", model, trace, scenes)
    ctx.display.display_success(f"Модель сохранена: {path}")
    return EXIT_OK


def cmd_advtrain(ctx: CommandContext) -> int:
    if not ctx.cfg.predictor.model_path:
        raise ConfigError("для состязательного обучения нужна исходная модель (--model)")
    scenes = _training_scenes(ctx)
    model = load_model(ctx.cfg.predictor.model_path)
    epochs = ctx.args.epochs if ctx.args.epochs is not None else ctx.cfg.campaign.train_epochs
    lr = ctx.args.lr if ctx.args.lr is not None else ctx.cfg.campaign.train_lr
    attack_cfg = ctx.cfg.effective_attack().model_copy(update={"lp": 1})
    try:
        with ctx.console.status("[bold green]Состязательное обучение...", spinner="dots"):
            robust, trace = adversarial_train(model, scenes, attack_cfg, epochs, lr)
    except InvalidInputError as e:
        raise ConfigError(str(e)) from e
    path = save_model(robust, ctx.args.save or ctx.out_dir / "robust_model.npz")
    _training_summary(ctx, "🛡️ Состязательное обучение", robust, trace, scenes)
    ctx.display.display_success(f"Модель сохранена: {path}")
    return EXIT_OK


def cmd_transfer(ctx: CommandContext) -> int:
    scenario = ctx.scenario()
    models = dict(_resolve_model(entry, ctx) for entry in ctx.args.models)
    if len(models) < 2:
        raise ConfigError("для матрицы переноса нужны хотя бы две разные модели")
    with ctx.console.status("[bold green]Перенос атаки...", spinner="dots"):
        result = transfer_matrix(
            models,
            [evaluation_window(s, ctx.cfg.attack.lp) for s in scenario.scenes],
            ctx.cfg.effective_attack(),
            scenario.map_model,
            ctx.cfg.metrics,
        )
    ctx.display.display_transfer(result.rates)
    label = stamp(ctx.cfg.config_hash(), ctx.cfg.campaign.seed)
    write_json(ctx.out_dir / "transfer.json", ctx.document(models=sorted(models), **result.to_dict()))
    plot_transfer_heatmap(result.rates, ctx.out_dir / "plots" / "transfer", label)
    return EXIT_OK


def cmd_report(ctx: CommandContext) -> int:
    path = ctx.out_dir / REPORT_FILE
    if not path.exists():
        raise ConfigError(f"отчёт не найден: {path}")
    report = json.loads(path.read_text(encoding="utf-8"))
    ctx.display.display_report(report)
    if report.get("simulation"):
        ctx.display.display_simulation(report["simulation"])
    ctx.display.display_info(f"config_hash={report.get('config_hash')} seed={report.get('seed')}")
    return EXIT_FAILURES if report.get("partial") else EXIT_OK


COMMANDS: Dict[str, Callable[[CommandContext], int]] = {
    "synth": cmd_synth,
    "reconstruct": cmd_reconstruct,
    "attack": cmd_attack,
    "eval": cmd_eval,
    "simulate": cmd_simulate,
    "augment": cmd_augment,
    "train": cmd_train,
    "advtrain": cmd_advtrain,
    "transfer": cmd_transfer,
    "report": cmd_report,
}


def run_command(name: str, ctx: CommandContext) -> int:
    handler: Optional[Callable[[CommandContext], int]] = COMMANDS.get(name)
    if handler is None:
        raise ConfigError(f"неизвестная команда: {name}")
    ctx.display.print_header(name)
    return handler(ctx)
