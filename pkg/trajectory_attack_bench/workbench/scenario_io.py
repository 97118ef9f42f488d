"""
Файлы сценариев и карт: JSON с полем "format", проверка инвариантов сцен при загрузке

Сценарий:
    {"format": "trajbench-scenario/1", "dt": 0.5, "history_len": 4, "future_len": 12,
     "map": "map.json",
     "scenes": [{"id": …, "adv": …, "ego": …,
                 "agents": [{"id": …, "history": [[x, y], …], "future": […], "footprint": [L, W]}]}]}
Карта:
    {"format": "trajbench-map/1", "id": …, "drivable": [[[x, y], …], …],
     "lanes": [{"id": …, "centerline": [[x, y], …], "width": …}]}
"""

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from shapely.geometry import Polygon

from ..core.errors import InvalidInputError, ScenarioParseError
from ..planning.map_model import Lane, MapModel
from ..predictors.base import Scene
from ..utils.constants import (
    DEFAULT_DT,
    DEFAULT_FOOTPRINT,
    DEFAULT_FUTURE_LEN,
    DEFAULT_HISTORY_LEN,
    MAP_FORMAT,
    SCENARIO_FORMAT,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
Point = Tuple[float, float]


class _Record(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False)


class AgentRecord(_Record):
    id: str
    history: List[Point]
    future: List[Point]
    footprint: Optional[Tuple[float, float]] = None


class SceneRecord(_Record):
    id: str
    adv: str
    ego: Optional[str] = None
    agents: List[AgentRecord] = Field(min_length=1)


class ScenarioRecord(_Record):
    format: str
    dt: float = Field(gt=0)
    history_len: int
    future_len: int = Field(ge=1)
    map: Optional[str] = None
    scenes: List[SceneRecord] = Field(min_length=1)


class LaneRecord(_Record):
    id: str
    centerline: List[Point] = Field(min_length=2)
    width: float = Field(gt=0)


class MapRecord(_Record):
    format: str
    id: str = "map"
    drivable: List[List[Point]] = Field(default_factory=list)
    lanes: List[LaneRecord] = Field(default_factory=list)


@dataclass(eq=False)
class ScenarioFile:
    """Набор сцен с общим Δt, длинами H и T и ссылкой на карту"""

    scenes: List[Scene]
    dt: float = DEFAULT_DT
    history_len: int = DEFAULT_HISTORY_LEN
    future_len: int = DEFAULT_FUTURE_LEN
    map_ref: Optional[str] = None
    map_model: Optional[MapModel] = None
    format: str = SCENARIO_FORMAT
    path: Optional[Path] = field(default=None, repr=False)

    @property
    def scene_ids(self) -> List[str]:
        return [s.scene_id for s in self.scenes]

    def scene(self, scene_id: str) -> Scene:
        for scene in self.scenes:
            if scene.scene_id == scene_id:
                return scene
        raise InvalidInputError(f"нет сцены {scene_id}")


def _line_of(text: str, needles: Sequence[str]) -> Optional[int]:
    """Номер строки последней из последовательно найденных подстрок"""
    position, found = 0, None
    for needle in needles:
        index = text.find(needle, position)
        if index < 0:
            continue
        found, position = index, index + len(needle)
    return None if found is None else text.count("\n", 0, found) + 1


def _needles(raw: Any, loc: Sequence[Any]) -> List[str]:
    """Подстроки для поиска строки поля: id вложенных записей и имена ключей"""
    needles, node = [], raw
    for part in loc:
        if isinstance(part, int):
            if isinstance(node, list) and 0 <= part < len(node):
                node = node[part]
                if isinstance(node, dict) and isinstance(node.get("id"), str):
                    needles.append(json.dumps(node["id"], ensure_ascii=False))
            else:
                node = None
        else:
            needles.append(f'"{part}"')
            node = node.get(part) if isinstance(node, dict) else None
    return needles


def _field_path(loc: Sequence[Any]) -> str:
    out = ""
    for part in loc:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out


def _parse_error(path: Path, text: str, raw: Any, loc: Sequence[Any], message: str) -> ScenarioParseError:
    return ScenarioParseError(message, str(path), _line_of(text, _needles(raw, loc)), _field_path(loc) or None)


def _read_json(path: PathLike) -> Tuple[Path, str, Any]:
    path = Path(path)
    if not path.exists():
        raise ScenarioParseError("файл не найден", str(path))
    text = path.read_text(encoding="utf-8")
    try:
        return path, text, json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioParseError(f"некорректный JSON: {e.msg}", str(path), e.lineno) from e


def _validate(model: type, path: Path, text: str, raw: Any):
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        loc = first.get("loc", ())
        message = first.get("msg", "ошибка валидации")
        if first.get("type") == "extra_forbidden":
            message = "лишнее поле"
        elif first.get("type") == "missing":
            message = "обязательное поле отсутствует"
        raise _parse_error(path, text, raw, loc, message) from e


def _check_format(record, expected: str, path: Path, text: str, raw: Any) -> None:
    if record.format != expected:
        raise _parse_error(path, text, raw, ("format",), f"неизвестный формат {record.format!r}, ожидался {expected!r}")


def _build_scene(record: SceneRecord, index: int, scenario: ScenarioRecord, path: Path, text: str, raw: Any) -> Scene:
    def fail(loc: Tuple[Any, ...], message: str) -> ScenarioParseError:
        return _parse_error(path, text, raw, ("scenes", index, *loc), message)

    ids = [a.id for a in record.agents]
    for i, agent in enumerate(record.agents):
        if ids.index(agent.id) != i:
            raise fail(("agents", i, "id"), f"повторный id агента {agent.id!r}")
        if len(agent.history) != scenario.history_len:
            raise fail(
                ("agents", i, "history"),
                f"длина истории {len(agent.history)} не равна history_len = {scenario.history_len}",
            )
        if len(agent.future) != scenario.future_len:
            raise fail(
                ("agents", i, "future"),
                f"длина будущего {len(agent.future)} не равна future_len = {scenario.future_len}",
            )
        if agent.footprint is not None and not all(v > 0 for v in agent.footprint):
            raise fail(("agents", i, "footprint"), "размеры должны быть положительными")
    if record.adv not in ids:
        raise fail(("adv",), f"атакующий агент {record.adv!r} отсутствует в сцене")
    if record.ego is not None:
        if record.ego not in ids:
            raise fail(("ego",), f"эго-агент {record.ego!r} отсутствует в сцене")
        if record.ego == record.adv:
            raise fail(("ego",), "эго-агент совпадает с атакующим")

    footprints = None
    if any(a.footprint is not None for a in record.agents):
        footprints = np.array([a.footprint or DEFAULT_FOOTPRINT for a in record.agents], dtype=float)
    try:
        return Scene(
            dt=scenario.dt,
            histories=np.array([a.history for a in record.agents], dtype=float),
            futures=np.array([a.future for a in record.agents], dtype=float),
            adv_index=ids.index(record.adv),
            ego_index=None if record.ego is None else ids.index(record.ego),
            agent_ids=ids,
            map_ref=scenario.map,
            footprints=footprints,
            scene_id=record.id,
        )
    except InvalidInputError as e:
        raise fail((), str(e)) from e


_PAIR = re.compile(r"\[\s+(-?[0-9.eE+-]+),\s+(-?[0-9.eE+-]+)\s+\]")


def _dumps(data: Dict[str, Any]) -> str:
    """JSON с отступами, пары координат в одну строку"""
    return _PAIR.sub(r"[\1, \2]", json.dumps(data, indent=2, ensure_ascii=False)) + "\n"


def load_map(path: PathLike) -> MapModel:
    """
    Загрузка карты

    Raises:
        ScenarioParseError: Файл отсутствует, не JSON, поля неверны или многоугольник невалиден
    """
    path, text, raw = _read_json(path)
    record: MapRecord = _validate(MapRecord, path, text, raw)
    _check_format(record, MAP_FORMAT, path, text, raw)
    polygons = []
    for i, ring in enumerate(record.drivable):
        if len(ring) < 3:
            raise _parse_error(path, text, raw, ("drivable", i), "многоугольник должен иметь не менее 3 вершин")
        polygons.append(Polygon(ring))
    try:
        lanes = [Lane(lane.id, np.array(lane.centerline, dtype=float), lane.width) for lane in record.lanes]
        map_model = MapModel(polygons, lanes, record.id)
    except InvalidInputError as e:
        raise ScenarioParseError(str(e), str(path), field="drivable") from e
    logger.info(f"📂 Карта {record.id} загружена: {len(polygons)} многоугольников, {len(lanes)} полос")
    return map_model


def save_map(map_model: MapModel, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_dumps(map_model.to_dict()), encoding="utf-8")
    return path


def load_scenario(path: PathLike, with_map: bool = True) -> ScenarioFile:
    """
    Загрузка и проверка файла сценария

    Args:
        path: Путь к JSON-файлу
        with_map: Загрузить карту, на которую ссылается файл

    Raises:
        ScenarioParseError: Лишние или отсутствующие поля, NaN, нарушение инвариантов сцены
            или несуществующая карта; в ошибке указаны файл, строка и поле
    """
    path, text, raw = _read_json(path)
    record: ScenarioRecord = _validate(ScenarioRecord, path, text, raw)
    _check_format(record, SCENARIO_FORMAT, path, text, raw)
    if record.history_len < 2:
        raise _parse_error(
            path, text, raw, ("history_len",), f"history_len = {record.history_len}: требуется H ≥ 2"
        )

    seen = set()
    for i, scene in enumerate(record.scenes):
        if scene.id in seen:
            raise _parse_error(path, text, raw, ("scenes", i, "id"), f"повторный id сцены {scene.id!r}")
        seen.add(scene.id)
    scenes = [_build_scene(scene, i, record, path, text, raw) for i, scene in enumerate(record.scenes)]

    map_model = None
    if record.map is not None:
        map_path = path.parent / record.map
        if not map_path.exists():
            raise _parse_error(path, text, raw, ("map",), f"файл карты {record.map} не найден")
        if with_map:
            map_model = load_map(map_path)

    logger.info(
        f"📂 Сценарий {path.name}: {len(scenes)} сцен, H={record.history_len}, T={record.future_len}, Δt={record.dt}"
    )
    return ScenarioFile(
        scenes=scenes,
        dt=record.dt,
        history_len=record.history_len,
        future_len=record.future_len,
        map_ref=record.map,
        map_model=map_model,
        path=path,
    )


def _scene_record(scene: Scene) -> Dict[str, Any]:
    record: Dict[str, Any] = {"id": scene.scene_id, "adv": scene.agent_ids[scene.adv_index]}
    if scene.ego_index is not None:
        record["ego"] = scene.agent_ids[scene.ego_index]
    record["agents"] = [
        {
            "id": agent_id,
            "history": scene.histories[i].tolist(),
            "future": scene.futures[i].tolist(),
            "footprint": scene.footprints[i].tolist(),
        }
        for i, agent_id in enumerate(scene.agent_ids)
    ]
    return record


def save_scenario(scenario: ScenarioFile, path: PathLike) -> Path:
    """
    Запись сценария; карта (если загружена) пишется рядом под именем map_ref или map.json

    Raises:
        InvalidInputError: Сцены с разными Δt, H или T
    """
    path = Path(path)
    for scene in scenario.scenes:
        if (scene.dt, scene.history_len, scene.future_len) != (scenario.dt, scenario.history_len, scenario.future_len):
            raise InvalidInputError(f"{scene.scene_id}: Δt, H и T сцены не совпадают с файлом")
    map_ref = scenario.map_ref
    if scenario.map_model is not None:
        map_ref = map_ref or "map.json"
        save_map(scenario.map_model, path.parent / map_ref)
    data: Dict[str, Any] = {
        "format": SCENARIO_FORMAT,
        "dt": scenario.dt,
        "history_len": scenario.history_len,
        "future_len": scenario.future_len,
    }
    if map_ref is not None:
        data["map"] = map_ref
    data["scenes"] = [_scene_record(s) for s in scenario.scenes]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_dumps(data), encoding="utf-8")
    logger.info(f"💾 Сценарий сохранён: {path} ({len(scenario.scenes)} сцен)")
    return path
