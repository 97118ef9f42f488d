"""
Мост к внешней модели предсказания: дочерний процесс, построчный JSON на stdin/stdout

Запросы:
    {"cmd": "predict", "dt": …, "T": …, "X": N×H×2}  →  {"modes": K×N×T×2, "probs": N×K}
    {"cmd": "grad", "dt": …, "T": …, "X": …, "dY": K×N×T×2}  →  {"dX": N×H×2}
    {"cmd": "shutdown"}
Ответ {"error": "unsupported"} на grad означает отсутствие градиента у модели.
"""

import json
import logging
import shlex
import subprocess
import threading
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from ..core.errors import BridgeError, BridgeTimeoutError, CapabilityError, InvalidInputError
from ..utils.constants import DEFAULT_BRIDGE_TIMEOUT
from ..utils.decorators import retry_on_failure
from ..utils.timeout import LineReader
from .base import Prediction, PredictionModel, Scene, finite_difference_pullback

logger = logging.getLogger(__name__)

UNSUPPORTED = "unsupported"


class BridgePredictor(PredictionModel):
    """
    Внешняя модель за процессом-мостом

    Запросы сериализуются блокировкой, поэтому экземпляр можно разделять между потоками.
    """

    name = "bridge"

    def __init__(
        self,
        command: Union[str, Sequence[str]],
        timeout: float = DEFAULT_BRIDGE_TIMEOUT,
        allow_finite_difference: bool = True,
        num_modes: int = 1,
    ):
        self.command: List[str] = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.command:
            raise InvalidInputError("пустая команда моста")
        self.timeout = timeout
        self.allow_finite_difference = allow_finite_difference
        self.has_exact_gradient = True
        self.num_modes = num_modes
        self._proc: Optional[subprocess.Popen] = None
        self._reader: Optional[LineReader] = None
        self._lock = threading.Lock()

    def __enter__(self) -> "BridgePredictor":
        self.start()
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()

    def start(self) -> None:
        """Запуск дочернего процесса (если ещё не запущен)"""
        if self._proc is not None and self._proc.poll() is None:
            return
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise BridgeError(f"не удалось запустить мост {self.command}: {e}") from e
        self._reader = LineReader(self._proc.stdout, name="bridge-reader")
        logger.info(f"🔌 Мост запущен: {' '.join(self.command)} (pid {self._proc.pid})")

    def _terminate(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()
        self._proc = None
        self._reader = None

    def _request(self, payload: Dict[str, Any]) -> Dict[str, Any]:
        with self._lock:
            self.start()
            assert self._proc is not None and self._reader is not None
            try:
                self._proc.stdin.write(json.dumps(payload) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as e:
                self._terminate()
                raise BridgeError(f"мост недоступен: {e}") from e
            try:
                line = self._reader.readline(self.timeout)
            except TimeoutError as e:
                logger.error(f"❌ Мост не ответил за {self.timeout}с на {payload.get('cmd')}")
                self._terminate()
                raise BridgeTimeoutError(f"нет ответа моста за {self.timeout}с") from e
        if line is None:
            self._terminate()
            raise BridgeError("процесс моста завершился без ответа")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as e:
            raise BridgeError(f"некорректный ответ моста: {line.strip()[:200]}") from e
        if not isinstance(reply, dict):
            raise BridgeError("ответ моста должен быть объектом")
        if "error" in reply:
            if reply["error"] == UNSUPPORTED:
                raise CapabilityError(f"мост не поддерживает {payload.get('cmd')}")
            raise BridgeError(f"ошибка моста: {reply['error']}")
        return reply

    @retry_on_failure(max_retries=2, delay=0.0, retry_on=(BridgeError,), no_retry=(BridgeTimeoutError,))
    def forward(self, histories: np.ndarray, scene: Scene) -> Prediction:
        reply = self._request(
            {"cmd": "predict", "dt": scene.dt, "T": scene.future_len, "X": histories.tolist()}
        )
        try:
            modes = np.asarray(reply["modes"], dtype=float)
            probs = np.asarray(reply["probs"], dtype=float)
        except (KeyError, TypeError, ValueError) as e:
            raise BridgeError(f"ответ predict без корректных modes/probs: {e}") from e
        if modes.ndim != 4:
            raise BridgeError(f"modes должны иметь форму K×N×T×2, получено {modes.shape}")
        if probs.ndim == 1:
            probs = np.tile(probs, (modes.shape[1], 1))
        self.num_modes = int(modes.shape[0])
        return Prediction(modes, probs)

    def backward(self, histories: np.ndarray, scene: Scene, cotangent: np.ndarray) -> np.ndarray:
        try:
            reply = self._request(
                {
                    "cmd": "grad",
                    "dt": scene.dt,
                    "T": scene.future_len,
                    "X": histories.tolist(),
                    "dY": np.asarray(cotangent).tolist(),
                }
            )
        except CapabilityError:
            if not self.allow_finite_difference:
                raise
            logger.warning("⚠️ Мост без градиента: переход на конечные разности")
            self.has_exact_gradient = False
            return finite_difference_pullback(self, scene, cotangent, histories)
        try:
            grad = np.asarray(reply["dX"], dtype=float)
        except (KeyError, TypeError, ValueError) as e:
            raise BridgeError(f"ответ grad без корректного dX: {e}") from e
        if grad.shape != histories.shape:
            raise BridgeError(f"dX формы {grad.shape}, ожидалось {histories.shape}")
        return grad

    def close(self) -> None:
        """Команда shutdown и ожидание завершения процесса"""
        with self._lock:
            if self._proc is None:
                return
            if self._proc.poll() is None:
                try:
                    self._proc.stdin.write(json.dumps({"cmd": "shutdown"}) + "\n")
                    self._proc.stdin.flush()
                    self._proc.stdin.close()
                    self._proc.wait(timeout=self.timeout)
                except (BrokenPipeError, OSError, subprocess.TimeoutExpired):
                    logger.warning("⚠️ Мост не завершился штатно, процесс остановлен")
            self._terminate()
            logger.info("🔌 Мост остановлен")
