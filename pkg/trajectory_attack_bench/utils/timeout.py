"""Чтение ответов внешнего процесса с таймаутом"""

import logging
import queue
import threading
from typing import IO, Optional

logger = logging.getLogger(__name__)

_EOF = object()


class LineReader:
    """
    Чтение строк из потока с таймаутом

    Фоновый поток складывает строки в очередь; readline ждёт не дольше timeout.
    """

    def __init__(self, stream: IO[str], name: str = "reader"):
        self._queue: "queue.Queue[object]" = queue.Queue()
        self._thread = threading.Thread(target=self._pump, args=(stream,), name=name, daemon=True)
        self._thread.start()

    def _pump(self, stream: IO[str]) -> None:
        try:
            for line in iter(stream.readline, ""):
                self._queue.put(line)
        except (OSError, ValueError) as e:
            logger.debug(f"Поток чтения закрыт: {e}")
        finally:
            self._queue.put(_EOF)

    def readline(self, timeout: float) -> Optional[str]:
        """
        Следующая строка либо None при закрытии потока

        Raises:
            TimeoutError: Если строка не пришла за timeout секунд
        """
        try:
            item = self._queue.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError(f"нет ответа за {timeout}с")
        if item is _EOF:
            self._queue.put(_EOF)
            return None
        return item  # type: ignore[return-value]
