"""
Эталонный сервер моста: встроенный суррогат за построчным JSON-протоколом

    python -m trajectory_attack_bench.predictors.bridge_server --kind constant-velocity
    python -m trajectory_attack_bench.predictors.bridge_server --model runs/model.npz
"""

import argparse
import json
import sys
from typing import IO, Any, Dict, Optional

import numpy as np

from .base import PredictionModel, Scene, model_pullback, predict
from .bridge import UNSUPPORTED
from .surrogates import SurrogateSpec, build_surrogate, load_model


def _scene(request: Dict[str, Any]) -> Scene:
    X = np.asarray(request["X"], dtype=float)
    horizon = int(request.get("T", 12))
    return Scene(dt=float(request.get("dt", 0.5)), histories=X, futures=np.zeros((X.shape[0], horizon, 2)))


def handle(model: PredictionModel, request: Dict[str, Any], with_grad: bool = True) -> Optional[Dict[str, Any]]:
    """Ответ на один запрос; None для shutdown"""
    cmd = request.get("cmd")
    if cmd == "shutdown":
        return None
    if cmd == "predict":
        prediction = predict(model, _scene(request))
        return {"modes": prediction.modes.tolist(), "probs": prediction.probs.tolist()}
    if cmd == "grad":
        if not with_grad:
            return {"error": UNSUPPORTED}
        grad = model_pullback(model, _scene(request), np.asarray(request["dY"], dtype=float))
        return {"dX": grad.tolist()}
    return {"error": f"неизвестная команда {cmd!r}"}


def serve(model: PredictionModel, stdin: IO[str], stdout: IO[str], with_grad: bool = True) -> None:
    for line in stdin:
        if not line.strip():
            continue
        try:
            reply = handle(model, json.loads(line), with_grad)
        except Exception as e:  # ошибка запроса не должна ронять сервер
            reply = {"error": str(e)}
        if reply is None:
            break
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Сервер моста предсказания")
    parser.add_argument("--kind", default="constant-velocity", help="тип встроенного суррогата")
    parser.add_argument("--model", help="путь к сохранённой модели .npz")
    parser.add_argument("--no-grad", action="store_true", help="отвечать unsupported на grad")
    args = parser.parse_args(argv)

    model = load_model(args.model) if args.model else build_surrogate(SurrogateSpec(kind=args.kind))
    serve(model, sys.stdin, sys.stdout, with_grad=not args.no_grad)
    return 0


if __name__ == "__main__":
    sys.exit(main())
