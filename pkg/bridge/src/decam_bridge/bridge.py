"""Request loop: speak the scorer wire protocol over stdin/stdout.

Message grammar (engine -> bridge, then bridge -> engine):
  HELLO DECAM 1\\n                 -> OK <H> <W> <C> <num_classes>\\n
  SCORE <n> <class>\\n + payload   -> LOGITS <n>\\n + n float32
  LOGITS_ALL <n>\\n + payload      -> LOGITS <n*num_classes>\\n + floats
Payloads are n*H*W*C little-endian float32, row-major, channel-last.
Failures produce a single ``ERR <message>`` line, never a partial payload.
"""

from __future__ import annotations

import sys

import numpy as np
import torch

from .models import BridgeConfig, WrappedModel, build


def _read_exact(stream, count: int) -> bytes:
    data = b""
    while len(data) < count:
        chunk = stream.read(count - len(data))
        if not chunk:
            raise EOFError("stdin closed mid-payload")
        data += chunk
    return data


def _read_line(stream) -> bytes | None:
    line = b""
    while not line.endswith(b"\n"):
        ch = stream.read(1)
        if not ch:
            return line or None
        line += ch
    return line


def _all_logits(model: WrappedModel, payload: bytes, n: int, chunk: int) -> np.ndarray:
    arr = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    arr = arr.reshape(n, model.height, model.width, model.channels)
    outs = []
    for start in range(0, n, chunk):
        batch = torch.from_numpy(arr[start : start + chunk].copy())
        outs.append(model.logits(batch).numpy())
    return np.concatenate(outs, axis=0)


def serve(cfg: BridgeConfig, stdin=None, stdout=None) -> int:
    """Answer requests until stdin closes. Returns a process exit status."""
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer

    def fail(message: str) -> int:
        stdout.write(f"ERR {message}\n".encode())
        stdout.flush()
        return 1

    try:
        model = build(cfg)
    except Exception as err:  # noqa: BLE001 - everything becomes one ERR line
        return fail(f"cannot load model: {err}")

    hello = _read_line(stdin)
    if hello is None or hello.strip() != b"HELLO DECAM 1":
        return fail("bad handshake")
    stdout.write(
        f"OK {model.height} {model.width} {model.channels} {model.num_classes}\n".encode()
    )
    stdout.flush()
    per_image = model.height * model.width * model.channels

    while True:
        line = _read_line(stdin)
        if line is None:
            return 0
        parts = line.split()
        try:
            if parts and parts[0] == b"SCORE" and len(parts) == 3:
                n, class_index = int(parts[1]), int(parts[2])
                payload = _read_exact(stdin, 4 * n * per_image)
                if not 0 <= class_index < model.num_classes:
                    return fail(f"class index {class_index} out of range")
                logits = _all_logits(model, payload, n, cfg.max_forward_batch)
                response = f"LOGITS {n}\n".encode()
                response += logits[:, class_index].astype("<f4").tobytes()
            elif parts and parts[0] == b"LOGITS_ALL" and len(parts) == 2:
                n = int(parts[1])
                payload = _read_exact(stdin, 4 * n * per_image)
                logits = _all_logits(model, payload, n, cfg.max_forward_batch)
                response = f"LOGITS {n * model.num_classes}\n".encode()
                response += logits.astype("<f4").tobytes()
            else:
                return fail(f"unknown request {line.strip().decode('ascii', 'replace')}")
        except EOFError:
            return 0
        except Exception as err:  # noqa: BLE001
            return fail(str(err))
        stdout.write(response)
        stdout.flush()
