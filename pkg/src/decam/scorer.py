"""The black-box model contract: batches of masked images in, logits out.

This is the only channel between the search and the model. Three scorer
families live here: synthetic oracles with an analytically known salient
region (for exact desk-scale verification), and a bridge client that talks
a small stdio protocol to an external model process.

Bridge wire protocol (binary, over the child's stdin/stdout):
  - handshake: engine sends ``HELLO DECAM 1\\n``; bridge replies
    ``OK <H> <W> <C> <num_classes>\\n``.
  - ``SCORE <n> <class_index>\\n`` + n*H*W*C little-endian float32
    (row-major, channel-last) -> ``LOGITS <n>\\n`` + n float32.
  - ``LOGITS_ALL <n>\\n`` + same payload -> ``LOGITS <n*num_classes>\\n``
    + that many float32.
  - any bridge line starting ``ERR `` aborts the run with its message.
"""

from __future__ import annotations

import os
import select
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateOracleError,
    NonFiniteLogitError,
    ScorerUnavailableError,
    ShapeMismatchError,
)

MIN_IMAGE_SIDE = 20
HANDSHAKE = b"HELLO DECAM 1\n"


@dataclass(frozen=True)
class ScoreRequest:
    """A batch of same-shape images in [0, 1] plus the target class."""

    batch: np.ndarray  # (n, H, W, C) float
    class_index: int

    def __post_init__(self):
        batch = np.asarray(self.batch, dtype=np.float64)
        object.__setattr__(self, "batch", batch)
        if batch.ndim != 4 or batch.shape[0] < 1:
            raise ShapeMismatchError(f"batch must be (n, H, W, C), got {batch.shape}")
        n, h, w, c = batch.shape
        if h < MIN_IMAGE_SIDE or w < MIN_IMAGE_SIDE:
            raise ShapeMismatchError(f"image sides must be >= {MIN_IMAGE_SIDE}, got {h}x{w}")
        if c not in (1, 3):
            raise ShapeMismatchError(f"channel count must be 1 or 3, got {c}")
        if not np.isfinite(batch).all():
            raise ShapeMismatchError("batch contains non-finite values")
        if batch.min() < 0.0 or batch.max() > 1.0:
            raise ShapeMismatchError("batch values must lie in [0, 1]")
        if self.class_index < 0:
            raise ValueError("class_index must be nonnegative")


@dataclass(frozen=True)
class ScoreResponse:
    """One pre-softmax logit per batch element."""

    logits: np.ndarray  # (n,) float64


class Scorer:
    """Base contract. Subclasses implement _score(batch, class_index).

    height/width/channels constrain accepted batches when set (None = any).
    num_classes is None for single-score models; when >= 2, score_all()
    returns the full logit vector per image. supports_concurrent_calls
    declares whether score_batch may be called from several workers at once.
    """

    height: int | None = None
    width: int | None = None
    channels: int | None = None
    num_classes: int | None = None
    supports_concurrent_calls = False

    def score_batch(self, req: ScoreRequest) -> ScoreResponse:
        self._check_shape(req.batch)
        logits = np.asarray(self._score(req.batch, req.class_index), dtype=np.float64)
        if logits.shape != (req.batch.shape[0],):
            raise ScorerUnavailableError(
                f"scorer returned {logits.shape} logits for a batch of {req.batch.shape[0]}"
            )
        if not np.isfinite(logits).all():
            raise NonFiniteLogitError("model returned NaN/Inf logits")
        return ScoreResponse(logits)

    def score_all(self, batch: np.ndarray) -> np.ndarray:
        """Full (n, num_classes) logit matrix; only for multi-class scorers."""
        raise NotImplementedError(f"{type(self).__name__} has no full-logit support")

    def describe(self) -> str:
        return type(self).__name__

    def close(self):
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _check_shape(self, batch):
        _, h, w, c = batch.shape
        for got, want, name in ((h, self.height, "height"), (w, self.width, "width"),
                                (c, self.channels, "channels")):
            if want is not None and got != want:
                raise ShapeMismatchError(f"scorer expects {name}={want}, got {got}")

    def _score(self, batch, class_index):
        raise NotImplementedError


def _brightness(batch: np.ndarray) -> np.ndarray:
    """Per-pixel brightness: channel sum. Shape (n, H, W) for (n, H, W, C)."""
    return batch.sum(axis=-1)


class DiscOracle(Scorer):
    """Synthetic model whose salient region is one planted disc.

    For a masked image X' = X * M the logit is s_in - s_out, with s_in the
    fraction of the reference image's brightness kept inside the disc and
    s_out the same fraction outside. The score term is maximal (exactly 1)
    when the mask preserves the disc and nothing else.
    """

    supports_concurrent_calls = True

    def __init__(self, image: np.ndarray, center: tuple[int, int], radius: float):
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 3:
            raise ShapeMismatchError("reference image must be (H, W, C)")
        h, w, c = image.shape
        row, col = center
        if not (radius <= row <= h - 1 - radius and radius <= col <= w - 1 - radius):
            raise ValueError("disc must lie inside the image bounds")
        self.height, self.width, self.channels = h, w, c
        self.center = (row, col)
        self.radius = radius
        ii, jj = np.indices((h, w))
        self.inside = (ii - row) ** 2 + (jj - col) ** 2 <= radius**2
        bright = _brightness(image[None])[0]
        self._in_total = float(bright[self.inside].sum())
        self._out_total = float(bright[~self.inside].sum())
        if self._in_total <= 0.0 or self._out_total <= 0.0:
            raise DegenerateOracleError(
                "reference image has zero brightness inside or outside the disc"
            )

    def describe(self) -> str:
        return f"disc:{self.center[0]},{self.center[1]},{self.radius:g}"

    def _score(self, batch, class_index):
        bright = _brightness(batch)
        s_in = bright[:, self.inside].sum(axis=1) / self._in_total
        s_out = bright[:, ~self.inside].sum(axis=1) / self._out_total
        return s_in - s_out


class TwoBlobOracle(Scorer):
    """Two disjoint planted discs; the salient region is their union.

    logit = mean of the two per-disc kept-brightness fractions minus the
    kept fraction outside both discs. Preserving both discs and nothing
    else scores exactly 1; one disc alone scores 0.5.
    """

    supports_concurrent_calls = True

    def __init__(self, image, center_a, radius_a, center_b, radius_b):
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 3:
            raise ShapeMismatchError("reference image must be (H, W, C)")
        h, w, c = image.shape
        self.height, self.width, self.channels = h, w, c
        self.centers = (center_a, center_b)
        self.radii = (radius_a, radius_b)
        discs = []
        ii, jj = np.indices((h, w))
        for (row, col), radius in zip(self.centers, self.radii):
            if not (radius <= row <= h - 1 - radius and radius <= col <= w - 1 - radius):
                raise ValueError("disc must lie inside the image bounds")
            discs.append((ii - row) ** 2 + (jj - col) ** 2 <= radius**2)
        if (discs[0] & discs[1]).any():
            raise ValueError("the two discs must be disjoint")
        self.discs = discs
        self.outside = ~(discs[0] | discs[1])
        bright = _brightness(image[None])[0]
        self._disc_totals = [float(bright[d].sum()) for d in discs]
        self._out_total = float(bright[self.outside].sum())
        if min(self._disc_totals) <= 0.0 or self._out_total <= 0.0:
            raise DegenerateOracleError(
                "reference image has zero brightness in a disc or outside both"
            )

    def describe(self) -> str:
        (ra, ca), (rb, cb) = self.centers
        return f"twoblob:{ra},{ca},{self.radii[0]:g},{rb},{cb},{self.radii[1]:g}"

    def _score(self, batch, class_index):
        bright = _brightness(batch)
        s_a = bright[:, self.discs[0]].sum(axis=1) / self._disc_totals[0]
        s_b = bright[:, self.discs[1]].sum(axis=1) / self._disc_totals[1]
        s_out = bright[:, self.outside].sum(axis=1) / self._out_total
        return 0.5 * (s_a + s_b) - s_out


def make_disc_oracle(image, center, radius) -> DiscOracle:
    return DiscOracle(image, center, radius)


def make_two_blob_oracle(image, center_a, radius_a, center_b, radius_b) -> TwoBlobOracle:
    return TwoBlobOracle(image, center_a, radius_a, center_b, radius_b)


class BridgeScorer(Scorer):
    """Client side of the stdio wire protocol.

    One request is in flight per bridge process; calls are serialized with
    a lock. Every read honors a per-call deadline (default 60 s), after
    which the bridge counts as unavailable and the process is killed.
    """

    supports_concurrent_calls = False

    def __init__(self, command: str | list[str], timeout: float = 60.0):
        self.command = command if isinstance(command, str) else shlex.join(command)
        self.timeout = timeout
        self._lock = threading.Lock()
        self._buf = bytearray()
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
        except OSError as err:
            raise ScorerUnavailableError(f"cannot start bridge {argv!r}: {err}") from err
        try:
            self._write(HANDSHAKE)
            line = self._read_line(self.timeout)
        except ScorerUnavailableError:
            self.close()
            raise
        parts = line.split()
        if len(parts) != 5 or parts[0] != b"OK":
            self.close()
            raise ScorerUnavailableError(f"bad handshake reply: {line!r}")
        self.height, self.width, self.channels, self.num_classes = map(int, parts[1:])

    def describe(self) -> str:
        return f"bridge:{self.command}"

    def _score(self, batch, class_index):
        n = batch.shape[0]
        payload = np.ascontiguousarray(batch, dtype="<f4").tobytes()
        raw = self._roundtrip(f"SCORE {n} {class_index}\n".encode("ascii"), payload, n)
        return np.frombuffer(raw, dtype="<f4").astype(np.float64)

    def score_all(self, batch):
        batch = np.asarray(batch, dtype=np.float64)
        self._check_shape(batch)
        n = batch.shape[0]
        payload = np.ascontiguousarray(batch, dtype="<f4").tobytes()
        raw = self._roundtrip(
            f"LOGITS_ALL {n}\n".encode("ascii"), payload, n * self.num_classes
        )
        out = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        if not np.isfinite(out).all():
            raise NonFiniteLogitError("bridge returned NaN/Inf logits")
        return out.reshape(n, self.num_classes)

    def _roundtrip(self, header: bytes, payload: bytes, expect: int) -> bytes:
        with self._lock:
            self._write(header + payload)
            line = self._read_line(self.timeout)
            if line.startswith(b"ERR "):
                msg = line[4:].decode("utf-8", "replace").strip()
                raise ScorerUnavailableError(f"bridge error: {msg}")
            parts = line.split()
            if len(parts) != 2 or parts[0] != b"LOGITS" or int(parts[1]) != expect:
                raise ScorerUnavailableError(f"bad bridge response line: {line!r}")
            return self._read_exact(4 * expect, self.timeout)

    # -- low-level pipe I/O ------------------------------------------------

    def _write(self, data: bytes):
        if self._proc.poll() is not None:
            raise ScorerUnavailableError("bridge process has exited")
        try:
            self._proc.stdin.write(data)
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError) as err:
            raise ScorerUnavailableError(f"bridge pipe closed: {err}") from err

    def _fill(self, deadline: float):
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            self._kill()
            raise ScorerUnavailableError(f"bridge timed out after {self.timeout:g} s")
        fd = self._proc.stdout.fileno()
        ready, _, _ = select.select([fd], [], [], remaining)
        if not ready:
            self._kill()
            raise ScorerUnavailableError(f"bridge timed out after {self.timeout:g} s")
        chunk = os.read(fd, 1 << 16)
        if not chunk:
            raise ScorerUnavailableError("bridge closed its output")
        self._buf.extend(chunk)

    def _read_line(self, timeout: float) -> bytes:
        deadline = time.monotonic() + timeout
        while True:
            idx = self._buf.find(b"\n")
            if idx >= 0:
                line = bytes(self._buf[: idx + 1])
                del self._buf[: idx + 1]
                return line.rstrip(b"\n")
            self._fill(deadline)

    def _read_exact(self, count: int, timeout: float) -> bytes:
        deadline = time.monotonic() + timeout
        while len(self._buf) < count:
            self._fill(deadline)
        data = bytes(self._buf[:count])
        del self._buf[:count]
        return data

    def _kill(self):
        try:
            self._proc.kill()
        except OSError:
            pass

    def close(self):
        proc = getattr(self, "_proc", None)
        if proc is None:
            return
        try:
            if proc.stdin:
                proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            self._kill()
            proc.wait()

    def __del__(self):
        self.close()


@dataclass
class CountingScorer(Scorer):
    """Wrapper that counts per-image evaluations; used to audit budgets."""

    inner: Scorer
    images_scored: int = 0
    calls: int = field(default=0)

    def __post_init__(self):
        self.height = self.inner.height
        self.width = self.inner.width
        self.channels = self.inner.channels
        self.num_classes = self.inner.num_classes
        self.supports_concurrent_calls = False  # counter update is not atomic

    def describe(self) -> str:
        return f"counting({self.inner.describe()})"

    def score_batch(self, req: ScoreRequest) -> ScoreResponse:
        resp = self.inner.score_batch(req)
        self.images_scored += req.batch.shape[0]
        self.calls += 1
        return resp

    def score_all(self, batch):
        out = self.inner.score_all(batch)
        self.images_scored += batch.shape[0]
        self.calls += 1
        return out

    def close(self):
        self.inner.close()
