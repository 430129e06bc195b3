"""Adapter that serves probabilities from a child process over stdio.

Wire protocol (one JSON object per line):
  handshake   -> {"hello": true}            <- {"classes": C}
  query       -> {"id": N, "instances": [[...], ...]}
              <- {"id": N, "probabilities": [[...], ...]}

Floats are written in decimal with 17 significant digits, which round-trips
float64 exactly, so wrapping an in-process model behind this protocol changes
nothing beyond (zero) serialization round-off.
"""

from __future__ import annotations

import json
import select
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass

import numpy as np

from ..errors import ModelUnavailable
from .base import ProbabilityModel, check_simplex


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def encode_matrix(rows) -> str:
    return "[" + ",".join("[" + ",".join(format_float(v) for v in row) + "]" for row in rows) + "]"


def request_line(request_id: int, instances) -> str:
    return '{"id": %d, "instances": %s}' % (request_id, encode_matrix(instances))


def response_line(request_id: int, probabilities) -> str:
    return '{"id": %d, "probabilities": %s}' % (request_id, encode_matrix(probabilities))


HELLO_LINE = '{"hello": true}'


@dataclass
class ExternalModelSpec:
    """How to reach a model host: launch command, class count, timeout."""

    command: str
    n_classes: int
    timeout_ms: int = 10000


class ExternalModel(ProbabilityModel):
    """Child-process model handle; requests are serialized under a lock."""

    def __init__(self, spec: ExternalModelSpec):
        self.spec = spec
        self.n_classes = spec.n_classes
        self._lock = threading.Lock()
        self._request_id = 0
        self._buffer = b""
        try:
            self._proc = subprocess.Popen(
                shlex.split(spec.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
            )
        except OSError as exc:
            raise ModelUnavailable(f"could not launch model host: {exc}") from exc
        hello = self._roundtrip(HELLO_LINE)
        classes = hello.get("classes")
        if classes != spec.n_classes:
            self.close()
            raise ModelUnavailable(
                f"host declared {classes} classes, spec declared {spec.n_classes}"
            )

    def _captured_stderr(self) -> str:
        try:
            if self._proc.stderr is None:
                return ""
            ready, _, _ = select.select([self._proc.stderr], [], [], 0)
            if not ready:
                return ""
            return self._proc.stderr.read1(65536).decode("utf-8", "replace")
        except Exception:
            return ""

    def _fail(self, message: str) -> ModelUnavailable:
        diag = self._captured_stderr()
        self.close()
        suffix = f" (host stderr: {diag.strip()})" if diag.strip() else ""
        return ModelUnavailable(message + suffix, diagnostic=diag or None)

    def _read_line(self, deadline: float) -> bytes:
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise self._fail(f"host response timed out after {self.spec.timeout_ms} ms")
            ready, _, _ = select.select([self._proc.stdout], [], [], remaining)
            if not ready:
                continue
            chunk = self._proc.stdout.read1(65536)
            if not chunk:
                raise self._fail(
                    f"host exited (code {self._proc.poll()}) before responding"
                )
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    def _roundtrip(self, line: str) -> dict:
        if self._proc.poll() is not None:
            raise self._fail(f"host process already exited (code {self._proc.poll()})")
        deadline = time.monotonic() + self.spec.timeout_ms / 1000.0
        try:
            self._proc.stdin.write(line.encode("utf-8") + b"\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise self._fail("host closed its stdin pipe")
        raw = self._read_line(deadline)
        try:
            msg = json.loads(raw.decode("utf-8"))
        except (ValueError, UnicodeDecodeError):
            raise self._fail(f"host sent a malformed line: {raw[:200]!r}")
        if not isinstance(msg, dict):
            raise self._fail(f"host sent a non-object message: {raw[:200]!r}")
        return msg

    def predict_proba(self, batch: np.ndarray) -> np.ndarray:
        X = np.asarray(batch, dtype=float)
        with self._lock:
            self._request_id += 1
            rid = self._request_id
            msg = self._roundtrip(request_line(rid, X))
            if msg.get("id") != rid:
                raise self._fail(f"host answered id {msg.get('id')} to request {rid}")
            rows = msg.get("probabilities")
            if not isinstance(rows, list) or len(rows) != X.shape[0]:
                raise self._fail(
                    f"host returned {len(rows) if isinstance(rows, list) else 'no'} rows "
                    f"for a {X.shape[0]}-instance request"
                )
            try:
                probs = np.asarray(rows, dtype=float)
            except ValueError:
                raise self._fail("host returned ragged or non-numeric probability rows")
            if probs.ndim != 2 and X.shape[0] > 0:
                raise self._fail("host returned ragged probability rows")
        try:
            check_simplex(probs.reshape(X.shape[0], -1), self.n_classes)
        except Exception as exc:
            raise self._fail(f"host violated the probability contract: {exc}")
        return probs

    def close(self) -> None:
        proc = getattr(self, "_proc", None)
        if proc is None or proc.poll() is not None:
            return
        try:
            proc.stdin.close()
        except Exception:
            pass
        try:
            proc.wait(timeout=0.5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        self.close()


def open_external(spec: ExternalModelSpec) -> ExternalModel:
    """Launch the host process and perform the handshake."""
    return ExternalModel(spec)
