"""External simulators driven over a newline-delimited JSON pipe.

Each request is one line ``{"theta": [...], "seed": <uint64>}`` written to the
child's stdin; the child answers with one line ``{"t": [...]}``.
"""

from __future__ import annotations

import json
import logging
import queue
import shlex
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .core import Bounds, ModelError

log = logging.getLogger(__name__)


class ProtocolError(ModelError):
    """The child answered, but not with a valid response."""


class _Timeout(Exception):
    pass


class _Child:
    """One child process plus a reader thread feeding its stdout into a queue."""

    def __init__(self, argv):
        self.argv = argv
        self.proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True,
            encoding="utf-8", bufsize=1,
        )
        self.lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, args=(self.proc.stdout, self.lines), daemon=True)
        self._reader.start()

    @staticmethod
    def _pump(stream, sink):
        for line in stream:
            sink.put(line)
        sink.put(None)  # EOF

    def request(self, payload: str, timeout: float) -> str:
        try:
            self.proc.stdin.write(payload)
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise _Timeout(f"child is not accepting input: {exc}") from exc
        try:
            line = self.lines.get(timeout=timeout)
        except queue.Empty:
            raise _Timeout(f"no response within {timeout:g} s") from None
        if line is None:
            raise _Timeout(f"child exited with code {self.proc.poll()}")
        return line

    def close(self):
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=1.0)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


class SubprocessSimulator:
    """Simulator backed by a pool of child processes.

    Parameters
    ----------
    command : str or sequence of str
        Executable (plus arguments) to launch. A string is split with shell rules.
    bounds : Bounds
        Parameter box; its dimension is the declared ``p``.
    dim_stat : int
        Declared length ``q`` of every response.
    timeout : float
        Seconds to wait for one response before restarting the child and
        retrying the request once.
    workers : int
        Number of children. Requests of a batch are dealt round-robin, one
        in flight per child.
    """

    def __init__(self, command, bounds: Bounds, dim_stat: int, timeout: float = 60.0, workers: int = 1):
        self.argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.argv:
            raise ValueError("empty simulator command")
        self.bounds = bounds
        self._q = int(dim_stat)
        self.timeout = float(timeout)
        self.workers = max(1, int(workers))
        self._children: list[_Child | None] = [None] * self.workers
        self._pool = ThreadPoolExecutor(max_workers=self.workers) if self.workers > 1 else None

    @property
    def dim_theta(self):
        return self.bounds.dim

    @property
    def dim_stat(self):
        return self._q

    def _child(self, i) -> _Child:
        if self._children[i] is None:
            self._children[i] = _Child(self.argv)
        return self._children[i]

    def _restart(self, i):
        child = self._children[i]
        if child is not None:
            child.proc.kill()
            child.close()
        self._children[i] = None

    def call(self, theta, seed, worker=0) -> np.ndarray:
        """One request on child ``worker``; restart and retry once on timeout."""
        theta = [float(v) for v in np.asarray(theta, dtype=float).reshape(-1)]
        payload = json.dumps({"theta": theta, "seed": int(seed)}) + "\n"
        for attempt in (0, 1):
            try:
                line = self._child(worker).request(payload, self.timeout)
                break
            except _Timeout as exc:
                log.warning("external simulator: %s (attempt %d); restarting child", exc, attempt + 1)
                self._restart(worker)
        else:
            raise ModelError("external simulator timed out twice", theta=np.array(theta))
        return self._parse(line, theta)

    def _parse(self, line, theta):
        try:
            msg = json.loads(line)
            t = msg["t"]
            out = np.asarray(t, dtype=float)
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed response {line.strip()[:200]!r}: {exc}", theta=np.array(theta)) from None
        if out.ndim != 1 or out.size != self._q:
            raise ProtocolError(f"response has length {out.size}, expected {self._q}", theta=np.array(theta))
        return out

    def simulate(self, theta, rng: np.random.Generator):
        return self.call(theta, int(rng.integers(0, 2**64, dtype=np.uint64)))

    def simulate_batch(self, thetas, seeds):
        thetas = np.atleast_2d(thetas)
        if self._pool is None:
            return np.array([self.call(th, s) for th, s in zip(thetas, seeds)])

        def run(w):
            return [(i, self.call(thetas[i], seeds[i], w)) for i in range(w, len(thetas), self.workers)]

        out = np.empty((len(thetas), self._q))
        for part in self._pool.map(run, range(self.workers)):
            for i, t in part:
                out[i] = t
        return out

    def close(self):
        for i, child in enumerate(self._children):
            if child is not None:
                child.close()
            self._children[i] = None
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:  # noqa: BLE001 - interpreter shutdown
            pass
