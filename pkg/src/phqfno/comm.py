"""Message-passing collectives for data-parallel training.

Workers form a star around rank 0: every collective sends to the root, which
reduces contributions in rank order (so results are deterministic) and sends
the result back. Two transports share this logic:

- ``thread``: workers are threads, channels are queues;
- ``process``: workers are forked processes, channels are pipes.

``PHQFNO_TRANSPORT`` selects the default transport.
"""
from __future__ import annotations

import multiprocessing as mp
import os
import queue
import threading
import traceback
from typing import Any, Callable

import numpy as np

TRANSPORT_ENV = "PHQFNO_TRANSPORT"
TIMEOUT = 600.0


class CommError(RuntimeError):
    def __init__(self, rank: int, detail: str):
        self.rank = rank
        super().__init__(f"worker {rank}: {detail}")


class _QueueChannel:
    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self.inbox, self.outbox = inbox, outbox

    def send(self, msg) -> None:
        self.outbox.put(msg)

    def recv(self):
        return self.inbox.get(timeout=TIMEOUT)


class _PipeChannel:
    def __init__(self, conn):
        self.conn = conn

    def send(self, msg) -> None:
        self.conn.send(msg)

    def recv(self):
        if not self.conn.poll(TIMEOUT):
            raise TimeoutError("no message")
        return self.conn.recv()


class Endpoint:
    """One worker's view of the group."""

    def __init__(self, rank: int, size: int, channels: dict[int, Any]):
        self.rank = rank
        self.size = size
        self._ch = channels

    @property
    def is_root(self) -> bool:
        return self.rank == 0

    def _recv(self, peer: int):
        try:
            msg = self._ch[peer].recv()
        except (EOFError, OSError, TimeoutError, queue.Empty) as exc:
            raise CommError(peer, f"disconnected ({type(exc).__name__})") from None
        if isinstance(msg, tuple) and msg and msg[0] == "__error__":
            raise CommError(msg[1], msg[2])
        return msg

    def _send(self, peer: int, msg) -> None:
        try:
            self._ch[peer].send(msg)
        except (BrokenPipeError, OSError) as exc:
            raise CommError(peer, f"disconnected ({type(exc).__name__})") from None

    def abort(self, detail: str) -> None:
        """Tell peers this worker failed (best effort)."""
        for peer in self._ch:
            try:
                self._ch[peer].send(("__error__", self.rank, detail))
            except Exception:
                pass

    def gather(self, obj) -> list | None:
        if self.size == 1:
            return [obj]
        if not self.is_root:
            self._send(0, obj)
            return None
        return [obj] + [self._recv(r) for r in range(1, self.size)]

    def broadcast(self, obj=None):
        if self.size == 1:
            return obj
        if self.is_root:
            for r in range(1, self.size):
                self._send(r, obj)
            return obj
        return self._recv(0)

    def scatter(self, items: list | None = None):
        if self.size == 1:
            return items[0]
        if self.is_root:
            if len(items) != self.size:
                raise ValueError(f"scatter needs {self.size} items, got {len(items)}")
            for r in range(1, self.size):
                self._send(r, items[r])
            return items[0]
        return self._recv(0)

    def allgather(self, obj) -> list:
        return self.broadcast(self.gather(obj))

    def allreduce_mean(self, arrays: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Elementwise mean over workers, summed in rank order."""
        parts = self.gather(arrays)
        result = None
        if self.is_root:
            ref = {k: np.shape(v) for k, v in parts[0].items()}
            for r, part in enumerate(parts):
                got = {k: np.shape(v) for k, v in part.items()}
                if got != ref:
                    err = CommError(r, f"gradient shapes {got} differ from root {ref}")
                    self.broadcast(("__error__", r, str(err)))
                    raise err
            result = {}
            for k in ref:
                acc = np.array(parts[0][k], dtype=float, copy=True)
                for part in parts[1:]:
                    acc = acc + part[k]
                result[k] = acc / self.size
        out = self.broadcast(result)
        if isinstance(out, tuple) and out and out[0] == "__error__":
            raise CommError(out[1], out[2])
        # threads receive the root's object itself; hand each caller its own dict
        return {k: np.array(v, copy=True) for k, v in out.items()}


def default_transport() -> str:
    name = os.environ.get(TRANSPORT_ENV, "thread").strip().lower()
    if name not in ("thread", "process"):
        raise ValueError(f"{TRANSPORT_ENV}={name!r}: expected 'thread' or 'process'")
    return name


def run_group(size: int, fn: Callable[[Endpoint], Any], transport: str | None = None) -> Any:
    """Run ``fn(endpoint)`` on ``size`` workers; return rank 0's result."""
    if size < 1:
        raise ValueError("world size must be at least 1")
    transport = transport or default_transport()
    if size == 1:
        return fn(Endpoint(0, 1, {}))
    if transport == "thread":
        return _run_threads(size, fn)
    if transport == "process":
        return _run_processes(size, fn)
    raise ValueError(f"unknown transport {transport!r}")


def _run_threads(size: int, fn):
    up = [queue.Queue() for _ in range(size)]    # worker -> root
    down = [queue.Queue() for _ in range(size)]  # root -> worker
    root = Endpoint(0, size, {r: _QueueChannel(up[r], down[r]) for r in range(1, size)})
    errors: dict[int, BaseException] = {}

    def work(r):
        ep = Endpoint(r, size, {0: _QueueChannel(down[r], up[r])})
        try:
            fn(ep)
        except BaseException as exc:  # noqa: BLE001
            errors[r] = exc
            ep.abort(f"{type(exc).__name__}: {exc}")

    threads = [threading.Thread(target=work, args=(r,), daemon=True) for r in range(1, size)]
    for t in threads:
        t.start()
    try:
        result = fn(root)
    except BaseException:
        root.abort("root failed")
        raise
    finally:
        for t in threads:
            t.join(timeout=TIMEOUT)
    if errors:
        r = min(errors)
        raise CommError(r, f"failed: {errors[r]}") from errors[r]
    return result


def _child(r: int, size: int, conn, fn) -> None:
    ep = Endpoint(r, size, {0: _PipeChannel(conn)})
    try:
        fn(ep)
    except BaseException as exc:  # noqa: BLE001
        ep.abort(f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}")
        os._exit(1)
    conn.close()
    os._exit(0)


def _run_processes(size: int, fn):
    ctx = mp.get_context("fork")
    conns, procs = {}, []
    for r in range(1, size):
        parent, child = ctx.Pipe()
        p = ctx.Process(target=_child, args=(r, size, child, fn), daemon=True)
        p.start()
        child.close()
        conns[r] = _PipeChannel(parent)
        procs.append(p)
    root = Endpoint(0, size, conns)
    try:
        result = fn(root)
    except BaseException:
        root.abort("root failed")
        for p in procs:
            p.terminate()
        raise
    finally:
        for p in procs:
            p.join(timeout=TIMEOUT)
    bad = [r for r, p in zip(range(1, size), procs) if p.exitcode not in (0, None)]
    if bad:
        raise CommError(bad[0], f"exited with code {procs[bad[0] - 1].exitcode}")
    return result
