"""Reverse-mode autodiff core: tape-recorded tensors over float64 numpy.

The graph is define-by-run: every differentiable op appends one node to the
active tape while it computes its forward value.  ``backward`` sweeps the
tape once in reverse creation order (creation order is already topological)
and accumulates gradients with ``+=`` so fan-out just works.  The tape is
freed after the sweep; a fresh forward pass is needed for another backward.

Single-threaded by design.  Tensors are immutable after creation except for
gradient accumulation and optimizer updates to leaf parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import ContractError

ArrayLike = "np.ndarray | float | int | Sequence"


class Tensor:
    """Shape-tagged float64 array that can participate in the tape.

    ``grad`` is populated by :func:`backward` on every tensor that has
    ``requires_grad`` set; it always matches ``data`` in shape.  ``node_id``
    is the index of the producing tape node, or None for leaves.
    """

    __slots__ = ("data", "requires_grad", "grad", "node_id", "name")

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.node_id: int | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"


@dataclass
class Node:
    """One recorded operation: output, parents, and the local backward rule."""

    out: Tensor
    parents: tuple[Tensor, ...]
    backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]]
    op: str = ""


@dataclass
class Graph:
    """Tape of operations in creation (hence topological) order."""

    nodes: list[Node] = field(default_factory=list)

    def record(self, out: Tensor, parents: tuple[Tensor, ...], backward_fn, op: str = "") -> None:
        out.node_id = len(self.nodes)
        self.nodes.append(Node(out, parents, backward_fn, op))

    def clear(self) -> None:
        for node in self.nodes:
            node.out.node_id = None
        self.nodes.clear()

    def __len__(self) -> int:
        return len(self.nodes)


_ACTIVE = Graph()
_GRAD_ENABLED = True


def active_graph() -> Graph:
    return _ACTIVE


class no_grad:
    """Context manager that suspends tape recording (inference mode)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def recording_enabled() -> bool:
    return _GRAD_ENABLED


def record(out_data: np.ndarray, parents: tuple[Tensor, ...], backward_fn, op: str = "") -> Tensor:
    """Wrap an op result; put it on the tape iff some parent needs gradients."""
    out = Tensor(out_data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        _ACTIVE.record(out, parents, backward_fn, op)
    return out


def backward(loss: Tensor, graph: Graph | None = None, clear: bool = True) -> None:
    """Populate ``grad`` on every requires_grad *leaf* reachable from ``loss``.

    ``loss`` must be a scalar produced by ops recorded on ``graph`` (the
    active tape by default).  Each node's backward rule runs exactly once,
    with the fully accumulated output gradient; gradients of tape
    intermediates flow onward without being stored.  The tape is cleared
    afterwards unless ``clear=False``.
    """
    g = graph if graph is not None else _ACTIVE
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.node_id is None:
        # Loss independent of any recorded op: nothing to propagate.
        if loss.requires_grad:
            loss.accumulate_grad(np.ones_like(loss.data))
        return

    # Mark nodes reachable from the loss so unrelated tape entries are skipped.
    needed = np.zeros(len(g.nodes), dtype=bool)
    stack = [loss.node_id]
    while stack:
        idx = stack.pop()
        if needed[idx]:
            continue
        needed[idx] = True
        for parent in g.nodes[idx].parents:
            if parent.node_id is not None and not needed[parent.node_id]:
                stack.append(parent.node_id)

    pending: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.data)}
    for idx in range(len(g.nodes) - 1, -1, -1):
        if not needed[idx]:
            continue
        g_out = pending.pop(idx, None)
        if g_out is None:
            continue
        node = g.nodes[idx]
        parent_grads = node.backward_fn(g_out)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None:
                continue
            if parent.node_id is not None:
                prev = pending.get(parent.node_id)
                # Rebind instead of += : backward rules may hand the same
                # buffer to several parents, so stored grads are never mutated.
                pending[parent.node_id] = pg if prev is None else prev + pg
            elif parent.requires_grad:
                parent.accumulate_grad(pg)
    if clear:
        g.clear()


def as_tensor(x: "Tensor | ArrayLike") -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)
