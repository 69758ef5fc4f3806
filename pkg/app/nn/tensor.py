"""
Minimal reverse-mode autodiff over numpy arrays

Every operation returns a new ``Tensor`` that remembers its parents and a
closure accumulating gradients into them. ``backward()`` walks the graph in
reverse topological order. Only the operations the models in this package
need are implemented.
"""
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

ArrayLike = Union[np.ndarray, float, int, Sequence]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """ndarray value plus gradient bookkeeping"""

    __array_priority__ = 100

    def __init__(self, data: ArrayLike, requires_grad: bool = False, _parents: Tuple["Tensor", ...] = (), _op: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.grad: Optional[np.ndarray] = None
        self._parents = _parents if self.requires_grad else ()
        self._backward: Callable[[], None] = lambda: None
        self._op = _op

    # ----- basics -----

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op!r}, requires_grad={self.requires_grad})"

    def _accumulate(self, grad: np.ndarray):
        if not self.requires_grad:
            return
        grad = _unbroadcast(grad, self.data.shape)
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64)
        else:
            self.grad = self.grad + grad

    def backward(self, grad: Optional[np.ndarray] = None):
        """
        Accumulate gradients of this tensor into every leaf that requires them

        Args:
            grad: Upstream gradient; defaults to ones (scalar losses)
        """
        topo: List[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=np.float64)
        for node in reversed(topo):
            if node.requires_grad and node.grad is not None:
                node._backward()

    # ----- arithmetic -----

    def __add__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = Tensor(self.data + other.data, _parents=(self, other), _op="+")

        def _backward():
            self._accumulate(out.grad)
            other._accumulate(out.grad)
        out._backward = _backward
        return out

    def __mul__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = Tensor(self.data * other.data, _parents=(self, other), _op="*")

        def _backward():
            self._accumulate(out.grad * other.data)
            other._accumulate(out.grad * self.data)
        out._backward = _backward
        return out

    def __pow__(self, exponent: float) -> "Tensor":
        if isinstance(exponent, Tensor):
            raise TypeError("only constant exponents are supported")
        out = Tensor(self.data ** exponent, _parents=(self,), _op=f"**{exponent}")

        def _backward():
            self._accumulate(out.grad * exponent * self.data ** (exponent - 1))
        out._backward = _backward
        return out

    def __truediv__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = Tensor(self.data / other.data, _parents=(self, other), _op="/")

        def _backward():
            self._accumulate(out.grad / other.data)
            other._accumulate(-out.grad * self.data / other.data ** 2)
        out._backward = _backward
        return out

    def __neg__(self) -> "Tensor":
        return self * -1.0

    def __radd__(self, other) -> "Tensor":
        return self + other

    def __sub__(self, other) -> "Tensor":
        return self + (-as_tensor(other))

    def __rsub__(self, other) -> "Tensor":
        return as_tensor(other) + (-self)

    def __rmul__(self, other) -> "Tensor":
        return self * other

    def __rtruediv__(self, other) -> "Tensor":
        return as_tensor(other) / self

    def __matmul__(self, other) -> "Tensor":
        other = as_tensor(other)
        out = Tensor(np.matmul(self.data, other.data), _parents=(self, other), _op="@")

        def _backward():
            g = out.grad
            a, b = self.data, other.data
            if b.ndim == 1:
                self._accumulate(np.multiply.outer(g, b))
                other._accumulate(np.tensordot(a, g, axes=(list(range(a.ndim - 1)), list(range(g.ndim)))))
                return
            if a.ndim == 1:
                self._accumulate(np.matmul(b, g[..., None])[..., 0])
                other._accumulate(a[:, None] * g[..., None, :])
                return
            self._accumulate(np.matmul(g, np.swapaxes(b, -1, -2)))
            other._accumulate(np.matmul(np.swapaxes(a, -1, -2), g))
        out._backward = _backward
        return out

    def __rmatmul__(self, other) -> "Tensor":
        return as_tensor(other) @ self

    @property
    def T(self) -> "Tensor":
        out = Tensor(np.swapaxes(self.data, -1, -2), _parents=(self,), _op="T")

        def _backward():
            self._accumulate(np.swapaxes(out.grad, -1, -2))
        out._backward = _backward
        return out

    # ----- elementwise -----

    def exp(self) -> "Tensor":
        value = np.exp(self.data)
        out = Tensor(value, _parents=(self,), _op="exp")

        def _backward():
            self._accumulate(out.grad * value)
        out._backward = _backward
        return out

    def log(self) -> "Tensor":
        out = Tensor(np.log(self.data), _parents=(self,), _op="log")

        def _backward():
            self._accumulate(out.grad / self.data)
        out._backward = _backward
        return out

    def tanh(self) -> "Tensor":
        value = np.tanh(self.data)
        out = Tensor(value, _parents=(self,), _op="tanh")

        def _backward():
            self._accumulate(out.grad * (1.0 - value ** 2))
        out._backward = _backward
        return out

    def sigmoid(self) -> "Tensor":
        value = _sigmoid(self.data)
        out = Tensor(value, _parents=(self,), _op="sigmoid")

        def _backward():
            self._accumulate(out.grad * value * (1.0 - value))
        out._backward = _backward
        return out

    def silu(self) -> "Tensor":
        sig = _sigmoid(self.data)
        out = Tensor(self.data * sig, _parents=(self,), _op="silu")

        def _backward():
            self._accumulate(out.grad * (sig + self.data * sig * (1.0 - sig)))
        out._backward = _backward
        return out

    # ----- reductions and shape -----

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), _parents=(self,), _op="sum")

        def _backward():
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.data.shape))
        out._backward = _backward
        return out

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        count = self.data.size if axis is None else np.prod([self.data.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(count))

    def reshape(self, *shape) -> "Tensor":
        out = Tensor(self.data.reshape(*shape), _parents=(self,), _op="reshape")

        def _backward():
            self._accumulate(out.grad.reshape(self.data.shape))
        out._backward = _backward
        return out

    def __getitem__(self, index) -> "Tensor":
        if isinstance(index, Tensor):
            index = index.data.astype(np.int64)
        out = Tensor(self.data[index], _parents=(self,), _op="getitem")

        def _backward():
            grad = np.zeros_like(self.data)
            np.add.at(grad, index, out.grad)
            self._accumulate(grad)
        out._backward = _backward
        return out

    def log_softmax(self, axis: int = -1) -> "Tensor":
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        value = shifted - log_norm
        out = Tensor(value, _parents=(self,), _op="log_softmax")

        def _backward():
            g = out.grad
            self._accumulate(g - np.exp(value) * g.sum(axis=axis, keepdims=True))
        out._backward = _backward
        return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def take(table: Tensor, indices: np.ndarray) -> Tensor:
    """Row gather: ``table[indices]`` with scatter-add backward"""
    return table[np.asarray(indices, dtype=np.int64)]


def concat(tensors: Iterable[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), _parents=tuple(tensors), _op="concat")
    sizes = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def _backward():
        for t, g in zip(tensors, np.split(out.grad, sizes, axis=axis)):
            t._accumulate(g)
    out._backward = _backward
    return out


def einsum(subscripts: str, a: Tensor, b: Tensor) -> Tensor:
    """
    Two-operand einsum

    Every index of an operand must appear in the output or in the other
    operand (no index is summed inside a single operand).
    """
    a, b = as_tensor(a), as_tensor(b)
    inputs, output = subscripts.replace(" ", "").split("->")
    sa, sb = inputs.split(",")
    out = Tensor(np.einsum(subscripts, a.data, b.data), _parents=(a, b), _op="einsum")

    def _backward():
        a._accumulate(np.einsum(f"{output},{sb}->{sa}", out.grad, b.data))
        b._accumulate(np.einsum(f"{output},{sa}->{sb}", out.grad, a.data))
    out._backward = _backward
    return out


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape))


def parameter(data: ArrayLike) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)
