"""
Minimal numpy-backed reverse-mode autodiff: tensors, layers, losses and Adam.

Every operation builds an output Tensor holding its parents and a closure that
pushes the output gradient back to them; ``backward`` runs the closures in
reverse topological order.
"""
import logging
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from glycocc.config import BATCHNORM_EPS, BATCHNORM_MOMENTUM, DROPOUT_P, PRELU_INIT
from glycocc.errors import DegenerateBatch, InvalidProbability, ShapeMismatch

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence]


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """Dense float64 array with an optional gradient buffer."""

    def __init__(self, data: ArrayLike, requires_grad: bool = False, _prev: Tuple["Tensor", ...] = (), _op: str = ""):
        self.data = np.array(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _prev)
        self._prev = _prev
        self._op = _op
        self._backward: Callable[[], None] = lambda: None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op or 'leaf'})"

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        grad = _unbroadcast(np.asarray(grad, dtype=np.float64), self.shape)
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: Optional[ArrayLike] = None) -> None:
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
            for parent in node._prev:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data) if grad is None else np.array(grad, dtype=np.float64)
        for node in reversed(topo):
            if node.grad is not None:
                node._backward()

    # arithmetic

    def __add__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data + other.data, _prev=(self, other), _op="add")

        def _backward():
            self.accumulate(out.grad)
            other.accumulate(out.grad)
        out._backward = _backward
        return out

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return self * -1.0

    def __sub__(self, other) -> "Tensor":
        return self + (-(other if isinstance(other, Tensor) else Tensor(other)))

    def __rsub__(self, other) -> "Tensor":
        return Tensor(other) - self

    def __mul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data * other.data, _prev=(self, other), _op="mul")

        def _backward():
            self.accumulate(out.grad * other.data)
            other.accumulate(out.grad * self.data)
        out._backward = _backward
        return out

    __rmul__ = __mul__

    def __matmul__(self, other: "Tensor") -> "Tensor":
        if self.data.ndim != 2 or other.data.ndim != 2 or self.shape[1] != other.shape[0]:
            raise ShapeMismatch(f"Cannot multiply {self.shape} by {other.shape}")
        out = Tensor(self.data @ other.data, _prev=(self, other), _op="matmul")

        def _backward():
            self.accumulate(out.grad @ other.data.T)
            other.accumulate(self.data.T @ out.grad)
        out._backward = _backward
        return out

    def sum(self, axis: Optional[int] = None) -> "Tensor":
        out = Tensor(self.data.sum(axis=axis), _prev=(self,), _op="sum")

        def _backward():
            grad = out.grad if axis is None else np.expand_dims(out.grad, axis)
            self.accumulate(np.broadcast_to(grad, self.shape))
        out._backward = _backward
        return out

    def mean(self, axis: Optional[int] = None) -> "Tensor":
        count = self.data.size if axis is None else self.shape[axis]
        return self.sum(axis) * (1.0 / max(count, 1))

    def reshape(self, *shape: int) -> "Tensor":
        out = Tensor(self.data.reshape(*shape), _prev=(self,), _op="reshape")

        def _backward():
            self.accumulate(out.grad.reshape(self.shape))
        out._backward = _backward
        return out


class Parameter(Tensor):
    """Trainable tensor with Adam moment buffers."""

    def __init__(self, data: ArrayLike):
        super().__init__(data, requires_grad=True)
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)
        self.step = 0

    def __repr__(self) -> str:
        return f"Parameter(shape={self.shape})"


# structural ops

def gather_rows(x: Tensor, index: np.ndarray) -> Tensor:
    index = np.asarray(index, dtype=np.int64)
    out = Tensor(x.data[index], _prev=(x,), _op="gather")

    def _backward():
        grad = np.zeros_like(x.data)
        np.add.at(grad, index, out.grad)
        x.accumulate(grad)
    out._backward = _backward
    return out


def scatter_rows(x: Tensor, index: np.ndarray, n_rows: int) -> Tensor:
    """Sum rows of ``x`` into ``n_rows`` output rows at ``index``."""
    index = np.asarray(index, dtype=np.int64)
    data = np.zeros((n_rows,) + x.shape[1:], dtype=np.float64)
    np.add.at(data, index, x.data)
    out = Tensor(data, _prev=(x,), _op="scatter")

    def _backward():
        x.accumulate(out.grad[index])
    out._backward = _backward
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), _prev=tuple(tensors), _op="concat")
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def _backward():
        for t, start, stop in zip(tensors, bounds[:-1], bounds[1:]):
            t.accumulate(np.take(out.grad, np.arange(start, stop), axis=axis))
    out._backward = _backward
    return out


def segment_softmax(scores: Tensor, segments: np.ndarray, n_segments: int) -> Tensor:
    """Softmax of a score vector computed independently inside each segment."""
    segments = np.asarray(segments, dtype=np.int64)
    s = scores.data.reshape(-1)
    peak = np.full(n_segments, -np.inf)
    np.maximum.at(peak, segments, s)
    e = np.exp(s - peak[segments])
    total = np.zeros(n_segments)
    np.add.at(total, segments, e)
    weights = e / total[segments]
    out = Tensor(weights.reshape(scores.shape), _prev=(scores,), _op="segment_softmax")

    def _backward():
        g = out.grad.reshape(-1)
        dot = np.zeros(n_segments)
        np.add.at(dot, segments, weights * g)
        scores.accumulate((weights * (g - dot[segments])).reshape(scores.shape))
    out._backward = _backward
    return out


# layers as functions

def linear(x: Tensor, W: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """y = xW + b."""
    if x.data.ndim != 2 or W.data.ndim != 2 or x.shape[1] != W.shape[0]:
        raise ShapeMismatch(f"linear: input {x.shape} does not fit weight {W.shape}")
    if b is not None and b.shape != (W.shape[1],):
        raise ShapeMismatch(f"linear: bias {b.shape} does not fit weight {W.shape}")
    y = x @ W
    return y + b if b is not None else y


def prelu(x: Tensor, a: Tensor) -> Tensor:
    """x where positive, a·x elsewhere; the slope at 0 is a."""
    positive = x.data > 0
    out = Tensor(np.where(positive, x.data, a.data * x.data), _prev=(x, a), _op="prelu")

    def _backward():
        x.accumulate(out.grad * np.where(positive, 1.0, a.data))
        a.accumulate(out.grad * np.where(positive, 0.0, x.data))
    out._backward = _backward
    return out


def dropout(x: Tensor, p: float, training: bool, rng_seed) -> Tensor:
    """Inverted dropout with a mask drawn from ``rng_seed``."""
    if not 0.0 <= p < 1.0:
        raise InvalidProbability(f"Dropout probability {p} outside [0, 1)")
    if not training or p == 0.0:
        return x
    rng = np.random.default_rng(rng_seed)
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * Tensor(mask)


def batchnorm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = BATCHNORM_MOMENTUM,
    eps: float = BATCHNORM_EPS,
) -> Tensor:
    """Per-column normalization; running statistics are updated in place while training."""
    if x.data.ndim != 2 or x.shape[1] != gamma.shape[0]:
        raise ShapeMismatch(f"batchnorm: input {x.shape} does not fit {gamma.shape[0]} channels")
    n = x.shape[0]
    if not training:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        x_hat = (x.data - running_mean) * inv_std
        out = Tensor(x_hat * gamma.data + beta.data, _prev=(x, gamma, beta), _op="batchnorm")

        def _backward_eval():
            x.accumulate(out.grad * gamma.data * inv_std)
            gamma.accumulate((out.grad * x_hat).sum(axis=0))
            beta.accumulate(out.grad.sum(axis=0))
        out._backward = _backward_eval
        return out

    if n < 2:
        raise DegenerateBatch(f"batchnorm needs at least 2 rows in training mode, got {n}")
    mean = x.data.mean(axis=0)
    var = x.data.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.data - mean) * inv_std
    running_mean *= 1.0 - momentum
    running_mean += momentum * mean
    running_var *= 1.0 - momentum
    running_var += momentum * var * n / (n - 1)
    out = Tensor(x_hat * gamma.data + beta.data, _prev=(x, gamma, beta), _op="batchnorm")

    def _backward():
        g = out.grad
        gamma.accumulate((g * x_hat).sum(axis=0))
        beta.accumulate(g.sum(axis=0))
        d_hat = g * gamma.data
        x.accumulate(
            inv_std / n * (n * d_hat - d_hat.sum(axis=0) - x_hat * (d_hat * x_hat).sum(axis=0))
        )
    out._backward = _backward
    return out


# losses

def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"{what}: predictions {a.shape} vs targets {b.shape}")


def bce_with_logits(logits: Tensor, targets: ArrayLike) -> Tensor:
    """Mean binary cross-entropy over all entries, via the softplus form."""
    t = np.asarray(targets, dtype=np.float64)
    if t.size == logits.data.size:
        t = t.reshape(logits.shape)
    _check_same_shape(logits.data, t, "bce_with_logits")
    if np.any((t < 0) | (t > 1)):
        raise InvalidProbability("bce_with_logits targets must lie in [0, 1]")
    z = logits.data
    loss = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
    count = max(z.size, 1)
    out = Tensor(loss.sum() / count, _prev=(logits,), _op="bce")

    def _backward():
        sig = 0.5 * (1.0 + np.tanh(0.5 * z))
        logits.accumulate(out.grad * (sig - t) / count)
    out._backward = _backward
    return out


def cross_entropy(logits: Tensor, classes: ArrayLike) -> Tensor:
    """Mean softmax cross-entropy; ``classes`` holds integer labels per row."""
    z = logits.data if logits.data.ndim == 2 else logits.data.reshape(1, -1)
    c = np.asarray(classes, dtype=np.int64).reshape(-1)
    if c.shape[0] != z.shape[0]:
        raise ShapeMismatch(f"cross_entropy: {z.shape[0]} rows vs {c.shape[0]} labels")
    if np.any((c < 0) | (c >= z.shape[1])):
        raise ShapeMismatch(f"cross_entropy: class index outside [0, {z.shape[1]})")
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(z.shape[0])
    loss = (log_norm - shifted[rows, c]).mean()
    out = Tensor(loss, _prev=(logits,), _op="cross_entropy")

    def _backward():
        probs = np.exp(shifted - log_norm[:, None])
        probs[rows, c] -= 1.0
        logits.accumulate(out.grad * (probs / z.shape[0]).reshape(logits.shape))
    out._backward = _backward
    return out


def mse(pred: Tensor, target: ArrayLike) -> Tensor:
    t = np.asarray(target, dtype=np.float64)
    if t.size == pred.data.size:
        t = t.reshape(pred.shape)
    _check_same_shape(pred.data, t, "mse")
    diff = pred.data - t
    count = max(diff.size, 1)
    out = Tensor((diff ** 2).sum() / count, _prev=(pred,), _op="mse")

    def _backward():
        pred.accumulate(out.grad * 2.0 * diff / count)
    out._backward = _backward
    return out


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


# optimisation

def adam_step(
    params: Sequence[Parameter],
    grads: Optional[Sequence[Optional[np.ndarray]]] = None,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Bias-corrected Adam update applied in place."""
    for index, p in enumerate(params):
        g = grads[index] if grads is not None else p.grad
        if g is None:
            g = np.zeros_like(p.data)
        p.step += 1
        p.m = beta1 * p.m + (1.0 - beta1) * g
        p.v = beta2 * p.v + (1.0 - beta2) * g * g
        m_hat = p.m / (1.0 - beta1 ** p.step)
        v_hat = p.v / (1.0 - beta2 ** p.step)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    def __init__(self, params: Iterable[Parameter], lr: float = 1e-3, betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        adam_step(self.params, lr=self.lr, beta1=self.betas[0], beta2=self.betas[1], eps=self.eps)


def finite_diff_check(f: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-5) -> float:
    """Largest relative gap between reverse-mode and central-difference gradients.

    ``f`` is re-evaluated with each coordinate of each tensor in ``params``
    nudged by ±h; it must be deterministic.
    """
    for p in params:
        p.zero_grad()
    f().backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        for k in range(flat.size):
            original = flat[k]
            flat[k] = original + h
            up = f().item()
            flat[k] = original - h
            down = f().item()
            flat[k] = original
            numeric = (up - down) / (2.0 * h)
            a = grad.reshape(-1)[k]
            worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), 1e-8))
    return worst


# modules

def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Module:
    """Container walking attributes for parameters, buffers and submodules."""

    training = True

    def children(self) -> Iterator[Tuple[str, "Module"]]:
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{i}", item
            elif isinstance(value, dict):
                for key, item in value.items():
                    if isinstance(item, Module):
                        yield f"{name}.{key}", item

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield prefix + name, value
        for name, child in self.children():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, value in getattr(self, "buffers", {}).items():
            yield prefix + name, value
        for name, child in self.children():
            yield from child.named_buffers(f"{prefix}{name}.")

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {name: p.data for name, p in self.named_parameters()}
        state.update({f"buffer:{name}": b for name, b in self.named_buffers()})
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        from glycocc.errors import CheckpointError

        targets = {name: p.data for name, p in self.named_parameters()}
        targets.update({f"buffer:{name}": b for name, b in self.named_buffers()})
        missing = sorted(set(targets) - set(state))
        unexpected = sorted(set(state) - set(targets))
        if missing or unexpected:
            raise CheckpointError(f"State mismatch: missing {missing[:3]}, unexpected {unexpected[:3]}")
        for name, array in targets.items():
            if array.shape != state[name].shape:
                raise CheckpointError(f"{name}: shape {state[name].shape} != {array.shape}")
            array[...] = state[name]


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        self.weight = Parameter(glorot_uniform(rng, d_in, d_out))
        self.bias = Parameter(np.zeros(d_out)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self.weight, self.bias)


class PReLU(Module):
    def __init__(self, channels: int, init: float = PRELU_INIT):
        self.slope = Parameter(np.full(channels, init))

    def __call__(self, x: Tensor) -> Tensor:
        return prelu(x, self.slope)


class Dropout(Module):
    """Dropout whose mask depends only on (seed, layer id, step)."""

    def __init__(self, p: float = DROPOUT_P, layer_id: int = 0, seed: int = 0):
        if not 0.0 <= p < 1.0:
            raise InvalidProbability(f"Dropout probability {p} outside [0, 1)")
        self.p = p
        self.layer_id = layer_id
        self.seed = seed

    def __call__(self, x: Tensor, step: int = 0) -> Tensor:
        return dropout(x, self.p, self.training, [self.seed, self.layer_id, step])


class BatchNorm(Module):
    def __init__(self, channels: int, momentum: float = BATCHNORM_MOMENTUM, eps: float = BATCHNORM_EPS):
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.momentum = momentum
        self.eps = eps
        self.buffers = {"running_mean": np.zeros(channels), "running_var": np.ones(channels)}

    def __call__(self, x: Tensor) -> Tensor:
        return batchnorm(
            x, self.gamma, self.beta, self.buffers["running_mean"], self.buffers["running_var"],
            self.training, self.momentum, self.eps,
        )
