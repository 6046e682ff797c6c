"""Dense float64 primitives with explicit forward and backward passes.

Each ``*_backward`` takes the gradient of a scalar loss w.r.t. the primitive's
output, accumulates (``+=``) into any :class:`Param` it touches and returns
the gradients w.r.t. its plain array inputs. Reductions over rows always run
left to right so that results are bitwise reproducible.
"""

from __future__ import annotations

import numpy as np

LOG_EPS = 1e-12


class ShapeError(ValueError):
    pass


def as_tensor(x, check: bool = True) -> np.ndarray:
    """Convert to a float64 array, rejecting NaN/Inf when ``check`` is set."""
    arr = np.asarray(x, dtype=np.float64)
    if check and not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains non-finite values")
    return arr


class Param:
    """A learned array together with its accumulated gradient."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, value, name: str = ""):
        self.name = name
        self.value = as_tensor(value).copy()
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.value.shape})"


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Seeded PCG64 stream. ``key`` selects an independent child stream.

    Streams are derived with ``SeedSequence(seed, spawn_key=key)``, so the
    same ``(seed, key)`` gives the same numbers on every platform.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def init_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    k = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-k, k, size=shape)


# ---------------------------------------------------------------- affine


def affine(x: np.ndarray, W: Param, b: Param | None = None) -> np.ndarray:
    if W.value.ndim != 2 or x.ndim != 1 or W.value.shape[1] != x.shape[0]:
        raise ShapeError(f"affine: W{W.value.shape} cannot map x{x.shape}")
    y = W.value @ x
    if b is not None:
        if b.value.shape != y.shape:
            raise ShapeError(f"affine: bias {b.value.shape} vs output {y.shape}")
        y = y + b.value
    return y


def affine_backward(x, W: Param, b: Param | None, gy) -> np.ndarray:
    W.grad += gy[:, None] * x[None, :]
    if b is not None:
        b.grad += gy
    return W.value.T @ gy


# ---------------------------------------------------------------- pointwise


def tanh_map(x):
    return np.tanh(x)


def tanh_backward(y, gy):
    return gy * (1.0 - y * y)


def sigmoid_map(x):
    # tanh form never overflows
    return 0.5 + 0.5 * np.tanh(0.5 * np.asarray(x, dtype=np.float64))


def sigmoid_backward(y, gy):
    return gy * y * (1.0 - y)


# ---------------------------------------------------------------- softmax


def softmax(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] == 0:
        raise ShapeError("softmax of an empty vector")
    e = np.exp(x - x.max())
    return e / e.sum()


def softmax_backward(p, gp):
    return p * (gp - np.dot(gp, p))


# ---------------------------------------------------------------- structural


def concat(parts) -> np.ndarray:
    if not parts:
        raise ShapeError("concat needs at least one part")
    return np.concatenate([np.asarray(p, dtype=np.float64) for p in parts])


def concat_backward(sizes, g) -> list[np.ndarray]:
    offsets = np.cumsum(sizes)[:-1]
    return np.split(g, offsets)


def _rows(F) -> np.ndarray:
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2:
        raise ShapeError("expected a list of equal-length vectors")
    return F


def weighted_sum(F, alpha) -> np.ndarray:
    """``sum_i alpha_i * F[i]``, accumulated row by row from the left."""
    F = _rows(F)
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (F.shape[0],):
        raise ShapeError(f"weights {alpha.shape} vs {F.shape[0]} rows")
    terms = alpha[:, None] * F
    if terms.shape[0] == 0:
        return np.zeros(F.shape[1])
    # accumulate is strictly sequential; sum() may reorder into pairwise blocks
    return np.add.accumulate(terms, axis=0)[-1]


def weighted_sum_backward(F, alpha, g):
    gF = alpha[:, None] * g[None, :]
    galpha = F @ g
    return gF, galpha


def mean_rows(F) -> np.ndarray:
    F = _rows(F)
    n = F.shape[0]
    if n == 0:
        raise ShapeError("mean of zero rows")
    return weighted_sum(F, np.full(n, 1.0 / n))


def mean_rows_backward(n: int, g) -> np.ndarray:
    return np.tile(g * (1.0 / n), (n, 1))


# ---------------------------------------------------------------- likelihood


def nll_from_probs(p, target: int) -> float:
    """``-log p[target]`` with the probability clamped at ``LOG_EPS``."""
    p = np.asarray(p)
    if not 0 <= target < p.shape[0]:
        raise IndexError(f"target {target} out of range for {p.shape[0]} classes")
    q = min(max(float(p[target]), LOG_EPS), 1.0)
    return 0.0 - float(np.log(q))


def nll_backward(p, target: int, g: float = 1.0) -> np.ndarray:
    gp = np.zeros_like(p, dtype=np.float64)
    if p[target] >= LOG_EPS:
        gp[target] = -g / p[target]
    return gp


# ---------------------------------------------------------------- verification


def finite_diff_grad(f, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x`` (any shape)."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def param_fd_grad(f, param: Param, h: float = 1e-6) -> np.ndarray:
    """Finite-difference gradient of ``f()`` w.r.t. a Param, perturbed in place."""
    grad = np.zeros_like(param.value)
    flat, gflat = param.value.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def grad_error(analytic, numeric, abs_floor: float = 1e-7, rel_tol: float = 1e-4) -> float:
    """Largest of ``|a - n| / max(|a|, |n|, abs_floor / rel_tol)`` over entries.

    The result is below ``rel_tol`` exactly when every entry has relative
    error below ``rel_tol`` or absolute error below ``abs_floor``.
    """
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if a.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), abs_floor / rel_tol)
    return float(np.max(np.abs(a - n) / scale))
