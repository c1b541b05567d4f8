"""Single LSTM cell with scalar input: recurrence and backpropagation.

Gate parameters are stacked along the first axis in the order
forget, input, output, candidate (see GATE_ORDER).
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.special import expit


GATE_ORDER = ("forget", "input", "output", "candidate")
FORGET, INPUT, OUTPUT, CANDIDATE = range(4)


@dataclass(frozen=True)
class LstmCellParams:
    """Per-gate weights of an LSTM cell with input size 1.

    Attributes:
        w_x: (4, H) input weights
        w_h: (4, H, H) recurrent weights
        b: (4, H) biases
    """

    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        hidden = self.w_x.shape[1] if np.ndim(self.w_x) == 2 else 0
        if hidden < 1 or self.w_x.shape != (4, hidden):
            raise ValueError(f"w_x must have shape (4, H), got {np.shape(self.w_x)}")
        if self.w_h.shape != (4, hidden, hidden):
            raise ValueError(f"w_h must have shape (4, {hidden}, {hidden}), got {self.w_h.shape}")
        if self.b.shape != (4, hidden):
            raise ValueError(f"b must have shape (4, {hidden}), got {self.b.shape}")
        for name in ("w_x", "w_h", "b"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def hidden_size(self) -> int:
        return self.w_x.shape[1]

    @property
    def size(self) -> int:
        return self.w_x.size + self.w_h.size + self.b.size

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.w_x.ravel(), self.w_h.ravel(), self.b.ravel()])

    @classmethod
    def from_vector(cls, vector: np.ndarray, hidden: int) -> "LstmCellParams":
        n_x, n_h = 4 * hidden, 4 * hidden * hidden
        return cls(
            w_x=vector[:n_x].reshape(4, hidden).copy(),
            w_h=vector[n_x:n_x + n_h].reshape(4, hidden, hidden).copy(),
            b=vector[n_x + n_h:n_x + n_h + n_x].reshape(4, hidden).copy(),
        )

    @classmethod
    def zeros(cls, hidden: int) -> "LstmCellParams":
        return cls(np.zeros((4, hidden)), np.zeros((4, hidden, hidden)), np.zeros((4, hidden)))

    @classmethod
    def initialize(cls, hidden: int, rng: np.random.Generator) -> "LstmCellParams":
        """Glorot-uniform input weights, 1/sqrt(H) recurrent weights, forget bias 1."""
        x_limit = np.sqrt(6.0 / (1 + hidden))
        h_limit = 1.0 / np.sqrt(hidden)
        b = np.zeros((4, hidden))
        b[FORGET] = 1.0
        return cls(
            w_x=rng.uniform(-x_limit, x_limit, size=(4, hidden)),
            w_h=rng.uniform(-h_limit, h_limit, size=(4, hidden, hidden)),
            b=b,
        )


@dataclass
class StepCache:
    """Intermediate values of one step, kept for backpropagation."""

    x: float
    h_prev: np.ndarray
    c_prev: np.ndarray
    gates: np.ndarray  # (4, H) activated f, i, o, g
    c: np.ndarray
    tanh_c: np.ndarray


def lstm_step(
    params: LstmCellParams,
    x: float,
    h_prev: np.ndarray,
    c_prev: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """One LSTM recurrence step.

    f, i, o = logistic(affine); g = tanh(affine);
    c = f * c_prev + i * g; h = o * tanh(c)

    Returns:
        (h, c)
    """
    cache = _step(params, x, h_prev, c_prev)
    return cache.gates[OUTPUT] * cache.tanh_c, cache.c


def run_sequence(
    params: LstmCellParams, xs: np.ndarray
) -> Tuple[np.ndarray, List[StepCache]]:
    """Run the cell over `xs` from zero initial state.

    Returns:
        hs of shape (W + 1, H) where hs[t + 1] is the state after xs[t],
        and the per-step caches
    """
    hidden = params.hidden_size
    hs = np.zeros((len(xs) + 1, hidden))
    h, c = np.zeros(hidden), np.zeros(hidden)
    caches: List[StepCache] = []
    for t, x in enumerate(xs):
        cache = _step(params, float(x), h, c)
        caches.append(cache)
        h, c = cache.gates[OUTPUT] * cache.tanh_c, cache.c
        hs[t + 1] = h
    return hs, caches


def backprop_sequence(
    params: LstmCellParams,
    caches: List[StepCache],
    dhs: np.ndarray,
) -> LstmCellParams:
    """Backpropagation through time for `run_sequence`.

    Args:
        params: Cell parameters used in the forward run
        caches: Caches returned by run_sequence
        dhs: (W + 1, H) loss gradient with respect to each hs entry

    Returns:
        Gradients packed as LstmCellParams
    """
    hidden = params.hidden_size
    g_wx = np.zeros_like(params.w_x)
    g_wh = np.zeros_like(params.w_h)
    g_b = np.zeros_like(params.b)
    dh_next = np.zeros(hidden)
    dc_next = np.zeros(hidden)

    for t in range(len(caches) - 1, -1, -1):
        cache = caches[t]
        f, i, o, g = cache.gates
        dh = dhs[t + 1] + dh_next
        do = dh * cache.tanh_c
        dc = dc_next + dh * o * (1.0 - cache.tanh_c ** 2)

        dz = np.empty((4, hidden))
        dz[FORGET] = dc * cache.c_prev * f * (1.0 - f)
        dz[INPUT] = dc * g * i * (1.0 - i)
        dz[OUTPUT] = do * o * (1.0 - o)
        dz[CANDIDATE] = dc * i * (1.0 - g ** 2)

        g_wx += dz * cache.x
        g_wh += dz[:, :, None] * cache.h_prev[None, None, :]
        g_b += dz
        dh_next = np.einsum("gab,ga->b", params.w_h, dz)
        dc_next = dc * f

    return LstmCellParams(g_wx, g_wh, g_b)


def _step(params: LstmCellParams, x: float, h_prev: np.ndarray, c_prev: np.ndarray) -> StepCache:
    z = params.w_x * x + np.einsum("gab,b->ga", params.w_h, h_prev) + params.b
    gates = np.empty_like(z)
    gates[:CANDIDATE] = expit(z[:CANDIDATE])
    gates[CANDIDATE] = np.tanh(z[CANDIDATE])
    c = gates[FORGET] * c_prev + gates[INPUT] * gates[CANDIDATE]
    return StepCache(x=x, h_prev=h_prev, c_prev=c_prev, gates=gates, c=c, tanh_c=np.tanh(c))
