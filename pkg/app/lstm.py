"""
LSTM hidden layer with diagonal (peephole) state-to-gate connections and its
exact backpropagation-through-time pass.

Gate naming: ``a`` input gate, ``b`` forget gate, ``g`` output gate,
``s`` cell state. Input matrices are (input_size x hidden), recurrent
matrices (hidden x hidden); peepholes and biases are length-hidden vectors.
"""

from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import expit

from app.core_math import vec_mat
from app.errors import DimensionError, MissingCacheError


@dataclass
class LstmParams:
    """Weights of one LSTM layer, in declaration order."""
    w_ia: np.ndarray
    w_ib: np.ndarray
    w_ig: np.ndarray
    w_is: np.ndarray
    w_ha: np.ndarray
    w_hb: np.ndarray
    w_hg: np.ndarray
    w_hs: np.ndarray
    w_sa: np.ndarray
    w_sb: np.ndarray
    w_sg: np.ndarray
    b_a: np.ndarray
    b_b: np.ndarray
    b_s: np.ndarray
    b_g: np.ndarray

    @property
    def input_size(self) -> int:
        return self.w_ia.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.w_ia.shape[1]

    @classmethod
    def shapes(cls, input_size: int, hidden_size: int) -> Dict[str, tuple]:
        """Return the shape of every parameter for the given sizes."""
        shapes = {}
        for f in fields(cls):
            if f.name.startswith('w_i'):
                shapes[f.name] = (input_size, hidden_size)
            elif f.name.startswith('w_h'):
                shapes[f.name] = (hidden_size, hidden_size)
            else:
                shapes[f.name] = (hidden_size,)
        return shapes

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> 'LstmParams':
        return cls(**{name: np.zeros(shape) for name, shape in cls.shapes(input_size, hidden_size).items()})

    @classmethod
    def uniform(cls, input_size: int, hidden_size: int, init_range: float,
                rng: np.random.Generator) -> 'LstmParams':
        """Draw every weight and bias uniformly from [-init_range, init_range]."""
        return cls(**{
            name: rng.uniform(-init_range, init_range, size=shape)
            for name, shape in cls.shapes(input_size, hidden_size).items()
        })

    def named_arrays(self) -> Dict[str, np.ndarray]:
        """Parameter arrays keyed by field name (views, not copies)."""
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def validate(self) -> None:
        """
        Check mutual consistency of all dimensions.

        Raises:
            DimensionError: If any array has the wrong shape.
        """
        expected = self.shapes(self.input_size, self.hidden_size)
        for name, array in self.named_arrays().items():
            if array.shape != expected[name]:
                raise DimensionError(f"LSTM parameter {name} has shape {array.shape}, expected {expected[name]}")


@dataclass
class LstmState:
    """Hidden vector h and cell state s."""
    h: np.ndarray
    s: np.ndarray

    @classmethod
    def zeros(cls, hidden_size: int) -> 'LstmState':
        return cls(h=np.zeros(hidden_size), s=np.zeros(hidden_size))


@dataclass
class LstmCache:
    """Per-step activations of one sequence, stored by :func:`lstm_forward`."""
    inputs: np.ndarray
    h_prev: np.ndarray
    s_prev: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    g: np.ndarray
    s: np.ndarray
    tanh_s: np.ndarray


@dataclass
class LstmGradients:
    """Gradients of one LSTM layer for one sequence."""
    params: LstmParams
    inputs: np.ndarray
    initial: LstmState = field(default=None)


def _activations(x: np.ndarray, prev: LstmState, params: LstmParams) -> Tuple[np.ndarray, ...]:
    a = expit(vec_mat(x, params.w_ia, 'w_ia') + prev.h @ params.w_ha + params.w_sa * prev.s + params.b_a)
    b = expit(vec_mat(x, params.w_ib, 'w_ib') + prev.h @ params.w_hb + params.w_sb * prev.s + params.b_b)
    c = np.tanh(vec_mat(x, params.w_is, 'w_is') + prev.h @ params.w_hs + params.b_s)
    s = b * prev.s + a * c
    # output gate peeks at the new cell state
    g = expit(vec_mat(x, params.w_ig, 'w_ig') + prev.h @ params.w_hg + params.w_sg * s + params.b_g)
    tanh_s = np.tanh(s)
    return a, b, c, g, s, tanh_s


def _check_state(prev: LstmState, params: LstmParams) -> None:
    hidden = params.hidden_size
    if prev.h.shape != (hidden,) or prev.s.shape != (hidden,):
        raise DimensionError(
            f"state vectors of length {prev.h.shape[0]}/{prev.s.shape[0]} do not match hidden size {hidden}")


def lstm_step(x: np.ndarray, prev: LstmState, params: LstmParams) -> LstmState:
    """
    Advance the LSTM by one step.

    Args:
        x: Input vector of length ``params.input_size``.
        prev: Previous hidden and cell state.
        params: Layer weights.

    Returns:
        LstmState: The new (h, s).

    Raises:
        DimensionError: If the input or state lengths do not match the weights.
    """
    _check_state(prev, params)
    _, _, _, g, s, tanh_s = _activations(np.asarray(x, dtype=np.float64), prev, params)
    return LstmState(h=g * tanh_s, s=s)


def lstm_forward(inputs: np.ndarray, params: LstmParams, initial: Optional[LstmState] = None,
                 cache: bool = False) -> Tuple[np.ndarray, Optional[LstmCache]]:
    """
    Run the layer over a whole sequence.

    Args:
        inputs: (N x input_size) array, one row per step.
        params: Layer weights.
        initial: Starting state; zeros when omitted.
        cache: Whether to keep the activations needed by :func:`lstm_backward`.

    Returns:
        Tuple of the (N x hidden) hidden sequence and the cache (or None).
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    hidden = params.hidden_size
    state = initial if initial is not None else LstmState.zeros(hidden)
    _check_state(state, params)
    steps = inputs.shape[0]

    outputs = np.zeros((steps, hidden))
    record: Dict[str, List[np.ndarray]] = {k: [] for k in ('h_prev', 's_prev', 'a', 'b', 'c', 'g', 's', 'tanh_s')}
    for n in range(steps):
        a, b, c, g, s, tanh_s = _activations(inputs[n], state, params)
        if cache:
            for key, value in zip(('h_prev', 's_prev', 'a', 'b', 'c', 'g', 's', 'tanh_s'),
                                  (state.h, state.s, a, b, c, g, s, tanh_s)):
                record[key].append(value)
        state = LstmState(h=g * tanh_s, s=s)
        outputs[n] = state.h

    if not cache:
        return outputs, None
    stacked = {k: np.array(v).reshape(steps, hidden) for k, v in record.items()}
    return outputs, LstmCache(inputs=inputs, **stacked)


def lstm_backward(cache: Optional[LstmCache], params: LstmParams, d_h: np.ndarray,
                  d_s: Optional[np.ndarray] = None) -> LstmGradients:
    """
    Backpropagate through time over one cached sequence.

    Args:
        cache: Activations from ``lstm_forward(..., cache=True)``.
        params: The weights used in that forward pass.
        d_h: (N x hidden) external gradient on each hidden vector.
        d_s: Optional (N x hidden) external gradient on each cell state.

    Returns:
        LstmGradients: parameter gradients, input gradients and gradients of
        the initial state.

    Raises:
        MissingCacheError: If no cache is given.
        DimensionError: If the gradient streams do not match the cache.
    """
    if cache is None:
        raise MissingCacheError("lstm_backward needs the activation cache of the forward pass")
    steps, hidden = cache.s.shape
    d_h = np.asarray(d_h, dtype=np.float64)
    if d_h.shape != (steps, hidden):
        raise DimensionError(f"hidden gradient shape {d_h.shape} does not match cached sequence {(steps, hidden)}")
    if d_s is None:
        d_s = np.zeros_like(d_h)
    elif d_s.shape != (steps, hidden):
        raise DimensionError(f"state gradient shape {d_s.shape} does not match cached sequence {(steps, hidden)}")

    grads = LstmParams.zeros(params.input_size, hidden)
    d_inputs = np.zeros_like(cache.inputs)
    dh_next = np.zeros(hidden)
    ds_next = np.zeros(hidden)

    for n in reversed(range(steps)):
        x, h_prev, s_prev = cache.inputs[n], cache.h_prev[n], cache.s_prev[n]
        a, b, c, g, s, tanh_s = cache.a[n], cache.b[n], cache.c[n], cache.g[n], cache.s[n], cache.tanh_s[n]

        dh = d_h[n] + dh_next
        dg = dh * tanh_s
        ds = d_s[n] + ds_next + dh * g * (1.0 - tanh_s ** 2)
        dz_g = dg * g * (1.0 - g)
        ds += dz_g * params.w_sg

        dz_a = ds * c * a * (1.0 - a)
        dz_b = ds * s_prev * b * (1.0 - b)
        dz_c = ds * a * (1.0 - c ** 2)

        grads.w_ia += np.outer(x, dz_a)
        grads.w_ib += np.outer(x, dz_b)
        grads.w_ig += np.outer(x, dz_g)
        grads.w_is += np.outer(x, dz_c)
        grads.w_ha += np.outer(h_prev, dz_a)
        grads.w_hb += np.outer(h_prev, dz_b)
        grads.w_hg += np.outer(h_prev, dz_g)
        grads.w_hs += np.outer(h_prev, dz_c)
        grads.w_sa += dz_a * s_prev
        grads.w_sb += dz_b * s_prev
        grads.w_sg += dz_g * s
        grads.b_a += dz_a
        grads.b_b += dz_b
        grads.b_s += dz_c
        grads.b_g += dz_g

        d_inputs[n] = (params.w_ia @ dz_a + params.w_ib @ dz_b
                       + params.w_is @ dz_c + params.w_ig @ dz_g)
        dh_next = (params.w_ha @ dz_a + params.w_hb @ dz_b
                   + params.w_hs @ dz_c + params.w_hg @ dz_g)
        ds_next = ds * b + dz_a * params.w_sa + dz_b * params.w_sb

    return LstmGradients(params=grads, inputs=d_inputs, initial=LstmState(h=dh_next, s=ds_next))
