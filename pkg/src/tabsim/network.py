"""Hidden-layer response sources and the output-layer forward pass.

A response source maps a normalized input ``x`` in [-1, 1] to the vector of
``L`` hidden-neuron activations.  Three sources are interchangeable:

* :class:`AnalyticSource` - ``tanh(w1*x + b1 + o1) * d1`` per neuron.
* :class:`DeviceSource` - mirrored differential-pair currents from a
  mismatched population, times a current-to-activation scale.
* :class:`MeasuredSource` - piecewise-linear replay of tuning-curve tables.

Every source implements ``responses(xs) -> (len(xs), L)`` array.
"""

from dataclasses import dataclass, field

import numpy as np

from .device import _logistic, population_arrays
from .errors import DomainError

__all__ = [
    "AnalyticNeuronParams",
    "AnalyticSource",
    "DeviceSource",
    "MeasuredSource",
    "OutputWeights",
    "InputMap",
    "hidden_response",
    "build_activation_matrix",
    "predict",
    "sample_analytic",
    "analytic_equivalent",
]


@dataclass(frozen=True)
class AnalyticNeuronParams:
    w1: float
    b1: float
    o1: float
    d1: int

    def __post_init__(self):
        if self.d1 not in (1, -1):
            raise DomainError("d1 must be +1 or -1")
        if not np.all(np.isfinite([self.w1, self.b1, self.o1])):
            raise DomainError("analytic neuron parameters must be finite")


@dataclass(frozen=True)
class InputMap:
    """Affine map from normalized input [-1, 1] to gate voltage [lo, hi]."""

    lo: float = 0.2
    hi: float = 0.8

    def __call__(self, x):
        return self.lo + (np.asarray(x, dtype=float) + 1.0) * 0.5 * (self.hi - self.lo)


def _as_inputs(xs):
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if xs.ndim != 1:
        raise DomainError("this network takes scalar inputs")
    if not np.all(np.isfinite(xs)):
        raise DomainError("inputs must be finite")
    return xs


class AnalyticSource:
    """Ideal tanh neurons.  ``w1`` may be ``(L,)`` or ``(L, m)`` for m-dimensional input."""

    def __init__(self, w1, b1, o1, d1):
        self.w1 = np.asarray(w1, dtype=float)
        self.b1 = np.asarray(b1, dtype=float)
        self.o1 = np.asarray(o1, dtype=float)
        self.d1 = np.asarray(d1, dtype=float)
        L = self.w1.shape[0]
        if L == 0:
            raise DomainError("empty response source")
        if not (self.b1.shape == self.o1.shape == self.d1.shape == (L,)):
            raise DomainError("w1, b1, o1, d1 must describe the same number of neurons")
        if not np.all(np.isin(self.d1, (-1.0, 1.0))):
            raise DomainError("directions must be +1 or -1")

    @classmethod
    def from_params(cls, params):
        if not params:
            raise DomainError("empty response source")
        return cls(
            [p.w1 for p in params], [p.b1 for p in params],
            [p.o1 for p in params], [p.d1 for p in params],
        )

    @property
    def L(self):
        return self.w1.shape[0]

    def params(self):
        if self.w1.ndim != 1:
            raise DomainError("per-neuron params are only defined for scalar input weights")
        return [
            AnalyticNeuronParams(float(w), float(b), float(o), int(d))
            for w, b, o, d in zip(self.w1, self.b1, self.o1, self.d1)
        ]

    def responses(self, xs):
        if self.w1.ndim == 2:
            X = np.atleast_2d(np.asarray(xs, dtype=float))
            drive = X @ self.w1.T
        else:
            drive = np.outer(_as_inputs(xs), self.w1)
        return np.tanh(drive + self.b1 + self.o1) * self.d1

    def subset(self, idx):
        return AnalyticSource(self.w1[idx], self.b1[idx], self.o1[idx], self.d1[idx])


class DeviceSource:
    """Responses computed from a physical population.

    ``scale`` converts amperes to dimensionless activation; the usual choice
    is ``gain / I_b_nominal``.
    """

    def __init__(self, neurons, params, scale=None, input_map=InputMap()):
        if len(neurons) == 0:
            raise DomainError("empty response source")
        self.neurons = list(neurons)
        self.params = params
        self.scale = 1.0 / params.I_b_nominal if scale is None else float(scale)
        self.input_map = input_map
        self._ib, self._vref, self._gain, self._dir = population_arrays(self.neurons)

    @property
    def L(self):
        return len(self.neurons)

    def responses(self, xs):
        v = self.input_map(_as_inputs(xs))
        z = np.subtract.outer(v, self._vref) / self.params.nUT
        # direction -1 mirrors the complementary branch: logistic(-z)
        branch = _logistic(z * self._dir)
        return self.scale * self._gain * self._ib * branch

    def subset(self, idx):
        return DeviceSource([self.neurons[i] for i in np.atleast_1d(idx)],
                            self.params, self.scale, self.input_map)


class MeasuredSource:
    """Tuning-curve tables replayed by linear interpolation.

    Queries are mapped to volts with ``input_map`` (identity by default) and
    clamped to each curve's endpoints.
    """

    def __init__(self, curves, scale=1.0, input_map=InputMap(-1.0, 1.0)):
        if len(curves) == 0:
            raise DomainError("empty response source")
        self.curves = list(curves)
        self.scale = float(scale)
        self.input_map = input_map

    @property
    def L(self):
        return len(self.curves)

    def responses(self, xs):
        v = self.input_map(_as_inputs(xs))
        out = np.empty((v.size, self.L))
        for j, c in enumerate(self.curves):
            # np.interp holds the endpoint value outside the table
            out[:, j] = np.interp(v, c.v_in, c.i_out)
        return self.scale * out

    def subset(self, idx):
        return MeasuredSource([self.curves[i] for i in np.atleast_1d(idx)],
                              self.scale, self.input_map)


@dataclass
class OutputWeights:
    """Trained output weights.  ``constrained`` is False for the pseudoinverse path."""

    values: np.ndarray
    box: tuple = (-(1 - 2.0**-12), 1 - 2.0**-12)
    constrained: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def __len__(self):
        return self.values.shape[0]

    def in_box(self):
        lo, hi = self.box
        return bool(np.all((self.values >= lo) & (self.values <= hi)))


def hidden_response(source, x):
    """Vector of ``L`` hidden activations for one input ``x``."""
    return source.responses(np.atleast_1d(x))[0]


def build_activation_matrix(source, xs):
    """``(C, L)`` matrix whose column ``i`` is neuron ``i``'s response over ``xs``.

    The returned array is read-only so it can be shared between solvers.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.shape[0] < 1:
        raise DomainError("need at least one training input")
    H = np.ascontiguousarray(source.responses(xs), dtype=float)
    if not np.all(np.isfinite(H)):
        raise DomainError("activation matrix has non-finite entries")
    H.setflags(write=False)
    return H


def predict(source, w, x):
    """Network output ``sum_i w_i r_i(x)``; ``x`` may be a scalar or an array."""
    values = w.values if isinstance(w, OutputWeights) else np.asarray(w, dtype=float)
    if values.shape != (source.L,):
        raise DomainError(f"expected {source.L} weights, got {values.shape[0]}")
    if np.ndim(x) == 0:
        return float(hidden_response(source, x) @ values)
    return source.responses(x) @ values


def sample_analytic(L, rng, weight_std=4.0, bias_std=0.5, offset_span=4.0,
                    direction_policy="split_halves"):
    """Random tanh population: Gaussian input weights and biases, evenly spread offsets.

    Offsets sit at the midpoints of ``[offset_span, -offset_span]`` so that
    with typical input weights the tanh centres cover the input range.
    """
    if L < 1:
        raise DomainError(f"hidden count must be >= 1, got {L}")
    w1 = rng.normal(0.0, weight_std, L)
    b1 = rng.normal(0.0, bias_std, L)
    o1 = -offset_span * ((np.arange(L) + 0.5) / L * 2.0 - 1.0)
    if direction_policy == "split_halves":
        d1 = np.where(np.arange(L) < (L + 1) // 2, 1.0, -1.0)
    elif direction_policy == "positive":
        d1 = np.ones(L)
    elif direction_policy == "random":
        d1 = np.where(rng.random(L) < 0.5, 1.0, -1.0)
    else:
        raise DomainError(f"unknown direction policy {direction_policy!r}")
    return AnalyticSource(w1, b1, o1, d1)


def analytic_equivalent(source):
    """Analytic source whose tanh arguments match a device population.

    With ``D`` the device responses and ``A`` these analytic ones,
    ``D = (scale * gain * I_b / 2) * (1 + A)`` neuron by neuron.
    """
    half = 0.5 * (source.input_map.hi - source.input_map.lo)
    mid = source.input_map(0.0)
    two_nut = 2.0 * source.params.nUT
    L = source.L
    w1 = np.full(L, half / two_nut)
    b1 = (mid - source._vref) / two_nut
    # direction folds into the tanh sign, so the mapping is the same for both
    return AnalyticSource(w1, b1, np.zeros(L), source._dir.astype(float))
