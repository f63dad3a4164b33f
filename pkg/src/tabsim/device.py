"""Subthreshold differential-pair neuron model with Monte-Carlo device mismatch.

Each hidden neuron is a differential pair M1/M2 biased by a tail current
``I_b``; the current in M1 is mirrored out as the neuron's response.  Random
fixed-pattern mismatch perturbs each neuron's parameters; the channels are
listed on :class:`MismatchConfig`.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = [
    "SubthresholdParams",
    "MismatchConfig",
    "NeuronPhysical",
    "TuningCurve",
    "diff_pair_currents",
    "neuron_output",
    "branch_output",
    "systematic_vref",
    "sample_population",
    "population_arrays",
    "characterize",
    "population_stats",
]

DIRECTION_POLICIES = ("split_halves", "random", "positive")

# floor applied to I_b and mirror gain draws, as a fraction of nominal
_CLAMP_FLOOR = 0.01


@dataclass(frozen=True)
class SubthresholdParams:
    """Weak-inversion transistor parameters shared by a population.

    Attributes:
        n: slope factor, dimensionless.
        U_T: thermal voltage in volts.
        I_b_nominal: nominal tail bias current in amperes.
    """

    n: float = 1.25
    U_T: float = 0.02585
    I_b_nominal: float = 9e-9

    def __post_init__(self):
        if not (1.0 < self.n <= 2.0):
            raise DomainError(f"slope factor n must lie in (1, 2], got {self.n}")
        if not (self.U_T > 0 and np.isfinite(self.U_T)):
            raise DomainError(f"U_T must be positive, got {self.U_T}")
        if not (self.I_b_nominal > 0 and np.isfinite(self.I_b_nominal)):
            raise DomainError(f"I_b_nominal must be positive, got {self.I_b_nominal}")

    @property
    def nUT(self):
        return self.n * self.U_T


@dataclass(frozen=True)
class MismatchConfig:
    """Standard deviations of the Gaussian mismatch channels.

    ``sigma_vref`` is absolute (volts); the other two are relative to nominal.
    All zero gives an ideal population.
    """

    sigma_vref: float = 0.015
    sigma_ib_rel: float = 0.15
    sigma_mirror_rel: float = 0.05
    seed: int = 0

    def __post_init__(self):
        for name in ("sigma_vref", "sigma_ib_rel", "sigma_mirror_rel"):
            value = getattr(self, name)
            if not (value >= 0 and np.isfinite(value)):
                raise DomainError(f"{name} must be finite and >= 0, got {value}")
        if int(self.seed) != self.seed or self.seed < 0 or self.seed >= 2**64:
            raise DomainError(f"seed must be an integer in [0, 2**64), got {self.seed}")


@dataclass(frozen=True)
class NeuronPhysical:
    id: int
    I_b: float
    V_ref: float
    mirror_gain: float
    direction: int

    def __post_init__(self):
        if not self.I_b > 0:
            raise DomainError(f"neuron {self.id}: I_b must be positive")
        if not self.mirror_gain > 0:
            raise DomainError(f"neuron {self.id}: mirror_gain must be positive")
        if self.direction not in (1, -1):
            raise DomainError(f"neuron {self.id}: direction must be +1 or -1")


@dataclass
class TuningCurve:
    """Sampled input-voltage to output-current response of one neuron.

    ``offset_in_range`` is False when the half-amplitude crossing was not
    found on the grid; ``offset_v`` then holds the grid boundary on the side
    where the crossing must lie.
    """

    neuron_id: int
    v_in: np.ndarray
    i_out: np.ndarray
    amplitude: float
    offset_v: float
    offset_in_range: bool = True
    direction: int = field(default=1, compare=False)

    @property
    def points(self):
        return list(zip(self.v_in.tolist(), self.i_out.tolist()))


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DomainError("non-finite voltage or current")


def _logistic(z):
    # shifted by the larger exponent so exp() never overflows
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def diff_pair_currents(v_in, v_ref, p, I_b=None):
    """Drain currents ``(i1, i2)`` of the differential pair.

    ``i1`` flows in the transistor gated by ``v_in``.  Inputs broadcast
    against each other.  ``I_b`` defaults to ``p.I_b_nominal``.
    """
    v_in = np.asarray(v_in, dtype=float)
    v_ref = np.asarray(v_ref, dtype=float)
    I_b = p.I_b_nominal if I_b is None else np.asarray(I_b, dtype=float)
    _check_finite(v_in, v_ref, I_b)
    z = (v_in - v_ref) / p.nUT
    i1 = I_b * _logistic(z)
    i2 = I_b * _logistic(-z)
    if i1.ndim == 0:
        return float(i1), float(i2)
    return i1, i2


def neuron_output(neuron, v_in, p):
    """Mirrored M1 current ``I_tanh`` of one neuron; non-decreasing in ``v_in``."""
    i1, _ = diff_pair_currents(v_in, neuron.V_ref, p, I_b=neuron.I_b)
    return neuron.mirror_gain * i1


def branch_output(neuron, v_in, p):
    """Mirrored current of the branch selected by the neuron's direction.

    Direction +1 mirrors M1 (same as :func:`neuron_output`); direction -1
    mirrors M2, giving the complementary, decreasing tuning curve.
    """
    i1, i2 = diff_pair_currents(v_in, neuron.V_ref, p, I_b=neuron.I_b)
    return neuron.mirror_gain * (i1 if neuron.direction > 0 else i2)


def systematic_vref(vref1, vref2, L):
    """Reference voltages tapped at the midpoints of a uniform resistive divider."""
    if L < 1:
        raise DomainError(f"need at least one tap, got L={L}")
    taps = (np.arange(L) + 0.5) / L
    return (vref1 + taps * (vref2 - vref1)).tolist()


def _direction(i, L, policy, u):
    if policy == "split_halves":
        return 1 if i < (L + 1) // 2 else -1
    if policy == "positive":
        return 1
    return 1 if u < 0.5 else -1


def sample_population(L, base, mm, sys_vref, direction_policy="split_halves"):
    """Draw ``L`` mismatched neurons.

    Every neuron gets its own random stream keyed by ``(mm.seed, id)``, so a
    neuron's parameters do not depend on ``L`` or on evaluation order.
    """
    if L < 1:
        raise DomainError(f"population size must be >= 1, got {L}")
    if len(sys_vref) != L:
        raise DomainError(f"sys_vref has {len(sys_vref)} entries, expected {L}")
    if direction_policy not in DIRECTION_POLICIES:
        raise DomainError(
            f"unknown direction policy {direction_policy!r}; expected one of {DIRECTION_POLICIES}"
        )
    neurons = []
    for i in range(L):
        rng = np.random.default_rng(np.random.SeedSequence([int(mm.seed), i]))
        z_vref, z_ib, z_mirror = rng.standard_normal(3)
        u_dir = rng.random()
        ib_factor = max(1.0 + mm.sigma_ib_rel * z_ib, _CLAMP_FLOOR)
        gain = max(1.0 + mm.sigma_mirror_rel * z_mirror, _CLAMP_FLOOR)
        neurons.append(
            NeuronPhysical(
                id=i,
                I_b=base.I_b_nominal * ib_factor,
                V_ref=float(sys_vref[i]) + mm.sigma_vref * z_vref,
                mirror_gain=gain,
                direction=_direction(i, L, direction_policy, u_dir),
            )
        )
    return neurons


def population_arrays(neurons):
    """Stack a population into ``(I_b, V_ref, mirror_gain, direction)`` arrays."""
    return (
        np.array([nr.I_b for nr in neurons], dtype=float),
        np.array([nr.V_ref for nr in neurons], dtype=float),
        np.array([nr.mirror_gain for nr in neurons], dtype=float),
        np.array([nr.direction for nr in neurons], dtype=int),
    )


def _half_max_crossing(v, i, level):
    above = i >= level
    for k in range(len(v) - 1):
        if i[k] == level:
            return float(v[k]), True
        if above[k] != above[k + 1]:
            t = (level - i[k]) / (i[k + 1] - i[k])
            return float(v[k] + t * (v[k + 1] - v[k])), True
    if i[-1] == level:
        return float(v[-1]), True
    # no crossing on the grid: report the boundary on the side it must lie
    rising = i[-1] >= i[0]
    return float(v[0] if rising else v[-1]), False


def characterize(neuron, v_grid, p, respect_direction=False):
    """Sweep ``v_grid`` and fit the amplitude and half-max offset of a neuron.

    By default this probes ``I_tanh`` (the M1 branch), like loading full-scale
    magnitude into the neuron's weight and ramping the input.  With
    ``respect_direction`` the direction-selected branch is recorded instead,
    which is what a Measured source needs to replay a Device source.
    """
    v = np.asarray(v_grid, dtype=float)
    if v.ndim != 1 or len(v) < 8:
        raise DomainError("characterization grid needs at least 8 points")
    if np.any(np.diff(v) <= 0):
        raise DomainError("characterization grid must be strictly ascending")
    if respect_direction:
        i = np.asarray(branch_output(neuron, v, p), dtype=float)
    else:
        i = np.asarray(neuron_output(neuron, v, p), dtype=float)
    return curve_from_points(neuron.id, v, i, direction=neuron.direction if respect_direction else 1)


def curve_from_points(neuron_id, v, i, direction=1):
    """Build a :class:`TuningCurve` from raw samples, fitting amplitude and offset."""
    v = np.asarray(v, dtype=float)
    i = np.asarray(i, dtype=float)
    amplitude = float(np.max(i))
    offset, ok = _half_max_crossing(v, i, amplitude / 2.0)
    return TuningCurve(neuron_id, v, i, amplitude, offset, ok, direction)


def population_stats(curves, bins=20):
    """Summary statistics of amplitudes and offsets, with equal-width histograms."""
    if len(curves) < 2:
        raise DomainError("population statistics need at least 2 curves")
    out = {}
    for key, values in (
        ("amplitude", np.array([c.amplitude for c in curves])),
        ("offset_v", np.array([c.offset_v for c in curves])),
    ):
        counts, edges = np.histogram(values, bins=bins)
        out[key] = {
            "mean": float(np.mean(values)),
            "std": float(np.std(values, ddof=1)),
            "histogram": (counts, edges),
        }
    return out
