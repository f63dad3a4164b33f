"""Simulation of a mismatch-driven analogue random-projection regressor."""

from .device import (
    MismatchConfig,
    NeuronPhysical,
    SubthresholdParams,
    TuningCurve,
    characterize,
    diff_pair_currents,
    sample_population,
)
from .errors import DomainError, IllConditionedError, ParseError
from .network import AnalyticSource, DeviceSource, MeasuredSource, OutputWeights, predict
from .quantization import WeightCode, decode, encode, splitter_transfer
from .training import SolverOptions, constrained_solve, pseudoinverse_solve

__version__ = "0.1.0"
