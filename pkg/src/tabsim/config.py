"""Run configuration: sectioned key/value document with strict validation.

The on-disk form is INI::

    [device]
    n = 1.25
    ...

Unknown sections or keys are rejected.  :func:`dump` writes every value so
that the resolved configuration can be echoed into outputs and loaded back
bit-for-bit (floats use ``repr``, which round-trips exactly).
"""

import configparser
import dataclasses
from dataclasses import dataclass, field

from .device import MismatchConfig, SubthresholdParams
from .errors import DomainError, ParseError
from .network import InputMap
from .training import BOX, SolverOptions

__all__ = ["RunConfig", "PRESETS", "load", "loads", "dump", "preset", "apply_overrides"]

EMBED_MARK = "; tabsim resolved config"


@dataclass(frozen=True)
class DeviceSection:
    n: float = 1.25
    U_T: float = 0.02585
    I_b_nominal: float = 9e-9
    vref1: float = 0.2
    vref2: float = 0.8
    v_in_lo: float = 0.2
    v_in_hi: float = 0.8
    # current-to-activation gain; activation = output_gain * I / I_b_nominal
    output_gain: float = 1.0
    char_v_lo: float = 0.0
    char_v_hi: float = 1.0
    char_points: int = 201


@dataclass(frozen=True)
class MismatchSection:
    sigma_vref: float = 0.015
    sigma_ib_rel: float = 0.15
    sigma_mirror_rel: float = 0.05
    seed: int = 0
    splitter_sigma: float = 0.0


@dataclass(frozen=True)
class NetworkSection:
    L: int = 50
    direction_policy: str = "split_halves"
    source: str = "analytic"
    weight_std: float = 4.0
    bias_std: float = 0.5
    offset_span: float = 4.0
    tuning_csv: str = ""


@dataclass(frozen=True)
class TrainingSection:
    max_iters: int = 5000
    tol_rel_cost: float = 1e-10
    step_init: float = 1.0
    ridge: float = 1e-10
    box_lo: float = -BOX
    box_hi: float = BOX
    active_set: bool = True


@dataclass(frozen=True)
class ExperimentSection:
    target: str = "sine"
    target_amplitude: float = 1.0
    target_frequency: float = 1.0
    target_table: str = ""
    bits: int = 13
    trials: int = 10
    c_train: int = 200
    c_test: int = 1000
    hidden_counts: tuple = (10, 20, 50, 100, 200)
    bit_list: tuple = tuple(range(1, 14))
    pool: int = 456
    subset: int = 40
    n_subsets: int = 100
    hist_bins: int = 20
    workers: int = 1


SOURCES = ("analytic", "device", "measured")
TARGETS = ("sinc6pi", "square", "sine", "cube", "table")


@dataclass(frozen=True)
class RunConfig:
    device: DeviceSection = field(default_factory=DeviceSection)
    mismatch: MismatchSection = field(default_factory=MismatchSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)

    def __post_init__(self):
        if self.network.source not in SOURCES:
            raise DomainError(f"network.source must be one of {SOURCES}")
        if self.experiment.target not in TARGETS:
            raise DomainError(f"experiment.target must be one of {TARGETS}")
        if self.network.L < 1:
            raise DomainError("network.L must be >= 1")
        if self.experiment.trials < 1:
            raise DomainError("experiment.trials must be >= 1")
        if self.experiment.c_train < 2 or self.experiment.c_test < 1:
            raise DomainError("need c_train >= 2 and c_test >= 1")
        if not 1 <= self.experiment.bits <= 13:
            raise DomainError("experiment.bits must be in [1, 13]")
        if self.experiment.workers < 1:
            raise DomainError("experiment.workers must be >= 1")
        if not self.device.v_in_lo < self.device.v_in_hi:
            raise DomainError("device.v_in_lo must be below device.v_in_hi")
        if not self.device.output_gain > 0:
            raise DomainError("device.output_gain must be positive")
        # construct the typed views once so bad values fail at load time
        self.subthreshold()
        self.mismatch_config()
        self.solver_options()

    @property
    def seed(self):
        return self.mismatch.seed

    def subthreshold(self):
        d = self.device
        return SubthresholdParams(d.n, d.U_T, d.I_b_nominal)

    def mismatch_config(self, seed=None):
        m = self.mismatch
        return MismatchConfig(m.sigma_vref, m.sigma_ib_rel, m.sigma_mirror_rel,
                              m.seed if seed is None else seed)

    def solver_options(self):
        t = self.training
        return SolverOptions(t.max_iters, t.tol_rel_cost, t.step_init, t.ridge,
                             (t.box_lo, t.box_hi), t.active_set)

    def input_map(self):
        return InputMap(self.device.v_in_lo, self.device.v_in_hi)

    def scale(self):
        return self.device.output_gain / self.device.I_b_nominal


SECTIONS = {f.name: f.type for f in dataclasses.fields(RunConfig)}

# Per-subcommand defaults mirroring the experiments they reproduce.
PRESETS = {
    "sample-population": {},
    "characterize": {
        # common reference voltage: no systematic offset, mismatch only
        "device.vref1": 0.5, "device.vref2": 0.5, "network.L": 456,
        "network.source": "device",
    },
    "train": {"experiment.target": "sine", "network.L": 50, "experiment.bits": 13},
    "predict": {},
    "sweep-hidden": {"experiment.target": "sinc6pi"},
    "sweep-bits": {"experiment.target": "sinc6pi", "network.L": 100},
    "subset-capacity": {
        "experiment.target": "sinc6pi", "network.source": "device",
        "network.direction_policy": "positive", "device.output_gain": 8.0,
    },
}


def _parse_value(kind, text, where):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is tuple:
            return tuple(int(p) for p in text.replace(" ", "").split(",") if p)
        return text
    except ValueError:
        raise ParseError(f"{where}: cannot parse {text!r} as {kind.__name__}") from None


def _field_types(section_cls):
    hints = {"float": float, "int": int, "str": str, "bool": bool, "tuple": tuple}
    out = {}
    for f in dataclasses.fields(section_cls):
        out[f.name] = f.type if isinstance(f.type, type) else hints[str(f.type)]
    return out


def apply_overrides(cfg, overrides):
    """Return ``cfg`` with ``{"section.key": value}`` overrides applied."""
    sections = {name: getattr(cfg, name) for name in SECTIONS}
    for dotted, value in overrides.items():
        name, _, key = dotted.partition(".")
        if name not in sections:
            raise DomainError(f"unknown config section {name!r}")
        types = _field_types(type(sections[name]))
        if key not in types:
            raise DomainError(f"unknown config key {dotted!r}")
        if isinstance(value, str) and types[key] is not str:
            value = _parse_value(types[key], value, dotted)
        sections[name] = dataclasses.replace(sections[name], **{key: value})
    return RunConfig(**sections)


def loads(text, base=None, source="<config>"):
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(source))
    except configparser.Error as exc:
        raise ParseError(str(exc).splitlines()[0], path=source) from None
    overrides = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ParseError(f"unknown section [{name}]", path=source)
        types = _field_types(SECTIONS[name])
        for key, raw in parser.items(name):
            if key not in types:
                raise ParseError(f"unknown key {key!r} in [{name}]", path=source)
            overrides[f"{name}.{key}"] = _parse_value(types[key], raw, f"{source} [{name}] {key}")
    return apply_overrides(base or RunConfig(), overrides)


def load(path, base=None):
    """Load an INI file, or the config embedded in a tabsim output file."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("#"):
        text = "\n".join(
            line[1:].lstrip(" ") for line in text.splitlines() if line.startswith("#")
        )
    return loads(text, base=base, source=path)


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def dump(cfg):
    lines = []
    for name in SECTIONS:
        section = getattr(cfg, name)
        lines.append(f"[{name}]")
        for f in dataclasses.fields(section):
            lines.append(f"{f.name} = {_format(getattr(section, f.name))}")
        lines.append("")
    return "\n".join(lines)


def preset(command):
    return apply_overrides(RunConfig(), PRESETS.get(command, {}))
