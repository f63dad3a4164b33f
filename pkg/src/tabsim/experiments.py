"""Regression experiments: targets, train/test protocol and sweeps.

All randomness flows from ``cfg.mismatch.seed``.  Sweeps derive one seed per
trial from ``(master_seed, structural indices)`` so serial and threaded runs
produce identical reports.
"""

import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import config as config_mod
from .device import (
    characterize,
    population_stats,
    sample_population,
    systematic_vref,
)
from .errors import DomainError
from .network import DeviceSource, MeasuredSource, build_activation_matrix, predict, sample_analytic
from .quantization import MAG_BITS, SplitterMismatch, effective_weights, quantize_weights
from .training import constrained_solve, cost

__all__ = [
    "TargetFunction",
    "ExperimentReport",
    "derive_seed",
    "train_grid",
    "test_grid",
    "make_source",
    "eval_rms",
    "splitter_mismatches",
    "train_function",
    "sweep_hidden",
    "sweep_bits",
    "subset_capacity",
    "characterize_population",
    "unimodality_pvalue",
    "CHIP_SUBSET_REFERENCE",
]

# measured on the fabricated chip: 100 random 40-neuron subsets of 456, sinc target
CHIP_SUBSET_REFERENCE = {"mean": 0.049, "std": 0.0095}


@dataclass(frozen=True)
class TargetFunction:
    kind: str
    amplitude: float = 1.0
    frequency: float = 1.0
    table_x: tuple = ()
    table_y: tuple = ()

    def __post_init__(self):
        if self.kind not in config_mod.TARGETS:
            raise DomainError(f"unknown target {self.kind!r}")
        if self.kind == "table":
            x = np.asarray(self.table_x, dtype=float)
            if len(x) < 2 or len(x) != len(self.table_y):
                raise DomainError("table target needs >= 2 matching (x, y) pairs")
            if np.any(np.diff(x) <= 0):
                raise DomainError("table target x values must be strictly ascending")
            if x[0] > -1.0 or x[-1] < 1.0:
                raise DomainError("table target must cover [-1, 1]")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "sinc6pi":
            # np.sinc(t) = sin(pi t)/(pi t) with the removable point t = 0 set to 1
            return np.sinc(6.0 * x)
        if self.kind == "square":
            return x**2
        if self.kind == "cube":
            return x**3
        if self.kind == "sine":
            return self.amplitude * np.sin(np.pi * self.frequency * x)
        return np.interp(x, self.table_x, self.table_y)

    @classmethod
    def from_config(cls, cfg):
        e = cfg.experiment
        if e.target == "table":
            from .fileio import load_table

            xs, ys = load_table(e.target_table)
            return cls("table", table_x=tuple(xs), table_y=tuple(ys))
        return cls(e.target, e.target_amplitude, e.target_frequency)


@dataclass
class ExperimentReport:
    """Per-trial relative RMS errors with their summary.

    ``rows`` holds one dict per trial; ``errors`` the post-quantization
    relative RMS of each trial in trial order.
    """

    kind: str
    errors: list
    seeds: list
    rows: list
    config: object
    meta: dict = field(default_factory=dict)

    # statistics works in exact rationals: identical trials give a std of exactly 0

    @property
    def mean(self):
        return float(statistics.mean(self.errors))

    @property
    def std(self):
        # sample std; a single trial has no spread
        return float(statistics.stdev(self.errors)) if len(self.errors) > 1 else 0.0


def derive_seed(master_seed, *indices):
    """Stable 63-bit seed for the stream identified by ``indices``."""
    state = np.random.SeedSequence([int(master_seed), *[int(i) for i in indices]])
    return int(state.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def train_grid(cfg):
    return np.linspace(-1.0, 1.0, cfg.experiment.c_train)


def test_grid(cfg):
    # cell midpoints: never coincides with the endpoint-inclusive training grid
    n = cfg.experiment.c_test
    return -1.0 + (np.arange(n) + 0.5) * (2.0 / n)


def make_source(cfg, seed, L=None):
    """Build the hidden layer described by ``cfg`` with population seed ``seed``."""
    L = cfg.network.L if L is None else L
    if L < 1:
        raise DomainError(f"hidden count must be >= 1, got {L}")
    net = cfg.network
    kind = net.source
    if kind == "analytic":
        return sample_analytic(L, np.random.default_rng(seed), net.weight_std, net.bias_std,
                               net.offset_span, net.direction_policy)
    if kind == "device":
        d = cfg.device
        neurons = sample_population(L, cfg.subthreshold(), cfg.mismatch_config(seed),
                                    systematic_vref(d.vref1, d.vref2, L), net.direction_policy)
        return DeviceSource(neurons, cfg.subthreshold(), cfg.scale(), cfg.input_map())
    from .fileio import load_tuning_csv

    curves = load_tuning_csv(net.tuning_csv)
    if L > len(curves):
        raise DomainError(f"asked for {L} neurons but {net.tuning_csv} has {len(curves)}")
    src = MeasuredSource(curves, cfg.scale(), cfg.input_map())
    if L < len(curves):
        idx = np.sort(np.random.default_rng(seed).choice(len(curves), L, replace=False))
        src = src.subset(idx)
    return src


def eval_rms(source, w, target, xs_test):
    """Prediction error RMS relative to the target's RMS."""
    xs = np.asarray(xs_test, dtype=float)
    if xs.size == 0:
        raise DomainError("empty test set")
    y = target(xs) if callable(target) else np.asarray(target, dtype=float)
    ref = np.sqrt(np.mean(y**2))
    if ref == 0:
        raise DomainError("relative RMS is undefined for an all-zero target")
    yhat = predict(source, w, xs)
    return float(np.sqrt(np.mean((yhat - y) ** 2)) / ref)


def splitter_mismatches(cfg, seed, L):
    """Per-neuron splitter deviations for a run, or None when ideal."""
    sigma = cfg.mismatch.splitter_sigma
    if sigma <= 0:
        return None
    return [SplitterMismatch.sample(derive_seed(seed, 0x5B17, j), sigma) for j in range(L)]


def _fit(cfg, source, target, seed, depths):
    """Train one network and score it at each magnitude depth in ``depths``."""
    xs, xt = train_grid(cfg), test_grid(cfg)
    H = build_activation_matrix(source, xs)
    y = target(xs)
    w, fit = constrained_solve(H, y, cfg.solver_options())
    splitters = splitter_mismatches(cfg, seed, source.L)
    scored = {}
    for depth in depths:
        codes, _ = quantize_weights(w, depth)
        wq = effective_weights(codes, splitters)
        scored[depth] = {
            "codes": codes,
            "weights": wq,
            "rms_post": eval_rms(source, wq, target, xt),
            "cost_post": cost(H, wq, y),
        }
    base = {
        "seed": seed,
        "L": source.L,
        "rms_pre": eval_rms(source, w, target, xt),
        "cost_pre": fit.final_cost,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "active_box_fraction": fit.active_box_fraction,
    }
    return w, base, scored


def _map(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _report(kind, cfg, rows, meta):
    return ExperimentReport(
        kind=kind,
        errors=[r["rms_post"] for r in rows],
        seeds=[r["seed"] for r in rows],
        rows=rows,
        config=cfg,
        meta=meta,
    )


def _row(base, depth_result, trial, bits):
    row = {"trial": trial, "bits": bits, **base}
    row["rms_post"] = depth_result["rms_post"]
    row["cost_post"] = depth_result["cost_post"]
    return row


def train_function(cfg):
    """Train one network on ``cfg``'s target; population seed is ``cfg.mismatch.seed``.

    Returns ``(weights, codes, report)``; the weights are the unquantized
    constrained solution, the codes their quantization at ``cfg.experiment.bits``.
    """
    target = TargetFunction.from_config(cfg)
    depth = cfg.experiment.bits - 1
    source = make_source(cfg, cfg.seed)
    w, base, scored = _fit(cfg, source, target, cfg.seed, [depth])
    row = _row(base, scored[depth], 0, cfg.experiment.bits)
    report = _report("train", cfg, [row], {"bits": cfg.experiment.bits, "L": source.L})
    return w, scored[depth]["codes"], report


def sweep_hidden(cfg, counts=None):
    """One report per hidden count, ``cfg.experiment.trials`` trials each."""
    counts = list(cfg.experiment.hidden_counts if counts is None else counts)
    if not counts:
        raise DomainError("no hidden counts to sweep")
    target = TargetFunction.from_config(cfg)
    depth = cfg.experiment.bits - 1

    def trial(job):
        L, t = job
        seed = derive_seed(cfg.seed, L, t)
        _, base, scored = _fit(cfg, make_source(cfg, seed, L), target, seed, [depth])
        return _row(base, scored[depth], t, cfg.experiment.bits)

    jobs = [(L, t) for L in counts for t in range(cfg.experiment.trials)]
    rows = _map(trial, jobs, cfg.experiment.workers)
    out = {}
    for L in counts:
        mine = [r for (jL, _), r in zip(jobs, rows) if jL == L]
        out[L] = _report("sweep_hidden", cfg, mine, {"L": L, "bits": cfg.experiment.bits})
    return out


def sweep_bits(cfg, bit_list=None):
    """One report per total bit depth (sign + ``bits - 1`` magnitude bits).

    Each trial is solved once at full precision and re-quantized per depth.
    """
    bit_list = list(cfg.experiment.bit_list if bit_list is None else bit_list)
    if not bit_list or any(not 1 <= b <= MAG_BITS + 1 for b in bit_list):
        raise DomainError(f"bit depths must lie in [1, {MAG_BITS + 1}]")
    target = TargetFunction.from_config(cfg)
    L = cfg.network.L

    def trial(t):
        seed = derive_seed(cfg.seed, L, t)
        _, base, scored = _fit(cfg, make_source(cfg, seed, L), target, seed,
                               [b - 1 for b in bit_list])
        return base, scored

    results = _map(trial, range(cfg.experiment.trials), cfg.experiment.workers)
    out = {}
    for b in bit_list:
        rows = [_row(base, scored[b - 1], t, b) for t, (base, scored) in enumerate(results)]
        out[b] = _report("sweep_bits", cfg, rows, {"L": L, "bits": b})
    return out


def subset_capacity(cfg, pool_size=None, subset_size=None, n_subsets=None):
    """Train on random neuron subsets drawn from one mismatched pool.

    Returns ``(report, (counts, edges))`` where the histogram covers the
    subsets' post-quantization relative RMS errors.
    """
    e = cfg.experiment
    pool_size = e.pool if pool_size is None else pool_size
    subset_size = e.subset if subset_size is None else subset_size
    n_subsets = e.n_subsets if n_subsets is None else n_subsets
    if not 1 <= subset_size <= pool_size:
        raise DomainError(f"subset size {subset_size} must be in [1, pool size {pool_size}]")
    if n_subsets < 1:
        raise DomainError("need at least one subset")
    target = TargetFunction.from_config(cfg)
    depth = e.bits - 1
    pool = make_source(cfg, cfg.seed, pool_size)

    def trial(s):
        seed = derive_seed(cfg.seed, pool_size, subset_size, s)
        idx = np.sort(np.random.default_rng(seed).choice(pool_size, subset_size, replace=False))
        _, base, scored = _fit(cfg, pool.subset(idx), target, seed, [depth])
        row = _row(base, scored[depth], s, e.bits)
        row["neurons"] = " ".join(str(i) for i in idx)
        return row

    rows = _map(trial, range(n_subsets), e.workers)
    report = _report("subset_capacity", cfg, rows, {
        "pool": pool_size, "subset": subset_size, "n_subsets": n_subsets,
        "chip_reference_mean": CHIP_SUBSET_REFERENCE["mean"],
        "chip_reference_std": CHIP_SUBSET_REFERENCE["std"],
    })
    hist = np.histogram(report.errors, bins=e.hist_bins)
    return report, hist


def characterize_population(cfg):
    """Sample ``cfg.network.L`` device neurons and sweep each one's tuning curve.

    Curves follow each neuron's direction-selected branch, so the exported
    table replays the device as a measured source.  Amplitude and half-max
    offset agree between branches up to saturation at the grid edges.
    """
    d = cfg.device
    L = cfg.network.L
    neurons = sample_population(L, cfg.subthreshold(), cfg.mismatch_config(),
                                systematic_vref(d.vref1, d.vref2, L), cfg.network.direction_policy)
    grid = np.linspace(d.char_v_lo, d.char_v_hi, d.char_points)
    p = cfg.subthreshold()
    curves = [characterize(nr, grid, p, respect_direction=True) for nr in neurons]
    return neurons, curves, population_stats(curves, bins=cfg.experiment.hist_bins)


def unimodality_pvalue(values):
    """Hartigan dip-test p-value; large values are consistent with one mode."""
    import diptest

    values = np.asarray(values, dtype=float)
    if values.size < 4 or np.ptp(values) == 0:
        return 1.0
    _, pval = diptest.diptest(values)
    return float(pval)
