"""Experiment configuration, receiver dispatch and CSV emission."""

from __future__ import annotations

import dataclasses
import io
import math
from dataclasses import dataclass, fields
from typing import Iterable

import numpy as np

from . import __version__
from .adaptive import ON_OFF, PNRD, adaptive_error_exact, full_policy, hybrid_adaptive_error
from .bounds import helstrom_srm_error, sql_error
from .constellation import Constellation, constellation_for_mean_photon
from .montecarlo import (
    AdaptiveReceiver,
    HeterodyneReceiver,
    HybridAdaptiveReceiver,
    StagedReceiver,
    run_mc,
)
from .optimize import optimize_displacement, optimize_probing_order, optimize_transmittance
from .physics import DetectorModel, Splitter
from .staged import TYPE_I, TYPE_II, StagedReceiverConfig, hybrid_error, parse_order, validate_order

RECEIVERS = ("sql", "srm", "type1", "type2", "type1-od", "type2-od", "type3", "type4", "type5")
FIG4_RECEIVERS = RECEIVERS
RESULT_COLUMNS = ("ns", "alpha", "receiver", "p_error", "ci_low", "ci_high", "method")
OPT_COLUMNS = ("ns", "alpha", "receiver", "parameter", "argmin", "beta_sq", "p_error", "p_error_ref")
ORDER_COLUMNS = ("ns", "alpha", "rank", "order", "p_error")


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    receiver: str = "type1"
    L: int = 4
    ns: tuple[float, ...] = (2.0,)
    N: int = 10
    T: float = 0.5
    delta: float = 0.0
    eta: float = 1.0
    nu: float = 0.0
    order: tuple[int, ...] | None = None
    trials: int = 100_000
    seed: int = 0
    k_max: int = 10
    out: str | None = None

    def validate(self) -> "ExperimentConfig":
        if self.receiver not in RECEIVERS:
            raise ConfigError(f"unknown receiver kind {self.receiver!r}; choose from {', '.join(RECEIVERS)}")
        if not self.ns:
            raise ConfigError("photon-number grid is empty")
        if any(not (math.isfinite(x) and x >= 0) for x in self.ns):
            raise ConfigError(f"mean photon numbers must be finite and >= 0, got {self.ns}")
        checks = [
            (self.L >= 2, f"L must be >= 2, got {self.L}"),
            (self.N >= 1, f"N must be >= 1, got {self.N}"),
            (0.0 <= self.T <= 1.0, f"T must lie in [0, 1], got {self.T}"),
            (0.0 <= self.eta <= 1.0, f"eta must lie in [0, 1], got {self.eta}"),
            (self.nu >= 0.0, f"nu must be >= 0, got {self.nu}"),
            (math.isfinite(self.delta), f"delta must be finite, got {self.delta}"),
            (self.trials >= 1, f"trials must be >= 1, got {self.trials}"),
            (self.k_max >= 1, f"k_max must be >= 1, got {self.k_max}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        if self.order is not None:
            try:
                validate_order(self.order, self.L)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        return self

    @property
    def det(self) -> DetectorModel:
        return DetectorModel(self.eta, self.nu)

    def order_for(self, receiver: str) -> tuple[int, ...]:
        if self.order is not None:
            return self.order
        if self.L != 4:
            return tuple(range(self.L))
        return TYPE_II if receiver.startswith("type2") else TYPE_I


# -- config text ----------------------------------------------------------------
#
# One ``key = value`` per line; blank lines and ``#`` comments are ignored.
# ``ns`` is a comma-separated list, ``ns_grid`` is ``lo:hi:steps`` (inclusive,
# ``steps`` points), ``order`` is ``type1``, ``type2``, ``none`` or ``0,3,1,2``.


def parse_grid(text: str) -> tuple[float, ...]:
    try:
        lo, hi, steps = text.split(":")
        lo, hi, steps = float(lo), float(hi), int(float(steps))
    except ValueError:
        raise ConfigError(f"grid must look like lo:hi:steps, got {text!r}") from None
    if steps < 1 or (steps == 1 and lo != hi):
        raise ConfigError(f"grid needs at least one point, got {text!r}")
    return tuple(float(x) for x in np.linspace(lo, hi, steps))


def parse_ns_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise ConfigError(f"cannot parse photon-number list {text!r}") from None


def _parse_int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(text)
    return int(value)


def _convert(key: str, text: str):
    text = text.strip()
    try:
        if key in ("L", "N", "trials", "seed", "k_max"):
            return _parse_int(text)
        if key in ("T", "delta", "eta", "nu"):
            return float(text)
        if key == "ns":
            return parse_ns_list(text)
        if key == "order":
            return None if text.lower() in ("", "none", "default") else parse_order(text)
        if key == "out":
            return None if text.lower() in ("", "none", "-") else text
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None


_KEYS = {f.name for f in fields(ExperimentConfig)}


def parse_config_text(text: str) -> dict:
    """Parse config-file text into a dict of field overrides."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "ns_grid":
            values["ns"] = parse_grid(value)
        elif key in _KEYS:
            values[key] = _convert(key, value)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return values


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "ns":
            v = ",".join(_fmt(x) for x in v)
        elif f.name == "order":
            v = "none" if v is None else ",".join(str(k) for k in v)
        elif f.name == "out":
            v = "none" if v is None else v
        elif isinstance(v, float):
            v = _fmt(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines)


def make_config(base: dict | None = None, **overrides) -> ExperimentConfig:
    values = dict(base or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def read_config_header(text: str) -> ExperimentConfig:
    """Recover the configuration echoed in a CSV provenance header."""
    body = []
    inside = False
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        content = line[1:].strip()
        if content == "config:":
            inside = True
        elif content == "end config":
            inside = False
        elif inside:
            body.append(content)
    return ExperimentConfig(**parse_config_text("\n".join(body)))


# -- evaluation -----------------------------------------------------------------


@dataclass(frozen=True)
class ResultRow:
    ns: float
    alpha: float
    receiver: str
    p_error: float
    ci_low: float | None = None
    ci_high: float | None = None
    method: str = "analytic"


def _staged_cfg(cfg: ExperimentConfig, receiver: str, delta: float) -> StagedReceiverConfig:
    return StagedReceiverConfig(Splitter(cfg.T), cfg.N, cfg.order_for(receiver), delta, cfg.det)


def _od_delta(cfg: ExperimentConfig, receiver: str, ns: float) -> float:
    return optimize_displacement(ns, cfg.N, cfg.T, cfg.order_for(receiver), cfg.det, cfg.L).x


def evaluate_exact(receiver: str, ns: float, cfg: ExperimentConfig) -> ResultRow:
    """Closed-form or enumeration value of one receiver at one photon number."""
    c = constellation_for_mean_photon(cfg.L, ns)
    if receiver == "sql":
        return ResultRow(ns, c.alpha, receiver, sql_error(c))
    if receiver == "srm":
        return ResultRow(ns, c.alpha, receiver, helstrom_srm_error(c))
    if receiver in ("type1", "type2"):
        p = hybrid_error(_staged_cfg(cfg, receiver, cfg.delta), c)
        method = "analytic" if c.L == 4 and cfg.delta == 0.0 else "enumeration"
        return ResultRow(ns, c.alpha, receiver, p, method=method)
    if receiver in ("type1-od", "type2-od"):
        res = optimize_displacement(ns, cfg.N, cfg.T, cfg.order_for(receiver), cfg.det, cfg.L)
        return ResultRow(ns, c.alpha, receiver, res.fun, method="enumeration")
    if receiver == "type3":
        p = hybrid_adaptive_error(Splitter(cfg.T), cfg.N, cfg.det, ON_OFF, c)
        return ResultRow(ns, c.alpha, receiver, p, method="enumeration")
    if receiver == "type4":
        p = adaptive_error_exact(full_policy(c, cfg.N, cfg.det, ON_OFF))
        return ResultRow(ns, c.alpha, receiver, p, method="enumeration")
    raise ConfigError(f"receiver {receiver!r} has no exact evaluator; use 'qrx mc'")


def mc_receiver(receiver: str, ns: float, c: Constellation, cfg: ExperimentConfig):
    if receiver == "sql":
        return HeterodyneReceiver(c)
    if receiver in ("type1", "type2"):
        return StagedReceiver(_staged_cfg(cfg, receiver, cfg.delta), c)
    if receiver in ("type1-od", "type2-od"):
        return StagedReceiver(_staged_cfg(cfg, receiver, _od_delta(cfg, receiver, ns)), c)
    if receiver == "type3":
        return HybridAdaptiveReceiver(Splitter(cfg.T), cfg.N, cfg.det, ON_OFF, c, cfg.k_max)
    if receiver == "type4":
        return AdaptiveReceiver(full_policy(c, cfg.N, cfg.det, ON_OFF, cfg.k_max))
    if receiver == "type5":
        return AdaptiveReceiver(full_policy(c, cfg.N, cfg.det, PNRD, cfg.k_max))
    raise ConfigError(f"receiver {receiver!r} cannot be simulated by Monte Carlo")


def evaluate_mc(receiver: str, ns: float, cfg: ExperimentConfig, threads: int | None = None) -> ResultRow:
    c = constellation_for_mean_photon(cfg.L, ns)
    stats = run_mc(mc_receiver(receiver, ns, c, cfg), c, cfg.trials, cfg.seed, threads=threads)
    return ResultRow(ns, c.alpha, receiver, stats.p_hat, stats.ci_low, stats.ci_high, "mc")


def evaluate(receiver: str, ns: float, cfg: ExperimentConfig, threads: int | None = None) -> ResultRow:
    """Exact value where one exists, Monte Carlo otherwise (Type V)."""
    if receiver == "type5":
        return evaluate_mc(receiver, ns, cfg, threads)
    return evaluate_exact(receiver, ns, cfg)


def run_analytic(cfg: ExperimentConfig) -> list[ResultRow]:
    return [evaluate_exact(cfg.receiver, ns, cfg) for ns in cfg.ns]


def run_bounds(cfg: ExperimentConfig) -> list[ResultRow]:
    return [evaluate_exact(r, ns, cfg) for r in ("sql", "srm") for ns in cfg.ns]


def run_mc_sweep(cfg: ExperimentConfig, threads: int | None = None) -> list[ResultRow]:
    return [evaluate_mc(cfg.receiver, ns, cfg, threads) for ns in cfg.ns]


def run_fig4(cfg: ExperimentConfig, threads: int | None = None) -> list[ResultRow]:
    if cfg.L != 4:
        raise ConfigError("figure fig4 is defined for 16-QAM (L = 4)")
    return [evaluate(r, ns, cfg, threads) for r in FIG4_RECEIVERS for ns in cfg.ns]


@dataclass(frozen=True)
class OptRow:
    ns: float
    alpha: float
    receiver: str
    parameter: str
    argmin: float
    beta_sq: float | None
    p_error: float
    p_error_ref: float


def run_optimize_T(cfg: ExperimentConfig, receivers: Iterable[str] = ("type1",)) -> list[OptRow]:
    rows = []
    for receiver in receivers:
        for ns in cfg.ns:
            c = constellation_for_mean_photon(cfg.L, ns)
            res = optimize_transmittance(ns, cfg.N, cfg.order_for(receiver), cfg.det, cfg.delta, cfg.L)
            ref = hybrid_error(StagedReceiverConfig(Splitter(0.5), cfg.N, cfg.order_for(receiver),
                                                    cfg.delta, cfg.det), c)
            rows.append(OptRow(ns, c.alpha, receiver, "T", res.x, None, res.fun, ref))
    return rows


def run_optimize_delta(cfg: ExperimentConfig, receivers: Iterable[str] = ("type1",)) -> list[OptRow]:
    rows = []
    for receiver in receivers:
        for ns in cfg.ns:
            c = constellation_for_mean_photon(cfg.L, ns)
            res = optimize_displacement(ns, cfg.N, cfg.T, cfg.order_for(receiver), cfg.det, cfg.L)
            ref = hybrid_error(_staged_cfg(cfg, receiver, 0.0), c)
            rows.append(OptRow(ns, c.alpha, receiver, "delta", res.x, res.beta_sq, res.fun, ref))
    return rows


def run_optimize_order(cfg: ExperimentConfig) -> list[tuple]:
    rows = []
    for ns in cfg.ns:
        c = constellation_for_mean_photon(cfg.L, ns)
        ranking = optimize_probing_order(ns, cfg.N, cfg.T, cfg.det, cfg.L).ranking
        for rank, (order, err) in enumerate(ranking, 1):
            rows.append((ns, c.alpha, rank, "-".join(map(str, order)), err))
    return rows


# -- CSV ------------------------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return _fmt(v)
    return str(v)


def render_csv(command: str, cfg: ExperimentConfig, columns, rows) -> str:
    """CSV text with a ``#`` provenance header echoing the full configuration."""
    buf = io.StringIO()
    buf.write(f"# qrx {__version__}\n")
    buf.write(f"# command: {command}\n")
    buf.write(f"# seed: {cfg.seed}\n")
    buf.write("# config:\n")
    for line in format_config(cfg).splitlines():
        buf.write(f"#   {line}\n")
    buf.write("# end config\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        values = dataclasses.astuple(row) if dataclasses.is_dataclass(row) else tuple(row)
        buf.write(",".join(_cell(v) for v in values) + "\n")
    return buf.getvalue()
