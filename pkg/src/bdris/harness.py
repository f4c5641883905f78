"""Monte Carlo experiment runners producing CSV tables.

Every trial is a pure function of ``(config, trial index)`` and draws its
randomness from substreams of ``config.seed``:

* ``(seed, t)`` for the channel realization of trial ``t``,
* ``(seed, t, 1)`` for uplink training noise,
* ``(seed, t, 2)`` for random baselines (patterns or surfaces).

The same substreams are reused across every grid point of a run (common
random numbers), so paired comparisons see identical channels and noise.
Results are reduced in trial order, which keeps output byte-identical
whether or not a worker pool is used.
"""

import io
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from functools import partial

import numpy as np

from . import beam_mimo, beam_mumiso
from .channel_model import (BdRisConfig, InvalidParameterError, PathLossParams,
                            cascade, db_to_linear, dbm_to_watt, draw_channels,
                            path_loss)
from .estimator import (UplinkSim, estimate_multisector, estimate_multiuser,
                        ls_estimate, power_for_snr, sensing_trace,
                        simulate_uplink)
from .pattern_builder import UnsupportedOrderError, make_plan

log = logging.getLogger(__name__)

SCENARIOS = ("mse_sweep", "mimo_rate", "mumiso_sumrate", "se_tradeoff")


class ConfigError(ValueError):
    """The experiment configuration is malformed or inconsistent."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a scenario, its parameter grid and Monte Carlo settings.

    Grid fields are tuples; ``P_d`` defaults to ``K * P_u``.  ``group_size``
    and ``tile_size`` combinations that do not divide ``M`` are skipped.
    """

    scenario: str = "mse_sweep"
    M: tuple = (8,)
    ML: tuple = (32,)
    group_size: tuple = (1, 2, 4)
    tile_size: tuple = (1,)
    sectors: tuple = (2, 4)
    N: int = 2
    K: int = 2
    Ns: int = 2
    kappa_db: float = 0.0
    d1: float = 30.0
    d2: float = 10.0
    eps1: float = 2.5
    eps2: float = 2.5
    freq: float = 2.4e9
    gain_t: float = 1.0
    gain_r: float = 1.0
    P_u: float = 0.25
    P_d: float = None
    noise_dbm: float = -100.0
    noise_dl_dbm: float = -100.0
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    T: tuple = (600, 1000, 2000)
    bases: tuple = ("dft", "hadamard", "random")
    csi: tuple = ("perfect", "estimated")
    system: str = "mimo"
    baseline: bool = True
    trials: int = 100
    seed: int = 0
    workers: int = 1
    out: str = None

    # derived quantities -------------------------------------------------
    @property
    def power_dl(self):
        return self.K * self.P_u if self.P_d is None else self.P_d

    @property
    def noise(self):
        return float(dbm_to_watt(self.noise_dbm))

    @property
    def noise_dl(self):
        return float(dbm_to_watt(self.noise_dl_dbm))

    @property
    def kappa(self):
        return float(db_to_linear(self.kappa_db))

    def pathloss(self, sectors=2):
        return PathLossParams(d1=self.d1, d2=self.d2, eps1=self.eps1, eps2=self.eps2,
                              freq=self.freq, gain_t=self.gain_t, gain_r=self.gain_r,
                              sectors=sectors)


_TUPLE_FIELDS = {f.name for f in fields(ExperimentConfig)
                 if isinstance(f.default, tuple)}
_INT_FIELDS = {"N", "K", "Ns", "trials", "seed", "workers"}

# desk-scale grids per scenario
SCENARIO_DEFAULTS = {
    "mse_sweep": dict(M=(8,), group_size=(1, 2, 4), tile_size=(2,), N=2, K=2, trials=2000),
    "mimo_rate": dict(M=(8, 16, 32), group_size=(1, 2, 4), tile_size=(1, 2, 4),
                      N=2, K=2, Ns=2, bases=("dft",), trials=200),
    "mumiso_sumrate": dict(ML=(16, 32), sectors=(2, 4), group_size=(1, 2), tile_size=(1,),
                           N=4, K=4, bases=("dft",), trials=100),
    "se_tradeoff": dict(M=(32,), group_size=(1, 2, 4), tile_size=(1, 2, 4, 8),
                        T=(600, 1000, 2000), N=2, K=2, Ns=2, bases=("dft",), trials=100),
}

# grids of the original study, enabled with --paper-scale
PAPER_SCALE = {
    "mse_sweep": dict(M=(32,), tile_size=(4,), trials=10000),
    "mimo_rate": dict(M=(16, 32, 64, 128), trials=500),
    "mumiso_sumrate": dict(ML=(32, 64, 128), group_size=(1, 2, 4), trials=200),
    "se_tradeoff": dict(M=(64,), ML=(128,), tile_size=(1, 2, 4, 8, 16), trials=200),
}


def _coerce(name, value):
    if name in _TUPLE_FIELDS:
        if not isinstance(value, (list, tuple)):
            value = [value]
        if not value:
            raise ConfigError(f"{name} must be a non-empty list")
        return tuple(value)
    if name in _INT_FIELDS:
        if isinstance(value, bool) or int(value) != value:
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return int(value)
    return value


def make_config(mapping=None, scenario=None, paper_scale=False, **overrides):
    """Build a validated :class:`ExperimentConfig`.

    Precedence, lowest first: built-in defaults, scenario defaults, full-size
    grids (``paper_scale``), ``mapping`` (e.g. a parsed config file), then
    keyword ``overrides`` whose value is not ``None``.
    """
    mapping = dict(mapping or {})
    scenario = scenario or mapping.get("scenario") or "mse_sweep"
    scenario = scenario.replace("-", "_")
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}")
    valid = {f.name for f in fields(ExperimentConfig)}
    unknown = set(mapping) - valid
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = dict(SCENARIO_DEFAULTS[scenario])
    if paper_scale:
        merged.update(PAPER_SCALE[scenario])
    merged.update(mapping)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    merged["scenario"] = scenario
    try:
        cfg = ExperimentConfig(**{k: _coerce(k, v) for k, v in merged.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    validate(cfg)
    return cfg


def validate(cfg):
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if min(cfg.N, cfg.K, cfg.Ns) < 1 or cfg.Ns > min(cfg.N, cfg.K):
        raise ConfigError("need N, K >= 1 and 1 <= Ns <= min(N, K)")
    if not cfg.P_u > 0 or not cfg.power_dl > 0:
        raise ConfigError("transmit powers must be positive")
    for b in cfg.bases:
        if b not in ("dft", "hadamard", "random"):
            raise ConfigError(f"unknown base kind {b!r}")
    for c in cfg.csi:
        if c not in ("perfect", "estimated"):
            raise ConfigError(f"unknown csi kind {c!r}")
    if cfg.system not in ("mimo", "mumiso"):
        raise ConfigError(f"unknown system {cfg.system!r}")
    if any(int(t) != t or t < 1 for t in cfg.T):
        raise ConfigError("frame lengths must be positive integers")
    try:
        cfg.pathloss()
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from exc
    if not grid_points(cfg):
        raise ConfigError("no (M, group_size, tile_size) combination divides consistently")


def load_config(path, scenario=None, paper_scale=False, **overrides):
    """Parse a TOML config file (flat ``key = value``, lists in brackets)."""
    try:
        import tomllib
    except ImportError:  # Python < 3.11
        import tomli as tomllib

    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"config must be flat; found tables {nested}")
    return make_config(data, scenario=scenario, paper_scale=paper_scale, **overrides)


# ---------------------------------------------------------------------------
# grids

def _sizes(cfg):
    if cfg.scenario == "mumiso_sumrate" or (cfg.scenario == "se_tradeoff"
                                           and cfg.system == "mumiso"):
        out = []
        for ml, L in itertools.product(cfg.ML, cfg.sectors):
            if ml % L == 0 and cfg.K % L == 0:
                out.append((ml, L, ml // L))
        return out
    return [(m, 1, m) for m in cfg.M]


def grid_points(cfg):
    """Valid ``(ML, L, M, group_size, tile_size)`` tuples in output order."""
    pts = []
    for ml, L, m in _sizes(cfg):
        for mb, gb in itertools.product(cfg.group_size, cfg.tile_size):
            try:
                BdRisConfig(M=m, group_size=mb, tile_size=gb, sectors=L, N=cfg.N, K=cfg.K)
            except InvalidParameterError:
                continue
            pts.append((ml, L, m, mb, gb))
    return pts


def _bd(cfg, m, mb, gb, L=1):
    return BdRisConfig(M=m, group_size=mb, tile_size=gb, sectors=L, N=cfg.N, K=cfg.K)


# ---------------------------------------------------------------------------
# CSV

@dataclass(frozen=True)
class Table:
    header: tuple
    rows: list

    def column(self, name):
        i = self.header.index(name)
        return [r[i] for r in self.rows]

    def where(self, **match):
        idx = {self.header.index(k): v for k, v in match.items()}
        return [dict(zip(self.header, r)) for r in self.rows
                if all(r[i] == v for i, v in idx.items())]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def format_csv(table):
    buf = io.StringIO()
    buf.write(",".join(table.header) + "\n")
    for row in table.rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_csv(table, path):
    with open(path, "w", newline="") as fh:
        fh.write(format_csv(table))


def _map(fn, cfg):
    items = range(cfg.trials)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            return list(ex.map(fn, items, chunksize=max(1, cfg.trials // (4 * cfg.workers))))
    return [fn(t) for t in items]


# ---------------------------------------------------------------------------
# MSE versus SNR

def _mse_trial(cfg, t):
    """Per grid point, base kind and SNR: ``(||q_hat - q||^2, analytic MSE, ||q||^2)``."""
    xi = path_loss(cfg.pathloss(2))
    out = {}
    chans = {m: draw_channels(_bd(cfg, m, 1, 1), cfg.pathloss(2), cfg.kappa, (cfg.seed, t))
             for m in cfg.M}
    for _, _, m, mb, gb in grid_points(cfg):
        bd = _bd(cfg, m, mb, gb)
        truth = cascade(chans[m], bd)
        q = truth.q
        qn = float(np.vdot(q, q).real)
        for kind in cfg.bases:
            plan = make_plan(kind, mb, bd.num_tiles, cfg.K,
                             seed=(cfg.seed, t, 2) if kind == "random" else None)
            trace = sensing_trace(plan, cfg.N) if kind == "random" else cfg.N * mb
            for snr in cfg.snr_db:
                pu = power_for_snr(float(db_to_linear(snr)), plan.T1, xi, cfg.noise)
                sim = UplinkSim(P_u=pu, noise_power=cfg.noise, plan=plan, truth=truth)
                y = simulate_uplink(sim, (cfg.seed, t, 1))
                est = ls_estimate(y, plan, cfg.N, pu,
                                  mode="codes" if kind == "random" else "fast")
                err = float(np.sum(np.abs(est.q_hat - q) ** 2))
                out[(m, mb, gb, kind, snr)] = (err, cfg.noise / pu * trace, qn, pu, plan.T1)
    return out


def run_mse_sweep(cfg):
    """Normalized MSE ``E{||q_hat - q||^2 / ||q||^2}`` versus training SNR.

    ``P_u`` is set per point from ``snr = P_u T1 / (xi sigma^2)``.  The
    theory column averages ``sigma^2/P_u tr((Phi_hat^H Phi_hat)^-1) / ||q||^2``
    over the same channel draws (the trace is ``N Mbar`` for the optimal plans).
    """
    res = _map(partial(_mse_trial, cfg), cfg)
    header = ("snr_db", "base_kind", "M", "group_size", "tile_size", "N", "K", "T1",
              "P_u", "trials", "seed", "normalized_mse_empirical", "normalized_mse_theory",
              "mse_empirical", "mse_theory")
    rows = []
    for key in res[0]:
        m, mb, gb, kind, snr = key
        vals = np.array([r[key] for r in res])
        err, theo, qn, pu, t1 = vals.T
        rows.append((float(snr), kind, m, mb, gb, cfg.N, cfg.K, int(t1[0]), float(pu[0]),
                     cfg.trials, cfg.seed, float(np.mean(err / qn)),
                     float(np.mean(theo / qn)), float(np.mean(err)), float(np.mean(theo))))
    rows.sort(key=lambda r: (r[3], r[4], r[2], r[1], r[0]))
    return Table(header, rows)


def _csi_columns(cfg):
    return [(c, j) for c, j in (("perfect", 0), ("estimated", 1)) if c in cfg.csi]


# ---------------------------------------------------------------------------
# point-to-point MIMO

def _mimo_point(cfg, ch, bd, t, with_random=False):
    casc = cascade(ch, bd)
    (q_hat,), t1 = estimate_multiuser(bd, ch, cfg.P_u, cfg.noise, (cfg.seed, t, 1),
                                      kind=cfg.bases[0], antennas=[cfg.K])
    args = (cfg.N, cfg.K, bd.group_size, cfg.Ns, cfg.power_dl, cfg.noise_dl)
    perfect = est = np.nan
    if "perfect" in cfg.csi:
        perfect = beam_mimo.design_mimo(casc.Q, *args).rate
    if "estimated" in cfg.csi:
        est = beam_mimo.design_mimo(q_hat, *args, Q_true=casc.Q).rate
    rand = None
    if with_random:
        rand = beam_mimo.random_design(q_hat, *args, seed=(cfg.seed, t, 2), Q_true=casc.Q).rate
    return perfect, est, rand, t1


def _mimo_trial(cfg, t, with_random=False):
    out = {}
    chans = {}
    for _, _, m, mb, gb in grid_points(cfg):
        if m not in chans:
            chans[m] = draw_channels(_bd(cfg, m, 1, 1), cfg.pathloss(2), cfg.kappa, (cfg.seed, t))
        out[(m, mb, gb)] = _mimo_point(cfg, chans[m], _bd(cfg, m, mb, gb), t, with_random)
    return out


def run_mimo_rate(cfg):
    """Mean achievable rate (no overhead factor) with perfect and estimated CSI."""
    res = _map(partial(_mimo_trial, cfg), cfg)
    header = ("M", "group_size", "tile_size", "csi", "N", "K", "Ns", "P_u", "P_d", "T1",
              "trials", "seed", "mean_rate")
    rows = []
    for key in res[0]:
        m, mb, gb = key
        vals = [r[key] for r in res]
        t1 = vals[0][3]
        for csi, j in _csi_columns(cfg):
            rows.append((m, mb, gb, csi, cfg.N, cfg.K, cfg.Ns, cfg.P_u, cfg.power_dl, t1,
                         cfg.trials, cfg.seed, float(np.mean([v[j] for v in vals]))))
    return Table(header, rows)


# ---------------------------------------------------------------------------
# multi-sector MU-MISO

def _mumiso_point(cfg, ch, bd, L, t):
    casc = cascade(ch, bd)
    q_true = np.stack([casc.user_block(k) for k in range(cfg.K)])
    sizes = [cfg.K // L] * L
    est, t1 = estimate_multisector(bd, ch, sizes, cfg.P_u, cfg.noise, (cfg.seed, t, 1),
                                   kind=cfg.bases[0])
    common = dict(sector_sizes=sizes, group_size=bd.group_size, P_d=cfg.power_dl,
                  noise_power=cfg.noise_dl)
    perfect = estimated = np.nan
    if "perfect" in cfg.csi:
        perfect = beam_mumiso.solve(
            beam_mumiso.MultiSectorScenario(Q=q_true, **common)).sum_rate
    if "estimated" in cfg.csi:
        estimated = beam_mumiso.solve(
            beam_mumiso.MultiSectorScenario(Q=np.stack(est), Q_true=q_true, **common)).sum_rate
    return perfect, estimated, t1


def _mumiso_trial(cfg, t):
    out = {}
    chans = {}
    for ml, L, m, mb, gb in grid_points(cfg):
        if (ml, L) not in chans:
            chans[(ml, L)] = draw_channels(_bd(cfg, m, 1, 1, L), cfg.pathloss(L), cfg.kappa,
                                           (cfg.seed, t))
        out[(ml, L, m, mb, gb)] = _mumiso_point(cfg, chans[(ml, L)], _bd(cfg, m, mb, gb, L), L, t)
    return out


def run_mumiso_sumrate(cfg):
    """Mean sum-rate of the FP design for each ``(ML, L, Mbar, Gbar)`` and CSI type."""
    res = _map(partial(_mumiso_trial, cfg), cfg)
    header = ("ML", "L", "M", "group_size", "tile_size", "csi", "N", "K", "P_u", "P_d", "T1",
              "trials", "seed", "mean_sumrate")
    rows = []
    for key in res[0]:
        ml, L, m, mb, gb = key
        vals = [r[key] for r in res]
        for csi, j in _csi_columns(cfg):
            rows.append((ml, L, m, mb, gb, csi, cfg.N, cfg.K, cfg.P_u, cfg.power_dl,
                         vals[0][2], cfg.trials, cfg.seed, float(np.mean([v[j] for v in vals]))))
    return Table(header, rows)


# ---------------------------------------------------------------------------
# overhead trade-off

_SE_HEADER = ("system", "scheme", "ML", "L", "M", "group_size", "tile_size", "T", "T1",
              "N", "K", "trials", "seed", "rate_mean", "se_mean", "feasible")


def _se_rows(cfg, key, scheme, rate_mean, t1):
    ml, L, m, mb, gb = key
    rows = []
    for T in cfg.T:
        feasible = T > t1
        s = (1.0 - t1 / T) * rate_mean if feasible else 0.0
        rows.append((cfg.system, scheme, ml, L, m, mb, gb, int(T), t1, cfg.N, cfg.K,
                     cfg.trials, cfg.seed, rate_mean, s, feasible))
    return rows


def _se_trial(cfg, t):
    cfg = replace(cfg, csi=("estimated",))
    if cfg.system == "mumiso":
        return {k: (v[1], None, v[2]) for k, v in _mumiso_trial(cfg, t).items()}
    res = _mimo_trial(cfg, t, with_random=cfg.baseline)
    return {(m, 1, m, mb, gb): (v[1], v[2], v[3]) for (m, mb, gb), v in res.items()}


def run_se_tradeoff(cfg):
    """Spectral efficiency ``(1 - T1/T) * rate`` over tile sizes and frame lengths.

    The estimated-CSI rate is computed once per ``(Mbar, Gbar)`` and scaled for
    each ``T``; points with ``T <= T1`` are emitted with ``se = 0`` and
    ``feasible = 0``.  With ``baseline`` set (MIMO only), random-surface rows
    from the same trials are included.
    """
    res = _map(partial(_se_trial, cfg), cfg)
    rows = []
    for key in res[0]:
        vals = [r[key] for r in res]
        t1 = vals[0][2]
        rows += _se_rows(cfg, key, "optimized", float(np.mean([v[0] for v in vals])), t1)
        if cfg.system == "mimo" and cfg.baseline:
            rows += _se_rows(cfg, key, "random", float(np.mean([v[1] for v in vals])), t1)
    return Table(_SE_HEADER, rows)


def random_bdris_baseline(cfg):
    """Random block-unitary surface with an SVD transceiver (MIMO), as SE rows.

    Channels are estimated with the proposed scheme; the random blocks are
    drawn per tile so that the estimated effective channel is defined.
    """
    cfg = replace(cfg, system="mimo", baseline=True)
    table = run_se_tradeoff(cfg)
    return Table(table.header, [r for r in table.rows if r[1] == "random"])


RUNNERS = {
    "mse_sweep": run_mse_sweep,
    "mimo_rate": run_mimo_rate,
    "mumiso_sumrate": run_mumiso_sumrate,
    "se_tradeoff": run_se_tradeoff,
}


def run(cfg):
    """Dispatch on ``cfg.scenario`` and return the resulting :class:`Table`."""
    return RUNNERS[cfg.scenario](cfg)


__all__ = ["ConfigError", "ExperimentConfig", "Table", "UnsupportedOrderError",
           "format_csv", "grid_points", "load_config", "make_config", "random_bdris_baseline",
           "run", "run_mimo_rate", "run_mse_sweep", "run_mumiso_sumrate", "run_se_tradeoff",
           "write_csv"]
