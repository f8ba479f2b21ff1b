"""Config-driven Monte-Carlo NMSE-vs-SNR benchmark harness.

Determinism contract: every per-trial random object derives from
SeedSequence(master, size, snr, trial, stream). The channel, base network,
and noise streams exclude the phase-shifter ratio p, so runs with different
p (and every algorithm within a run) see identical (h, W, noise) triples --
paired comparisons. Aggregation uses exact summation in trial order, so
results are identical whether trials run serially or in a process pool, and
``results.csv`` is byte-identical across reruns with the same master seed.

Wall-clock timing is off by default (the walltime_ms column holds 0.0) to
keep that byte-determinism; enable with timing="wall" when profiling.
"""

import hashlib
import json
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines
from .augment import augment, build_difference_operator
from .core import ScampiOptions, SweepError, run_em_scampi, run_scampi
from .estimators import SparseGaussianPrior
from .lens_channel import LensConfig, sample_channel, uniform_angles
from .plotting import plot_nmse_svg
from .selection import build_hadamard_selection, measure, reduce_phase_shifters

log = logging.getLogger("scampi.bench")

CSV_HEADER = ("algorithm,size_m,size_n,q,snr_db,p,trials,"
              "nmse_mean,nmse_std,iters_mean,walltime_ms")

_STREAM_CHANNEL = 0
_STREAM_NET = 1
_STREAM_MASK = 2
_STREAM_NOISE = 3

_SNR_OFFSET = 10 ** 9  # SeedSequence entropy must be nonnegative

ALGORITHM_NAMES = ("uniform_scampi", "em_scampi", "fixed_scampi",
                   "sd", "ls", "omp")

_SCAMPI_OPTION_KEYS = {"t_max", "eps", "alpha_damp", "beta_damp", "omega",
                       "learn_noise", "pooled_noise", "fixed_delta",
                       "fixed_upsilon", "em_start"}
_ALGO_OPTION_KEYS = {
    "uniform_scampi": _SCAMPI_OPTION_KEYS,
    "em_scampi": _SCAMPI_OPTION_KEYS | {"lam0", "a0", "v0"},
    "fixed_scampi": _SCAMPI_OPTION_KEYS | {"lam", "a", "v"},
    "sd": {"square"},
    "ls": set(),
    "omp": {"k"},
}


def compute_nmse(h_est, h_true) -> float:
    """Per-trial ratio ||h_est - h||^2 / ||h||^2 (the harness averages)."""
    h_est = np.asarray(h_est, dtype=np.float64).reshape(-1)
    h_true = np.asarray(h_true, dtype=np.float64).reshape(-1)
    if h_est.size != h_true.size:
        raise ValueError(f"length mismatch: {h_est.size} vs {h_true.size}")
    denom = float(h_true @ h_true)
    if denom == 0.0:
        raise ValueError("true channel has zero norm")
    err = h_est - h_true
    return float(err @ err) / denom


@dataclass(frozen=True)
class AlgorithmSpec:
    """One algorithm entry of a config: display label, kind, and options."""

    name: str
    options: tuple = ()
    label: str = ""

    def __post_init__(self):
        if self.name not in ALGORITHM_NAMES:
            raise ValueError(f"unknown algorithm {self.name!r}; "
                             f"choose from {ALGORITHM_NAMES}")
        allowed = _ALGO_OPTION_KEYS[self.name]
        bad = [k for k, _ in self.options if k not in allowed]
        if bad:
            raise ValueError(f"algorithm {self.name!r} does not accept "
                             f"option(s) {bad}; allowed: {sorted(allowed)}")
        if not self.label:
            object.__setattr__(self, "label", self.name)

    @property
    def opts(self) -> dict:
        return dict(self.options)


def make_algorithm(name: str, label: str = "", **options) -> AlgorithmSpec:
    return AlgorithmSpec(name=name, label=label,
                         options=tuple(sorted(options.items())))


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    sizes: tuple
    snr_db: tuple
    algorithms: tuple
    trials: int = 100
    L: int = 3
    d_y_tilde: float = 12.0
    d_z_tilde: float = 12.0
    wavelength: float = 1.0
    q_rule: str = "half"
    p_values: tuple = (0.0,)
    beam_jitter: float = 0.15
    angles: str = "grid"
    seed: int = 0
    out_dir: str = "out"
    timing: str = "off"
    jobs: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.snr_db:
            raise ValueError("SNR grid must be nonempty")
        if not self.algorithms:
            raise ValueError("at least one algorithm is required")
        if self.timing not in ("off", "wall"):
            raise ValueError("timing must be 'off' or 'wall'")
        if self.angles not in ("grid", "uniform"):
            raise ValueError("angles must be 'grid' or 'uniform'")
        labels = [a.label for a in self.algorithms]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate algorithm labels: {labels}")
        for p in self.p_values:
            if not 0.0 <= p < 1.0:
                raise ValueError(f"p must be in [0, 1), got {p}")
        if self.seed < 0:
            raise ValueError("master seed must be nonnegative")
        _q_for(self.q_rule, 4)  # validates the rule string

    def q_for(self, M: int, N: int) -> int:
        return _q_for(self.q_rule, M * N)


def _q_for(rule: str, MN: int) -> int:
    if rule == "half":
        q = MN // 2
    elif rule == "full":
        q = MN
    else:
        try:
            frac = float(rule)
        except ValueError:
            raise ValueError(f"q_rule must be 'half', 'full', or a ratio, got {rule!r}")
        if not 0.0 < frac <= 1.0:
            raise ValueError(f"q_rule ratio must be in (0, 1], got {frac}")
        q = int(round(frac * MN))
    return max(1, q)


@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    size_m: int
    size_n: int
    q: int
    snr_db: float
    p: float
    trials: int
    nmse_mean: float
    nmse_std: float
    iters_mean: float
    walltime_ms: float

    @property
    def key(self):
        return (self.algorithm, self.size_m, self.size_n,
                self.q, self.snr_db, self.p)

    def to_csv_line(self) -> str:
        return ",".join([
            self.algorithm, str(self.size_m), str(self.size_n), str(self.q),
            repr(float(self.snr_db)), repr(float(self.p)), str(self.trials),
            repr(float(self.nmse_mean)), repr(float(self.nmse_std)),
            repr(float(self.iters_mean)), repr(float(self.walltime_ms)),
        ])


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def sorted_rows(self) -> list:
        return sorted(self.rows, key=lambda r: r.key)

    def get(self, algorithm, size_m, size_n, snr_db, p=0.0) -> ResultRow:
        for r in self.rows:
            if (r.algorithm == algorithm and r.size_m == size_m
                    and r.size_n == size_n and r.snr_db == snr_db and r.p == p):
                return r
        raise KeyError((algorithm, size_m, size_n, snr_db, p))

    def to_csv(self, path):
        lines = [CSV_HEADER] + [r.to_csv_line() for r in self.sorted_rows()]
        with open(path, "w", newline="") as f:
            f.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "ResultTable":
        with open(path, "r", newline="") as f:
            lines = [ln.rstrip("\n") for ln in f if ln.strip()]
        if not lines or lines[0] != CSV_HEADER:
            raise ValueError(f"unexpected results header in {path}")
        rows = []
        for ln in lines[1:]:
            parts = ln.split(",")
            rows.append(ResultRow(
                algorithm=parts[0], size_m=int(parts[1]), size_n=int(parts[2]),
                q=int(parts[3]), snr_db=float(parts[4]), p=float(parts[5]),
                trials=int(parts[6]), nmse_mean=float(parts[7]),
                nmse_std=float(parts[8]), iters_mean=float(parts[9]),
                walltime_ms=float(parts[10])))
        return cls(rows=rows)


# --------------------------------------------------------------------------
# per-trial execution
# --------------------------------------------------------------------------


def _seed_seq(master, M, N, snr_db, trial, stream, p=0.0):
    if snr_db is None or math.isinf(snr_db):
        snr_key = 2 * _SNR_OFFSET  # noiseless sentinel
    else:
        snr_key = int(round(snr_db * 1000)) + _SNR_OFFSET
    entropy = [int(master), int(M), int(N), snr_key, int(trial), int(stream)]
    if stream == _STREAM_MASK:
        entropy.append(int(round(p * 1e6)))
    return np.random.SeedSequence(entropy)


def _stream_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, np.uint64)[0])


def _scampi_options(name: str, options: dict) -> ScampiOptions:
    kw = {k: options[k] for k in _SCAMPI_OPTION_KEYS if k in options}
    if name == "uniform_scampi":
        return ScampiOptions(prior_kind="uniform", **kw)
    if name == "em_scampi":
        prior = None
        if any(k in options for k in ("lam0", "a0", "v0")):
            prior = SparseGaussianPrior(lam=float(options.get("lam0", 0.5)),
                                        a=float(options.get("a0", 0.0)),
                                        v=float(options.get("v0", 1.0)))
        return ScampiOptions(prior_kind="bernoulli_gaussian", prior=prior, **kw)
    if name == "fixed_scampi":
        for k in ("lam", "a", "v"):
            if k not in options:
                raise ValueError("fixed_scampi needs explicit lam, a, v options")
        prior = SparseGaussianPrior(lam=float(options["lam"]),
                                    a=float(options["a"]),
                                    v=float(options["v"]))
        return ScampiOptions(prior_kind="fixed_bg", prior=prior, **kw)
    raise ValueError(f"not a SCAMPI variant: {name}")


def build_instance(master, M, N, Q, L, d_y, d_z, wavelength, snr_db, p, trial,
                   beam_jitter=0.15, angles="grid"):
    """Deterministic (channel, network, measurement, difference op) draw.

    The channel, base network, and noise streams do not depend on p, so
    instances that differ only in p share everything except the switched-off
    entries.
    """
    cfg = LensConfig(M=M, N=N, D_y_tilde=d_y, D_z_tilde=d_z,
                     wavelength=wavelength, beam_jitter=beam_jitter)
    rng_chan = np.random.default_rng(
        _seed_seq(master, M, N, snr_db, trial, _STREAM_CHANNEL))
    chan = sample_channel(rng_chan, L, cfg,
                          angle_dist=uniform_angles if angles == "uniform"
                          else None)

    net_seed = _stream_int(_seed_seq(master, M, N, snr_db, trial, _STREAM_NET))
    net = build_hadamard_selection(Q, M * N, net_seed)
    if p > 0.0:
        mask_seed = _stream_int(
            _seed_seq(master, M, N, snr_db, trial, _STREAM_MASK, p))
        net = reduce_phase_shifters(net, p, mask_seed)

    rng_noise = np.random.default_rng(
        _seed_seq(master, M, N, snr_db, trial, _STREAM_NOISE))
    meas = measure(net, chan.h, snr_db, rng_noise)
    diff = build_difference_operator(M, N)
    return chan, net, meas, diff


def _run_trial(master, M, N, Q, L, d_y, d_z, wavelength,
               snr_db, p, trial, algs, timing,
               beam_jitter=0.15, angles="grid"):
    """One paired trial: shared (channel, network, noise) across algorithms.

    Returns a list of (label, nmse, iterations, wall_ms, error) tuples.
    """
    chan, net, meas, diff = build_instance(master, M, N, Q, L, d_y, d_z,
                                           wavelength, snr_db, p, trial,
                                           beam_jitter, angles)
    sys_aug = None

    out = []
    for label, name, opt_items in algs:
        options = dict(opt_items)
        t0 = time.perf_counter() if timing == "wall" else 0.0
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", baselines.RankDeficiencyWarning)
                if name in ("uniform_scampi", "em_scampi", "fixed_scampi"):
                    if sys_aug is None:
                        sys_aug = augment(net, diff, meas)
                    opts = _scampi_options(name, options)
                    runner = run_em_scampi if name == "em_scampi" else run_scampi
                    rep = runner(sys_aug, opts, truth=chan.h)
                    nmse, iters = rep.nmse, rep.iterations
                elif name == "sd":
                    rep = baselines.sd_estimate(meas, net, L,
                                                int(options.get("square", 8)),
                                                shape=(M, N), truth=chan.h)
                    nmse, iters = rep.nmse, rep.iterations
                elif name == "ls":
                    h_est = baselines.ls_estimate(meas, net)
                    nmse, iters = compute_nmse(h_est, chan.h), 1
                elif name == "omp":
                    rep = baselines.omp_estimate(meas, net,
                                                 int(options.get("k", 64)),
                                                 truth=chan.h)
                    nmse, iters = rep.nmse, rep.iterations
                else:
                    raise ValueError(f"unknown algorithm {name!r}")
        except (SweepError, np.linalg.LinAlgError, FloatingPointError) as exc:
            wall = (time.perf_counter() - t0) * 1e3 if timing == "wall" else 0.0
            out.append((label, math.nan, 0, wall, f"{type(exc).__name__}: {exc}"))
            continue
        wall = (time.perf_counter() - t0) * 1e3 if timing == "wall" else 0.0
        out.append((label, float(nmse), int(iters), wall, ""))
    return out


def _trial_worker(payload):
    return _run_trial(*payload)


# --------------------------------------------------------------------------
# experiment driver
# --------------------------------------------------------------------------


def config_fingerprint(cfg: ExperimentConfig) -> str:
    """Hash of everything that affects results.csv content (not placement)."""
    payload = {
        "name": cfg.name, "sizes": list(map(list, cfg.sizes)),
        "snr_db": list(cfg.snr_db), "trials": cfg.trials, "L": cfg.L,
        "d_y_tilde": cfg.d_y_tilde, "d_z_tilde": cfg.d_z_tilde,
        "wavelength": cfg.wavelength, "q_rule": cfg.q_rule,
        "p_values": list(cfg.p_values), "seed": cfg.seed, "timing": cfg.timing,
        "beam_jitter": cfg.beam_jitter, "angles": cfg.angles,
        "algorithms": [[a.label, a.name, list(map(list, a.options))]
                       for a in cfg.algorithms],
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _load_resume(out_dir: Path, fingerprint: str) -> dict:
    meta_path = out_dir / "run_meta.json"
    csv_path = out_dir / "results.csv"
    if not (meta_path.exists() and csv_path.exists()):
        return {}
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError:
        return {}
    if meta.get("fingerprint") != fingerprint:
        log.info("existing results do not match this config; recomputing")
        return {}
    try:
        table = ResultTable.from_csv(csv_path)
    except ValueError:
        return {}
    return {r.key: r for r in table.rows}


def _aggregate(label, M, N, Q, snr_db, p, per_trial, timing) -> ResultRow:
    """Exact-sum aggregation over the successful trials, in trial order."""
    good = [(n, i, w) for (n, i, w, err) in per_trial if not err]
    count = len(good)
    nmses = [g[0] for g in good]
    mean = math.fsum(nmses) / count
    std = (math.sqrt(math.fsum((x - mean) ** 2 for x in nmses) / (count - 1))
           if count > 1 else 0.0)
    iters_mean = math.fsum(g[1] for g in good) / count
    wall_mean = (math.fsum(g[2] for g in good) / count
                 if timing == "wall" else 0.0)
    return ResultRow(algorithm=label, size_m=M, size_n=N, q=Q,
                     snr_db=float(snr_db), p=float(p), trials=count,
                     nmse_mean=mean, nmse_std=std, iters_mean=iters_mean,
                     walltime_ms=wall_mean)


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    """Run all (size, p, SNR) points, write results.csv / plot / log.

    Points already present in a previous results.csv for the identical
    config and seed are reused, making interrupted runs resumable without
    changing the final bytes. A point whose per-algorithm failure rate
    exceeds 5% of trials aborts the run.
    """
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out_dir / "run.log")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    fingerprint = config_fingerprint(cfg)
    try:
        done = _load_resume(out_dir, fingerprint)
        if done:
            log.info("resuming: %d cached result rows", len(done))
        rows = []
        labels = [(a.label, a.name, a.options) for a in cfg.algorithms]
        for (M, N) in cfg.sizes:
            Q = cfg.q_for(M, N)
            for p in cfg.p_values:
                for snr_db in cfg.snr_db:
                    keys = [(lab, M, N, Q, float(snr_db), float(p))
                            for lab, _, _ in labels]
                    if all(k in done for k in keys):
                        rows.extend(done[k] for k in keys)
                        continue
                    log.info("point %dx%d Q=%d p=%g snr=%g dB (%d trials)",
                             M, N, Q, p, snr_db, cfg.trials)
                    payloads = [(cfg.seed, M, N, Q, cfg.L, cfg.d_y_tilde,
                                 cfg.d_z_tilde, cfg.wavelength, snr_db, p,
                                 trial, labels, cfg.timing,
                                 cfg.beam_jitter, cfg.angles)
                                for trial in range(cfg.trials)]
                    if cfg.jobs > 1:
                        from concurrent.futures import ProcessPoolExecutor
                        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
                            trial_results = list(ex.map(_trial_worker, payloads))
                    else:
                        trial_results = [_run_trial(*pl) for pl in payloads]
                    for k, (lab, _, _) in enumerate(labels):
                        per_trial = [tr[k][1:] for tr in trial_results]
                        failures = [(t, err) for t, (_, _, _, err)
                                    in enumerate(per_trial) if err]
                        for t, err in failures:
                            log.warning("trial %d failed for %s: %s", t, lab, err)
                        if len(failures) > 0.05 * cfg.trials:
                            raise RuntimeError(
                                f"{lab} failed {len(failures)}/{cfg.trials} trials "
                                f"at {M}x{N} p={p} snr={snr_db} dB "
                                f"(cap is 5%)")
                        rows.append(_aggregate(lab, M, N, Q, snr_db, p,
                                               per_trial, cfg.timing))
        table = ResultTable(rows=rows)
        table.to_csv(out_dir / "results.csv")
        plot_nmse_svg(table.sorted_rows(), out_dir / f"plot_{cfg.name}.svg",
                      title=cfg.name)
        (out_dir / "run_meta.json").write_text(json.dumps(
            {"fingerprint": fingerprint, "seed": cfg.seed}, indent=2) + "\n")
        log.info("wrote %s", out_dir / "results.csv")
        return table
    finally:
        log.removeHandler(handler)
        handler.close()


# --------------------------------------------------------------------------
# config files and bundled reproductions
# --------------------------------------------------------------------------


def _parse_scalar(text: str):
    text = text.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    return text


def _parse_values(text: str) -> tuple:
    """Comma list or inclusive start:step:stop range."""
    text = text.strip()
    if ":" in text:
        start_s, step_s, stop_s = text.split(":")
        start, step, stop = float(start_s), float(step_s), float(stop_s)
        if step <= 0:
            raise ValueError(f"range step must be positive in {text!r}")
        vals = []
        x = start
        while x <= stop + 1e-9:
            vals.append(round(x, 9))
            x += step
        return tuple(vals)
    return tuple(float(v) for v in text.split(","))


def _parse_sizes(text: str) -> tuple:
    sizes = []
    for part in text.split(","):
        m_s, _, n_s = part.strip().partition("x")
        sizes.append((int(m_s), int(n_s)))
    return tuple(sizes)


def _parse_algorithm(text: str) -> AlgorithmSpec:
    tokens = text.split()
    name = tokens[0]
    options = {}
    label = ""
    for tok in tokens[1:]:
        k, _, v = tok.partition("=")
        if not v:
            raise ValueError(f"algorithm option {tok!r} must be key=value")
        if k == "label":
            label = v
        else:
            options[k] = _parse_scalar(v)
    return make_algorithm(name, label=label, **options)


_CONFIG_KEYS = {"name", "sizes", "snr_db", "trials", "L", "d_y_tilde",
                "d_z_tilde", "wavelength", "q_rule", "p", "seed", "out",
                "timing", "jobs", "algorithm", "beam_jitter", "angles"}


def load_config(path) -> ExperimentConfig:
    """Parse the ``key = value`` config format (see configs/ for examples)."""
    kw = {"algorithms": []}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if not eq or not value:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            if key not in _CONFIG_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            if key == "algorithm":
                kw["algorithms"].append(_parse_algorithm(value))
            elif key == "sizes":
                kw["sizes"] = _parse_sizes(value)
            elif key == "snr_db":
                kw["snr_db"] = _parse_values(value)
            elif key == "p":
                kw["p_values"] = _parse_values(value)
            elif key == "out":
                kw["out_dir"] = value
            elif key in ("trials", "L", "seed", "jobs"):
                kw[key] = int(value)
            elif key in ("d_y_tilde", "d_z_tilde", "wavelength", "beam_jitter"):
                kw[key] = float(value)
            else:
                kw[key] = value
    kw["algorithms"] = tuple(kw["algorithms"])
    if "name" not in kw:
        kw["name"] = Path(path).stem
    return ExperimentConfig(**kw)


def bundled_config(which: str) -> ExperimentConfig:
    """Reproduction presets for the three benchmark figures.

    All SCAMPI variants run with pooled (block-scalar) noise learning: the
    noise model has one scalar per block anyway, and the pooled estimate is
    what keeps the EM variant out of its sparsity-collapse equilibrium.
    """
    snr = tuple(float(s) for s in range(-20, 31, 5))
    if which == "fig6":
        return ExperimentConfig(
            name="fig6", sizes=((32, 32), (64, 64)), snr_db=snr,
            algorithms=(make_algorithm("em_scampi", pooled_noise=True),
                        make_algorithm("sd", square=8)),
            out_dir="out_fig6")
    if which == "fig7":
        return ExperimentConfig(
            name="fig7", sizes=((32, 32), (64, 64)), snr_db=snr,
            algorithms=(make_algorithm("uniform_scampi", pooled_noise=True),
                        make_algorithm("em_scampi", pooled_noise=True)),
            out_dir="out_fig7")
    if which == "fig8":
        return ExperimentConfig(
            name="fig8", sizes=((32, 32),), snr_db=snr,
            p_values=(0.0, 0.1),
            algorithms=(make_algorithm("em_scampi", pooled_noise=True),),
            out_dir="out_fig8")
    raise ValueError(f"no bundled config named {which!r}")
