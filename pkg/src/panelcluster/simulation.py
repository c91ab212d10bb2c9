"""Monte-Carlo data generators and the batch experiment driver.

Randomness comes from numpy's Philox counter-based 64-bit generator.
Per-repetition streams are split from the master seed by
seed_r = splitmix64(master XOR (r * 0x9E3779B97F4A7C15)), so repetitions
are independent and reproducible regardless of execution order. Gaussians
use numpy's ziggurat sampler; t(3) draws are a standard normal divided by
sqrt(chi-square(3) / 3).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .logistic import fit_logistic, logistic_covariance
from .metrics import average_match
from .quantile import (
    fit_pooled_quantile,
    fit_quantile_bundle,
    hall_sheather_bandwidth,
    hk_covariance,
    intercept_variance,
)
from .spectral import build_dissimilarity, kmeans, select_num_groups, spectral_cluster
from .types import (
    ALREADY_SCALED,
    DegenerateOutcome,
    NonConvergence,
    PanelDataset,
    PerfectSeparation,
    UncertaintyEstimate,
)

_GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1

MODEL_GROUPS = {
    "logistic": 3,
    "model1": 3,
    "model2": 4,
    "model3": 3,
    "model4": 3,
}

METHODS = ("spectral", "spectral_identity", "kmeans_raw")

_BETAS = {
    "logistic": np.array([[-4.0, 1.0], [0.0, 1.0], [4.0, 1.0]]),
    "model1": np.array([[0.1, 0.1], [0.2, 0.2], [0.3, 0.3]]),
    "model2": np.array([[0.1, 0.1], [0.2, 0.2], [3.0, 3.0], [3.1, 3.1]]),
    "model4": np.array([[-5.0, 1.0], [0.0, 1.0], [3.0, 1.0]]),
}


def splitmix64(x: int) -> int:
    """One step of the splitmix64 mixing function."""
    x = (x + _GOLDEN) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return (x ^ (x >> 31)) & _MASK


def derive_seed(master: int, rep: int) -> int:
    """Seed of repetition `rep` split from the master seed."""
    return splitmix64((master ^ (rep * _GOLDEN)) & _MASK)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed & _MASK))


def _draw_errors(rng, size, error_dist):
    if error_dist == "normal":
        return rng.standard_normal(size)
    if error_dist == "t3":
        return rng.standard_normal(size) / np.sqrt(rng.chisquare(3, size) / 3.0)
    raise ValueError(f"unknown error distribution {error_dist!r}")


def _draw_logistic_individual(rng, T):
    group = int(rng.integers(1, 4))
    alpha = 1.0
    eta = rng.standard_normal()
    x1 = 0.5 * alpha + eta + 2.0 * rng.standard_normal(T)
    x2 = 0.5 * alpha + eta + 0.2 * rng.standard_normal(T)
    beta = _BETAS["logistic"][group - 1]
    eps = rng.logistic(size=T)
    y = (alpha + x1 * beta[0] + x2 * beta[1] >= eps).astype(float)
    return np.column_stack([x1, x2]), y, group


def gen_logistic(n, T, seed):
    """Binary panel with three slope groups and a shared individual effect."""
    rng = make_rng(seed)
    covs = np.empty((n, T, 2))
    ys = np.empty((n, T))
    truth = np.empty(n, dtype=int)
    for i in range(n):
        covs[i], ys[i], truth[i] = _draw_logistic_individual(rng, T)
    return PanelDataset(covs, ys, "binary"), truth


def _gen_slope_model(model, n, T, error_dist, seed):
    rng = make_rng(seed)
    betas = _BETAS[model]
    covs = np.empty((n, T, 2))
    ys = np.empty((n, T))
    truth = np.empty(n, dtype=int)
    for i in range(n):
        if model == "model1":
            alpha = rng.uniform()
            group = int(rng.integers(1, 4))
            x1 = 0.3 * alpha + rng.standard_normal(T)
            x2 = rng.uniform(size=T)
            noise = 0.5 * x2 * _draw_errors(rng, T, error_dist)
        elif model == "model2":
            alpha = 1.0
            group = int(rng.integers(1, 5))
            x1 = 0.3 * alpha + rng.standard_normal(T)
            x2 = rng.uniform(size=T)
            noise = 0.5 * x2 * _draw_errors(rng, T, error_dist)
        elif model == "model4":
            alpha = 1.0
            group = i % 3 + 1  # exactly n/3 per group
            eta = rng.standard_normal()
            x1 = 0.5 * alpha + eta + rng.standard_normal(T)
            x2 = 0.5 * alpha + eta + np.sqrt(0.05) * rng.standard_normal(T)
            noise = _draw_errors(rng, T, error_dist)
        else:
            raise ValueError(f"unknown slope model {model!r}")
        beta = betas[group - 1]
        covs[i] = np.column_stack([x1, x2])
        ys[i] = alpha + x1 * beta[0] + x2 * beta[1] + noise
        truth[i] = group
    return PanelDataset(covs, ys, "continuous"), truth


def gen_model1(n, T, error_dist, seed):
    """Three slope groups 0.1/0.2/0.3 with heteroskedastic noise."""
    return _gen_slope_model("model1", n, T, error_dist, seed)


def gen_model2(n, T, error_dist, seed):
    """Four slope groups with two nearly coincident pairs of centres."""
    return _gen_slope_model("model2", n, T, error_dist, seed)


def gen_model4(n, T, error_dist, seed):
    """Three asymmetric slope groups with exactly n/3 members each."""
    if n % 3 != 0:
        raise ValueError("model4 requires n divisible by 3")
    return _gen_slope_model("model4", n, T, error_dist, seed)


def gen_model3(n, T, error_dist, seed):
    """Location-scale shift model grouped on the intercepts 1/2/3."""
    if n % 3 != 0:
        raise ValueError("model3 requires n divisible by 3")
    rng = make_rng(seed)
    covs = np.empty((n, T, 1))
    ys = np.empty((n, T))
    truth = np.empty(n, dtype=int)
    beta, slope_gamma = 1.0, 0.1
    for i in range(n):
        group = i % 3 + 1
        alpha = float(group)
        x = rng.standard_normal() + rng.standard_normal(T)
        e = _draw_errors(rng, T, error_dist)
        covs[i, :, 0] = x
        ys[i] = alpha + x * beta + (1.0 + slope_gamma * x) * e
        truth[i] = group
    return PanelDataset(covs, ys, "continuous"), truth


@dataclass
class SimulationConfig:
    """Configuration of one Monte-Carlo batch."""

    model: str
    n: int
    T: int
    reps: int
    seed: int = 0
    tau: float = 0.5
    error_dist: str = "normal"
    restarts: int = 50
    G_max: int = 10
    methods: tuple = ("spectral",)
    select_groups: bool = False
    cluster_at_true_g: bool = True

    def __post_init__(self):
        if self.model not in MODEL_GROUPS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.model in ("model3", "model4") and self.n % 3 != 0:
            raise ValueError(f"{self.model} requires n divisible by 3")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if self.error_dist not in ("normal", "t3"):
            raise ValueError(f"unknown error_dist {self.error_dist!r}")
        self.methods = tuple(self.methods)
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")

    @property
    def true_groups(self) -> int:
        return MODEL_GROUPS[self.model]


@dataclass
class RepResult:
    """Outcome of one simulation repetition."""

    rep: int
    seed: int
    truth: np.ndarray
    labels: dict  # method -> estimated labels
    scores: dict  # method -> MatchScore
    G_hat: int | None = None
    dropped: int = 0


@dataclass
class SimulationResult:
    """Per-repetition records plus table-style aggregates."""

    config: SimulationConfig
    reps: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)


def _fit_logistic_rep(config, rng):
    """Draw and fit n individuals, resampling on degenerate outcomes or
    perfect separation so the sample size is preserved."""
    n, T = config.n, config.T
    betas, uncs, truth = [], [], []
    dropped = 0
    budget = 100 * n
    while len(betas) < n:
        x, y, group = _draw_logistic_individual(rng, T)
        X = np.column_stack([np.ones(T), x])
        try:
            est = fit_logistic(X, y)
            unc = logistic_covariance(X, est, slopes_only=True)
        except (DegenerateOutcome, PerfectSeparation):
            dropped += 1
            if dropped > budget:
                raise NonConvergence(
                    "resampling budget exhausted for logistic repetition")
            continue
        betas.append(est.slopes)
        uncs.append(UncertaintyEstimate(len(betas) - 1, unc.sigma))
        truth.append(group)
    return np.array(betas), uncs, np.array(truth), dropped


def _fit_slope_rep(config, rng):
    gen = {"model1": gen_model1, "model2": gen_model2, "model4": gen_model4}
    seed = int(rng.integers(0, _MASK, dtype=np.uint64))
    panel, truth = gen[config.model](config.n, config.T, config.error_dist,
                                     seed)
    d_T = hall_sheather_bandwidth(config.T, config.tau)
    betas, uncs = [], []
    for i in range(panel.n):
        X = panel.design(i)
        bundle = fit_quantile_bundle(X, panel.responses[i], config.tau,
                                     d_T=d_T, individual=i)
        unc = hk_covariance(bundle, X, slopes_only=True)
        betas.append(bundle.center.slopes)
        uncs.append(unc)
    return np.array(betas), uncs, truth, 0


def _fit_pooled_rep(config, rng):
    seed = int(rng.integers(0, _MASK, dtype=np.uint64))
    panel, truth = gen_model3(config.n, config.T, config.error_dist, seed)
    d_T = hall_sheather_bandwidth(config.T, config.tau)
    y, x = panel.responses, panel.covariates
    center = fit_pooled_quantile(y, x, config.tau)
    upper = fit_pooled_quantile(y, x, config.tau + d_T)
    lower = fit_pooled_quantile(y, x, config.tau - d_T)
    betas = center.alphas[:, None]
    uncs = [intercept_variance(upper.alphas[i], lower.alphas[i], config.tau,
                               d_T, individual=i) for i in range(panel.n)]
    return betas, uncs, truth, 0


def _identity_uncertainties(n, s):
    # combined pairwise covariance is exactly the identity
    return [UncertaintyEstimate(i, 0.5 * np.eye(s), scale=ALREADY_SCALED)
            for i in range(n)]


def run_rep(config: SimulationConfig, rep: int) -> RepResult:
    """Run a single repetition: generate, fit, cluster, score."""
    seed = derive_seed(config.seed, rep)
    rng = make_rng(seed)
    if config.model == "logistic":
        betas, uncs, truth, dropped = _fit_logistic_rep(config, rng)
    elif config.model == "model3":
        betas, uncs, truth, dropped = _fit_pooled_rep(config, rng)
    else:
        betas, uncs, truth, dropped = _fit_slope_rep(config, rng)

    V = build_dissimilarity(betas, uncs, config.T)
    cluster_seed = derive_seed(seed, 1)
    labels, scores = {}, {}
    G = config.true_groups
    if config.cluster_at_true_g:
        for method in config.methods:
            if method == "spectral":
                assignment, _ = spectral_cluster(V, G, seed=cluster_seed,
                                                 restarts=config.restarts)
                est = assignment.labels
            elif method == "spectral_identity":
                V0 = build_dissimilarity(
                    betas, _identity_uncertainties(len(betas), betas.shape[1]),
                    config.T)
                assignment, _ = spectral_cluster(V0, G, seed=cluster_seed,
                                                 restarts=config.restarts)
                est = assignment.labels
            else:  # kmeans_raw
                raw_labels, _, _ = kmeans(betas, G, restarts=config.restarts,
                                          seed=cluster_seed)
                est = raw_labels + 1
            labels[method] = est
            scores[method] = average_match(truth, est)

    G_hat = None
    if config.select_groups:
        G_hat = select_num_groups(V, config.n, config.T, config.G_max).G_hat
    return RepResult(rep, seed, truth, labels, scores, G_hat, dropped)


def run_batch(config: SimulationConfig) -> SimulationResult:
    """Run all repetitions and aggregate table-style summaries."""
    result = SimulationResult(config)
    for rep in range(config.reps):
        result.reps.append(run_rep(config, rep))
    result.aggregates = aggregate(config, result.reps)
    return result


def aggregate(config: SimulationConfig, reps) -> dict:
    out = {"reps": len(reps), "dropped_total": sum(r.dropped for r in reps)}
    if config.cluster_at_true_g:
        for method in config.methods:
            scores = [r.scores[method] for r in reps]
            out[method] = {
                "perfect_match": float(sum(s.perfect for s in scores)) / len(reps),
                "average_match": float(sum(s.average for s in scores)) / len(reps),
            }
    if config.select_groups:
        table = {"1": 0, "2": 0, "3": 0, "4": 0, "5+": 0}
        for r in reps:
            key = str(r.G_hat) if r.G_hat <= 4 else "5+"
            table[key] += 1
        out["group_count_table"] = {k: v / len(reps) for k, v in table.items()}
    return out
