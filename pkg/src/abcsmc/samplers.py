"""Likelihood-free samplers: rejection, MCMC, sequential population refinement
and its model-selection variant, plus the equal-weight baseline.

All population samplers share one batch engine: proposals are generated and
simulated in deterministic batches (one RNG stream per (seed, population,
batch counter)), evaluated possibly in parallel worker threads, and committed
in batch order.  Output is therefore byte-reproducible for a given
(seed, workers, config) and independent of thread scheduling.  Simulation
counts mirror the sequential algorithm exactly: within the batch containing
the final acceptance, rows after it are discarded uncounted.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    ConfigError,
    InferenceConfig,
    KernelSpec,
    Particle,
    Population,
    PriorSpec,
    normalize_weights,
    task_rng,
)
from .distance import Dataset, distance_fn
from .simulate import simulate_model_batch

_BATCH_BASE = {"ode": 8192, "direct": 8192, "dde": 2048, "ssa": 64}


class BudgetExceeded(RuntimeError):
    """Proposal budget (or acceptance floor) hit; partial results attached."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


def observed_columns(dataset: Dataset, model) -> list[int]:
    """Model state columns matching the dataset's observed species, by name."""
    index = {s: i for i, s in enumerate(model.species)}
    cols = []
    for s in dataset.observed_species:
        if s not in index:
            raise ConfigError(f"dataset species '{s}' not produced by model '{model.name}'")
        cols.append(index[s])
    return cols


@dataclass(frozen=True)
class AcceptanceTest:
    """Distance test at one tolerance.

    With sim_trials > 1 a proposal is scored by the number of its candidate
    datasets within tolerance (acceptance requires at least one hit); each
    candidate dataset is itself an average over `replicates` runs.
    """

    dataset: Dataset
    distance: str
    epsilon: float
    sim_trials: int = 1
    replicates: int = 1

    @property
    def sims_per_proposal(self) -> int:
        return self.sim_trials * self.replicates

    def evaluate_batch(self, model, thetas: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
        """Returns (hits (B,), best distance (B,)) for a proposal batch."""
        obs = self.dataset.observed_values()
        cols = observed_columns(self.dataset, model)
        dist = distance_fn(self.distance)
        B = thetas.shape[0]
        hits = np.zeros(B, dtype=int)
        best = np.full(B, np.inf)
        times = self.dataset.times
        for _ in range(self.sim_trials):
            if self.replicates == 1:
                states, ok = simulate_model_batch(model, thetas, times, rng)
            else:
                states = None
                ok = np.ones(B, dtype=bool)
                for _ in range(self.replicates):
                    s, o = simulate_model_batch(model, thetas, times, rng)
                    states = s if states is None else states + s
                    ok &= o
                states = states / self.replicates
            with np.errstate(all="ignore"):
                d = dist(obs, states[:, :, cols])
            d = np.where(ok & np.isfinite(d), d, np.inf)
            hits += (d <= self.epsilon).astype(int)
            best = np.minimum(best, d)
        return hits, best


@dataclass
class SmcResult:
    """One population per tolerance level, with cumulative simulation ledger."""

    populations: list[Population]

    @property
    def final_population(self) -> Population:
        return self.populations[-1]


@dataclass
class ModelSelectionResult:
    populations: list[Population]
    n_models: int

    @property
    def final_population(self) -> Population:
        return self.populations[-1]

    def model_counts(self) -> list[np.ndarray]:
        """Marginal model posterior counts, one length-M vector per population."""
        return [p.model_counts(self.n_models) for p in self.populations]


# ---------------------------------------------------------------------------
# Batch proposal engine
# ---------------------------------------------------------------------------

@dataclass
class _Batch:
    model_of_row: np.ndarray  # (B,) 1-based labels
    prior_ok: np.ndarray  # (B,)
    hits: np.ndarray  # (B,)
    best: np.ndarray  # (B,)
    group_thetas: dict  # label -> (n_m, k_m) thetas in group order
    group_pos: np.ndarray  # (B,) position of the row inside its model group


def _propose_and_test(cfg: InferenceConfig, test: AcceptanceTest, t: int,
                      batch_index: int, size: int, surviving: list[int],
                      prev_by_model: Optional[dict]) -> _Batch:
    rng = task_rng(cfg.seed, t, batch_index)
    M = cfg.n_models
    if M == 1:
        model_of_row = np.ones(size, dtype=int)
    else:
        model_of_row = rng.choice(np.asarray(surviving, dtype=int), size=size)
    prior_ok = np.zeros(size, dtype=bool)
    hits = np.zeros(size, dtype=int)
    best = np.full(size, np.inf)
    group_thetas: dict[int, np.ndarray] = {}
    group_pos = np.zeros(size, dtype=int)
    for label in sorted(surviving):
        rows = np.nonzero(model_of_row == label)[0]
        if rows.size == 0:
            group_thetas[label] = np.empty((0, cfg.models[label - 1].n_params))
            continue
        prior = cfg.priors[label - 1]
        kernel = cfg.kernels[label - 1]
        if prev_by_model is None:
            thetas = prior.sample(rng, size=rows.size)
        else:
            parents, weights = prev_by_model[label]
            idx = rng.choice(parents.shape[0], size=rows.size, p=weights)
            thetas = kernel.perturb_many(parents[idx], rng)
        dens = prior.density_many(thetas)
        ok = dens > 0.0
        h = np.zeros(rows.size, dtype=int)
        b = np.full(rows.size, np.inf)
        if ok.any():
            h_ok, b_ok = test.evaluate_batch(cfg.models[label - 1], thetas[ok], rng)
            h[ok] = h_ok
            b[ok] = b_ok
        prior_ok[rows] = ok
        hits[rows] = h
        best[rows] = b
        group_thetas[label] = thetas
        group_pos[rows] = np.arange(rows.size)
    return _Batch(model_of_row, prior_ok, hits, best, group_thetas, group_pos)


def _collect_population(cfg: InferenceConfig, test: AcceptanceTest, t: int,
                        surviving: list[int], prev_by_model: Optional[dict],
                        budget: int, partial_factory,
                        prev_rate: Optional[float] = None) -> tuple[list, int, int]:
    """Accept cfg.n_particles proposals at test.epsilon.

    Returns (accepted rows [(theta, label, hits, best)], proposals, sims).
    Proposal order is deterministic and counting stops at the final
    acceptance exactly as a one-at-a-time sampler would.  The batch size is
    fixed for the whole population (sized from the previous population's
    acceptance rate), so the committed output is identical for any worker
    count; rows simulated past the final acceptance are discarded uncounted.
    """
    N = cfg.n_particles
    base = cfg.batch_size or min(_BATCH_BASE[m.kind] for m in cfg.models)
    sims_per = test.sims_per_proposal
    accepted: list = []
    proposals = 0
    sims = 0
    batch_counter = 0
    if prev_rate:
        size = int(min(base, max(256, math.ceil(1.5 * N / prev_rate))))
    else:
        size = int(min(base, max(256, 2 * N)))
    while len(accepted) < N:
        wave = [(batch_counter + i, size) for i in range(cfg.workers)]
        batch_counter += len(wave)

        def run(task):
            idx, sz = task
            return _propose_and_test(cfg, test, t, idx, sz, surviving, prev_by_model)

        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
                results = list(ex.map(run, wave))
        else:
            results = [run(w) for w in wave]

        for batch in results:
            if len(accepted) >= N:
                break
            need = N - len(accepted)
            accept_row = batch.prior_ok & (batch.hits > 0)
            cum = np.cumsum(accept_row)
            if cum[-1] >= need:
                cut = int(np.searchsorted(cum, need))  # index of the final acceptance
            else:
                cut = len(accept_row) - 1
            if proposals + cut + 1 > budget:
                cut = budget - proposals - 1
                if cut < 0:
                    raise BudgetExceeded(
                        f"proposal budget {budget} exceeded in population {t}",
                        partial=partial_factory(accepted, proposals, sims),
                    )
            proposals += cut + 1
            sims += int(batch.prior_ok[: cut + 1].sum()) * sims_per
            for i in np.nonzero(accept_row[: cut + 1])[0]:
                label = int(batch.model_of_row[i])
                theta = batch.group_thetas[label][batch.group_pos[i]]
                accepted.append((theta, label, int(batch.hits[i]), float(batch.best[i])))
            if proposals >= budget and len(accepted) < N:
                raise BudgetExceeded(
                    f"proposal budget {budget} exceeded in population {t}",
                    partial=partial_factory(accepted, proposals, sims),
                )
    return accepted, proposals, sims


def compute_weight(particle: Particle, previous: Population, kernel: KernelSpec,
                   prior: PriorSpec, hits: int = 1) -> float:
    """Importance weight of one accepted particle against the previous
    population (restricted to the particle's model for selection runs)."""
    prev_thetas = previous.thetas(particle.model)
    prev_weights = previous.weights(particle.model)
    num = prior.density(particle.theta) * hits
    den = float(prev_weights @ kernel.density_matrix(prev_thetas, particle.theta[None, :])[0])
    if not den > 0.0:
        raise RuntimeError("weight denominator is zero: particle outside every kernel range")
    return num / den


def _population_weights(accepted, cfg, prev_by_model, t, equal_weights: bool) -> np.ndarray:
    n = len(accepted)
    if equal_weights:
        return np.ones(n)
    if t == 0 or prev_by_model is None:
        return np.array([float(h) for _, _, h, _ in accepted])
    w = np.empty(n)
    labels = np.array([lab for _, lab, _, _ in accepted])
    for label in np.unique(labels):
        rows = np.nonzero(labels == label)[0]
        thetas = np.array([accepted[i][0] for i in rows])
        hits = np.array([accepted[i][2] for i in rows], dtype=float)
        prior = cfg.priors[label - 1]
        kernel = cfg.kernels[label - 1]
        parents, parent_w = prev_by_model[label]
        num = prior.density_many(thetas) * hits
        den = kernel.density_matrix(parents, thetas) @ parent_w
        if not np.all(den > 0.0):
            raise RuntimeError("weight denominator is zero: particle outside every kernel range")
        w[rows] = num / den
    if not np.all(np.isfinite(w) & (w > 0)):
        raise RuntimeError("non-finite or nonpositive particle weight")
    return w


def _make_population(accepted, weights, cfg, t, eps, sim_total, proposals) -> Population:
    particles = []
    selection = cfg.n_models > 1
    for (theta, label, h, best), w in zip(accepted, weights):
        particles.append(
            Particle(
                theta=np.asarray(theta, dtype=float),
                weight=float(w),
                model=label if selection else None,
                distance=best,
            )
        )
    normalize_weights(particles)
    return Population(particles, epsilon=eps, index=t, sim_count=sim_total, proposals=proposals)


def _by_model(population: Population, cfg: InferenceConfig) -> dict:
    out = {}
    for label in range(1, cfg.n_models + 1):
        key = label if cfg.n_models > 1 else None
        try:
            thetas = population.thetas(key)
            weights = population.weights(key)
        except Exception:
            continue
        if len(thetas):
            out[label] = (thetas, weights / weights.sum())
    return out


def _smc(cfg: InferenceConfig, equal_weights: bool = False, progress=None) -> list[Population]:
    cfg.validate()
    populations: list[Population] = []
    prev_by_model = None
    surviving = list(range(1, cfg.n_models + 1))
    sim_total = 0

    def partial_factory(accepted, proposals, sims):
        return SmcResult(list(populations))

    prev_rate = None
    for t, eps in enumerate(cfg.schedule):
        test = AcceptanceTest(cfg.dataset, cfg.distance, eps, cfg.sim_trials, cfg.replicates)
        accepted, proposals, sims = _collect_population(
            cfg, test, t, surviving, prev_by_model, cfg.proposal_budget(),
            partial_factory, prev_rate,
        )
        prev_rate = len(accepted) / max(proposals, 1)
        sim_total += sims
        weights = _population_weights(accepted, cfg, prev_by_model, t, equal_weights)
        pop = _make_population(accepted, weights, cfg, t, eps, sim_total, proposals)
        populations.append(pop)
        if progress is not None:
            progress(pop)
        prev_by_model = _by_model(pop, cfg)
        surviving = sorted(prev_by_model.keys()) if cfg.n_models > 1 else [1]
    return populations


def abc_smc(config: InferenceConfig, progress=None) -> SmcResult:
    """Sequential population refinement through the tolerance schedule.

    Population 0 is proposed fresh from the prior; later populations
    resample the previous one with importance weights and perturb.  With a
    single tolerance this reduces exactly to the rejection sampler.
    """
    if config.n_models != 1:
        raise ConfigError("abc_smc expects a single model; use abc_smc_model_selection")
    return SmcResult(_smc(config, progress=progress))


def abc_prc_baseline(config: InferenceConfig, progress=None) -> SmcResult:
    """Same proposal flow as abc_smc but every weight is left equal
    (the degenerate uniform-prior backward-kernel scheme)."""
    if config.n_models != 1:
        raise ConfigError("abc_prc_baseline expects a single model")
    return SmcResult(_smc(config, equal_weights=True, progress=progress))


def abc_smc_model_selection(config: InferenceConfig, progress=None) -> ModelSelectionResult:
    """Joint posterior over (model, parameters): each proposal first draws a
    model label uniformly among survivors, then resamples/perturbs within
    that model's sub-population.  Weights are computed and normalized per
    model; models with no surviving particles are excluded from sampling."""
    if config.n_models < 2:
        raise ConfigError("model selection needs at least two models")
    return ModelSelectionResult(_smc(config, progress=progress), config.n_models)


def abc_rejection(config: InferenceConfig, epsilon: Optional[float] = None) -> Population:
    """Plain rejection sampling at a single tolerance; equal weights.

    Aborts (BudgetExceeded) if finishing would require an acceptance rate
    below config.acceptance_floor.
    """
    config.validate()
    if config.n_models != 1:
        raise ConfigError("abc_rejection expects a single model")
    if epsilon is None:
        if len(config.schedule) != 1:
            raise ConfigError("abc_rejection needs a single tolerance (or an explicit epsilon)")
        epsilon = config.schedule[0]
    test = AcceptanceTest(config.dataset, config.distance, epsilon, config.sim_trials, config.replicates)
    budget = int(math.ceil(config.n_particles / config.acceptance_floor))

    def partial_factory(accepted, proposals, sims):
        return None

    accepted, proposals, sims = _collect_population(
        config, test, 0, [1], None, budget, partial_factory
    )
    weights = np.ones(len(accepted))
    return _make_population(accepted, weights, config, 0, epsilon, sims, proposals)


def suggest_next_epsilon(population: Population, quantile: float = 0.5) -> float:
    """Convenience only: a candidate next tolerance from the distance
    quantile of the current population (schedules are normally user-chosen)."""
    return float(np.quantile(population.distances(), quantile))


# ---------------------------------------------------------------------------
# Markov chain sampler
# ---------------------------------------------------------------------------

@dataclass
class McmcResult:
    chain: np.ndarray  # (steps + 1, k)
    accepted: int
    proposals: int
    sims: int
    passed: int  # proposals that were in-support with distance <= epsilon
    accepted_after_pass: int
    final_scale: float = 1.0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / max(self.proposals, 1)


def abc_mcmc(
    config: InferenceConfig,
    chain_length: int,
    proposal: Optional[KernelSpec] = None,
    adapt: bool = False,
    burn_in: int = 0,
    epsilon: Optional[float] = None,
    theta0: Optional[np.ndarray] = None,
) -> McmcResult:
    """Markov chain with stationary distribution = prior restricted to the
    epsilon-acceptance region.

    On rejection the current state is repeated.  Out-of-support proposals
    are rejected without consuming a simulation.  With `adapt`, a Gaussian
    proposal's scale is multiplied by 1.1 after acceptance and 0.99 after
    rejection during burn-in, then frozen (targets roughly 23% acceptance).

    Unless `theta0` is supplied, the initial state is rejection-sampled from
    the prior into the acceptance region (a chain started outside it can
    stay stuck indefinitely); those simulations are counted.
    """
    config.validate()
    if config.n_models != 1:
        raise ConfigError("abc_mcmc expects a single model")
    model = config.models[0]
    prior = config.priors[0]
    kernel = proposal if proposal is not None else config.kernels[0]
    if epsilon is None:
        epsilon = config.schedule[-1]
    if adapt:
        from .core import GaussianWalk

        if not all(isinstance(w, GaussianWalk) for w in kernel.walks):
            raise ConfigError("adaptive scaling requires an all-Gaussian proposal kernel")
    sigmas = np.array([w.sigma for w in kernel.walks], dtype=float)
    test = AcceptanceTest(config.dataset, config.distance, epsilon, 1, config.replicates)
    rng = task_rng(config.seed, 0)

    scale = 1.0
    accepted = proposals = sims = passed = accepted_after_pass = 0
    if theta0 is None:
        budget = int(math.ceil(1.0 / config.acceptance_floor))
        while True:
            theta = prior.sample(rng)
            sims += config.replicates
            _, best = test.evaluate_batch(model, theta[None, :], rng)
            if best[0] <= epsilon:
                break
            if sims > budget:
                raise BudgetExceeded("could not find an initial state within tolerance")
    else:
        theta = np.asarray(theta0, dtype=float)
        if prior.density(theta) <= 0:
            raise ConfigError("initial state has zero prior density")

    chain = np.empty((chain_length + 1, prior.dim))
    chain[0] = theta
    dens_cur = prior.density(theta)
    for i in range(chain_length):
        proposals += 1
        if adapt:
            step = scale * sigmas * rng.standard_normal(prior.dim)
            cand = theta + step
        else:
            cand = kernel.perturb(theta, rng)
        dens_cand = prior.density(cand)
        moved = False
        if dens_cand > 0.0:
            sims += config.replicates
            hits, best = test.evaluate_batch(model, cand[None, :], rng)
            if best[0] <= epsilon:
                passed += 1
                alpha = min(1.0, dens_cand / dens_cur)
                if rng.random() < alpha:
                    theta = cand
                    dens_cur = dens_cand
                    moved = True
                    accepted_after_pass += 1
        if moved:
            accepted += 1
            if adapt and i < burn_in:
                scale *= 1.1
        elif adapt and i < burn_in:
            scale *= 0.99
        chain[i + 1] = theta
    return McmcResult(chain, accepted, proposals, sims, passed, accepted_after_pass, scale)
