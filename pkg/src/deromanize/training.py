"""Channel parameter estimation.

The E-step builds, per sentence, the lattice of the transition acceptor,
the emission machine and the sentence acceptor in the expectation
semiring; its shortest-distance total carries both the marginal
likelihood and the expected traversal count of every emission arc.  The
M-step renormalizes those counts, with the prior entering as Dirichlet
pseudo-counts (posterior-mean form).

Unsupervised training is stepwise EM: sufficient statistics are
interpolated across mini-batches with a decaying stepsize while a
curriculum raises the language-model order, relaxes the edit-operation
freezes and tightens emission arc pruning.  Supervised training runs
plain full-batch EM on lattices additionally constrained by the known
original-script sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence

from .automata import (NoPathError, SymbolTable, UnknownSymbolError, Wfst,
                       chain_acceptor, chain_intersect, compose, prune_arcs,
                       shortest_distance)
from .channel import (FROZEN_DELETION, DelayLimit, EditOp, EmissionParams,
                      PriorSpec, apply_restrictions, build_emission_fst,
                      init_params, unfreeze_deletions)
from .ngram import NgramModel, to_wfsa
from .profiles import LanguageProfile
from .semiring import ExpectationWeight


class TrainingError(Exception):
    pass


class EmptyLatticeError(TrainingError):
    """The composed lattice has no accepting path (pruning or the delay
    limit made the sentence unreachable)."""


@dataclass
class SufficientStats:
    """Expected edit-operation counts keyed by dense op id."""

    mu: dict[int, float] = field(default_factory=dict)

    def add(self, other: "SufficientStats") -> None:
        for op_id, v in other.mu.items():
            self.mu[op_id] = self.mu.get(op_id, 0.0) + v

    def get(self, op_id: int) -> float:
        return self.mu.get(op_id, 0.0)

    def total(self) -> float:
        return sum(self.mu.values())


@dataclass(frozen=True)
class TrainConfig:
    """Declarative record of every training hyperparameter."""

    batch_size: int = 10
    beta: float = 0.9
    order_schedule: tuple[int, ...] = (2, 3, 4, 5, 6)
    batches_per_stage: int = 100
    freeze_deletion_value: float = FROZEN_DELETION
    prune_threshold_start: float = 5.0
    prune_threshold_end: float = 4.5
    delay: int = 2
    restarts: int = 5
    supervised_iterations: int = 5
    init_noise: float = 0.1
    # Mass of the pseudo-observation (per conditional family) that seeds the
    # overall statistics vector from the initial parameters.  Zero-seeded
    # statistics make the first re-estimates of rare symbols degenerate
    # enough that pruning strands whole batches.
    stats_init_weight: float = 1.0

    def prune_thresholds(self) -> tuple[float, ...]:
        """One threshold per curriculum stage, stepped start -> end."""
        n = len(self.order_schedule)
        if n == 1:
            return (self.prune_threshold_end,)
        step = (self.prune_threshold_start - self.prune_threshold_end) / (n - 1)
        return tuple(self.prune_threshold_start - i * step for i in range(n))


def stepwise_eta(k: int, beta: float) -> float:
    return (k + 2.0) ** (-beta)


def stepwise_update(mu: SufficientStats, s_k: SufficientStats, k: int,
                    beta: float = 0.9) -> SufficientStats:
    """Interpolate the overall statistics toward the batch statistics."""
    eta = stepwise_eta(k, beta)
    out = {op_id: (1.0 - eta) * v for op_id, v in mu.mu.items()}
    for op_id, v in s_k.mu.items():
        out[op_id] = out.get(op_id, 0.0) + eta * v
    return SufficientStats(out)


def estep_sentence(T: Wfst, S: Wfst, latin: Sequence[str],
                   latin_table: SymbolTable) -> tuple[float, SufficientStats]:
    """Log-likelihood and expected counts for one romanized sentence."""
    acceptor = chain_acceptor(latin, latin_table, ExpectationWeight)
    lattice = compose(T, compose(S, acceptor))
    _, total = shortest_distance(lattice)
    if total.is_zero():
        raise EmptyLatticeError("no path through the sentence lattice")
    return -total.p, SufficientStats(dict(total.counts))


def mstep(stats: SufficientStats, prior: Optional[PriorSpec],
          params: EmissionParams) -> EmissionParams:
    """Posterior-mean re-estimation: theta = (mu + alpha) / sum(mu + alpha).

    Families with no mass keep their previous values; while deletions are
    frozen they are pinned to the frozen value and the rest of the family
    renormalized around them.
    """
    alpha = prior.alpha_by_op_id(params) if prior is not None else {}

    def posterior(op: EditOp) -> float:
        op_id = params.op_ids[op]
        return stats.get(op_id) + alpha.get(op_id, 0.0)

    frozen = params.frozen_deletion_value
    families: dict[str, dict[Optional[str], float]] = {}
    for s in sorted(params.families):
        fam = params.families[s]
        post = {t: posterior(EditOp("sub", s, t) if t is not None else EditOp("del", s, None))
                for t in fam}
        if frozen is not None and None in fam:
            free = {t: v for t, v in post.items() if t is not None}
            total = sum(free.values())
            if total <= 0.0:
                families[s] = dict(fam)
            else:
                new = {t: v / total * (1.0 - frozen) for t, v in free.items()}
                new[None] = frozen
                families[s] = new
        else:
            total = sum(post.values())
            families[s] = dict(fam) if total <= 0.0 else {t: v / total for t, v in post.items()}

    if params.insertions_enabled:
        post_ins = {t: stats.get(params.op_ids[EditOp("ins", None, t)])
                    for t in params.insertions}
        total = sum(post_ins.values())
        insertions = dict(params.insertions) if total <= 0.0 else \
            {t: v / total for t, v in post_ins.items()}
    else:
        insertions = dict(params.insertions)
    return params.with_tables(families, insertions)


def prior_log_term(params: EmissionParams, prior: Optional[PriorSpec]) -> float:
    """Dirichlet pseudo-count contribution to the penalized objective."""
    if prior is None:
        return 0.0
    total = 0.0
    for op_id, a in prior.alpha_by_op_id(params).items():
        theta = params.op_prob(params.ops[op_id])
        total += a * (math.log(theta) if theta > 0.0 else -math.inf)
    return total


def _initial_params(profile: LanguageProfile, config: TrainConfig, seed: int,
                    insertions_enabled: bool, frozen: Optional[float]) -> EmissionParams:
    params = init_params(profile.source_alphabet, profile.latin_alphabet,
                         seed=seed, noise=config.init_noise,
                         insertions_enabled=insertions_enabled,
                         frozen_deletion_value=frozen)
    return apply_restrictions(params, profile.restricted_chars(),
                              profile.specialized_pairs)


def train_unsupervised(latin_corpus: Sequence[str], lms: Mapping[int, NgramModel],
                       config: TrainConfig, prior: Optional[PriorSpec],
                       profile: LanguageProfile, seed: int = 0,
                       log_fn: Optional[Callable[[dict], None]] = None
                       ) -> tuple[EmissionParams, list[dict]]:
    """One stepwise-EM pass over the corpus with the full curriculum.

    Sentences are visited shortest first in mini-batches; every
    ``batches_per_stage`` batches the LM order advances and the emission
    pruning threshold steps down, and after the bigram stage deletions are
    unfrozen and insertions enabled.  Returns the final parameters and the
    per-batch trace used for restart selection.
    """
    for order in config.order_schedule:
        if order not in lms:
            raise TrainingError(f"no language model of order {order}")
    source_table = profile.source_table()
    latin_table = profile.latin_table()
    params = _initial_params(profile, config, seed, insertions_enabled=False,
                             frozen=config.freeze_deletion_value)
    delay = DelayLimit(config.delay)
    thresholds = config.prune_thresholds()

    ordered = sorted(latin_corpus, key=len)
    batches = [ordered[i:i + config.batch_size]
               for i in range(0, len(ordered), config.batch_size)]
    if not batches:
        raise TrainingError("empty training corpus")

    mu = SufficientStats()
    if config.stats_init_weight > 0.0:
        for op in params.ops:
            if op.kind != "ins":
                p = params.op_prob(op)
                if p > 0.0:
                    mu.mu[params.op_ids[op]] = config.stats_init_weight * p
    trace: list[dict] = []
    stage = -1
    T: Optional[Wfst] = None
    for k, batch in enumerate(batches):
        new_stage = min(k // config.batches_per_stage, len(config.order_schedule) - 1)
        if new_stage != stage:
            if stage == 0:
                params = unfreeze_deletions(params)
                params = replace(params, insertions_enabled=True,
                                 ops=params.ops, op_ids=params.op_ids)
            stage = new_stage
            T = to_wfsa(lms[config.order_schedule[stage]], table=source_table,
                        weight_cls=ExpectationWeight)
        S = prune_arcs(build_emission_fst(params, delay, source_table, latin_table,
                                          weight_cls=ExpectationWeight),
                       thresholds[stage])
        batch_stats = SufficientStats()
        batch_loglik = 0.0
        skipped = 0
        for sentence in batch:
            try:
                loglik, stats = estep_sentence(T, S, sentence, latin_table)
            except (EmptyLatticeError, UnknownSymbolError):
                skipped += 1
                continue
            batch_loglik += loglik
            batch_stats.add(stats)
        if skipped == len(batch):
            raise TrainingError(f"batch {k}: every sentence was skipped")
        mu = stepwise_update(mu, batch_stats, k, config.beta)
        params = mstep(mu, prior, params)
        record = {
            "batch": k,
            "stage": stage,
            "order": config.order_schedule[stage],
            "loglik": batch_loglik,
            "sentences": len(batch) - skipped,
            "skipped": skipped,
            "arcs": S.num_arcs(),
            "threshold": thresholds[stage],
        }
        trace.append(record)
        if log_fn:
            log_fn(record)
    return params, trace


def train_supervised(pairs: Sequence[tuple[str, str]], lm: NgramModel,
                     config: TrainConfig, prior: Optional[PriorSpec],
                     profile: LanguageProfile, seed: int = 0,
                     log_fn: Optional[Callable[[dict], None]] = None
                     ) -> tuple[EmissionParams, list[dict]]:
    """Full-batch EM on lattices pinned to both sides of each pair.

    Pairs whose sides differ in length by more than the delay limit cannot
    compose and are excluded up front.  The penalized log-likelihood
    (marginal plus prior term) is non-decreasing across iterations.
    """
    source_table = profile.source_table()
    latin_table = profile.latin_table()
    T = to_wfsa(lm, table=source_table, weight_cls=ExpectationWeight)

    usable: list[tuple[Wfst, str]] = []
    excluded = 0
    skipped_bad = 0
    for latin, original in pairs:
        if abs(len(original) - len(latin)) > config.delay:
            excluded += 1
            continue
        try:
            ids = [source_table.id(c) for c in original]
            chain = chain_intersect(T, ids)
        except (KeyError, NoPathError):
            skipped_bad += 1
            continue
        usable.append((chain, latin))
    if not usable:
        raise TrainingError(
            f"no usable pairs: {excluded} outside the delay limit, "
            f"{skipped_bad} with out-of-alphabet characters")

    params = _initial_params(profile, config, seed, insertions_enabled=True, frozen=None)
    delay = DelayLimit(config.delay)
    trace: list[dict] = []
    for iteration in range(config.supervised_iterations):
        S = build_emission_fst(params, delay, source_table, latin_table,
                               weight_cls=ExpectationWeight)
        stats = SufficientStats()
        loglik = 0.0
        skipped = 0
        for chain, latin in usable:
            try:
                acceptor = chain_acceptor(latin, latin_table, ExpectationWeight)
                lattice = compose(chain, compose(S, acceptor))
                _, total = shortest_distance(lattice)
            except UnknownSymbolError:
                skipped += 1
                continue
            if total.is_zero():
                skipped += 1
                continue
            loglik += -total.p
            stats.add(SufficientStats(dict(total.counts)))
        record = {
            "iteration": iteration,
            "loglik": loglik,
            "penalized": loglik + prior_log_term(params, prior),
            "pairs": len(usable) - skipped,
            "excluded": excluded,
            "skipped": skipped + skipped_bad,
        }
        trace.append(record)
        if log_fn:
            log_fn(record)
        params = mstep(stats, prior, params)
    return params, trace


def final_stage_avg_loglik(trace: Sequence[dict]) -> float:
    """Average per-sentence log-likelihood over the last curriculum stage;
    the restart-selection criterion."""
    if not trace:
        return -math.inf
    key = "stage" if "stage" in trace[0] else "iteration"
    last = trace[-1][key]
    entries = [t for t in trace if t[key] == last]
    n = sum(t.get("sentences", t.get("pairs", 0)) for t in entries)
    if n == 0:
        return -math.inf
    return sum(t["loglik"] for t in entries) / n
