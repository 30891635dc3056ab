"""Reproducible simulation experiments over the full pipeline.

Each trial simulates journeys with known latent truth, trains likelihood
tables leave-one-journey-out, runs the estimator, and reduces everything to
the few numbers worth comparing. The trials are deterministic in their seed
and are what the evaluation suite and the scripts call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError
from .filtering import (
    ROAD_PRESETS,
    TransitionMatrix,
    builtin_matrices,
    fixed_policy,
    init_filter,
    policy_from_awp,
    policy_from_road_types,
    run_filter,
)
from .journey import default_schema
from .labeling import HIGH, LOW, awp_from_lwr
from .likelihood import train_likelihoods
from .metrics import binary_metrics, labeled_filter_scores, roc
from .profiling import ProfilingReport, run_profiling
from .simulator import (
    DriverStyle,
    SimConfig,
    class_emission_model,
    default_styles,
    make_emission_model,
    road_cycle,
    simulate_journey,
)


def _journey_seeds(seed: int, n: int) -> list[int]:
    rng = np.random.default_rng(seed)
    return [int(s) for s in rng.integers(0, 2**63 - 1, size=n)]


def _loo_tables(journeys):
    """Leave-one-out likelihood tables keyed by the held-out journey id."""
    return {
        j.journey_id: train_likelihoods(journeys, exclude=(j.journey_id,))
        for j in journeys
    }


@dataclass(frozen=True)
class RecoveryResult:
    """Instant-level MAP accuracy against the latent truth track."""

    accuracy: float
    majority_share: float
    n_instants: int
    separation: float


def run_recovery_trial(
    seed: int,
    separation: float,
    *,
    n_journeys: int = 4,
    duration_s: float = 400.0,
    rate_hz: float = 10.0,
    rho_ll: float = 0.97,
    rho_hh: float = 0.94,
    threshold: float = 0.5,
) -> RecoveryResult:
    """How well the filter recovers the latent state it was matched to.

    All journeys share one driver whose transition matrix the filter also
    uses, so the only unknowns are the emissions; tables are trained
    leave-one-out. majority_share is the pooled frequency of the more common
    latent state at the evaluated instants, i.e. the accuracy of the best
    constant guess.
    """
    transition = TransitionMatrix(rho_ll, rho_hh, "recovery")
    style = DriverStyle(awp_from_lwr(transition.stationary_low()), transition, 0.97)
    schema = default_schema()
    emission = make_emission_model(schema, separation)
    rates = {c.channel_id: rate_hz for c in schema}

    sims = []
    for i, s in enumerate(_journey_seeds(seed, n_journeys)):
        cfg = SimConfig(duration_s=duration_s, channel_rates=rates, seed=s)
        sims.append(simulate_journey(cfg, style, emission, f"rec{i:02d}", schema))

    tables_by_id = _loo_tables([j for j, _ in sims])
    policy = fixed_policy(transition)
    n_correct = 0
    n_total = 0
    n_high = 0
    for journey, truth in sims:
        state = init_filter(policy, tables_by_id[journey.journey_id])
        posteriors = run_filter(journey, state)
        times = np.array([p.t for p in posteriors])
        actual = truth.states_at(times).astype(bool)
        predicted = np.array([p.pi_high >= threshold for p in posteriors])
        n_correct += int((predicted == actual).sum())
        n_total += actual.size
        n_high += int(actual.sum())
    share_high = n_high / n_total
    return RecoveryResult(
        accuracy=n_correct / n_total,
        majority_share=max(share_high, 1.0 - share_high),
        n_instants=n_total,
        separation=separation,
    )


@dataclass(frozen=True)
class AdaptationResult:
    """Context-aware versus fixed-Standard filtering on the same journeys.

    AUCs come from road-annotated journeys whose latent chain really follows
    the road presets; F1s (decision threshold 0.5, High positive) come from
    sparse-High drivers matched against the L-profile policy.
    """

    road_auc: float
    fixed_auc: float
    awp_f1: float
    fixed_f1: float


# slow-switching chain for the sparse-High drivers: long Low dwells with
# short but resolvable High excursions, stationary inside the L band
_SPARSE_HIGH_STYLE = ("slow-L", 0.997, 0.98)


def run_adaptation_trial(
    seed: int,
    *,
    separation: float = 0.9,
    n_road: int = 3,
    n_low: int = 4,
    duration_s: float = 480.0,
    rate_hz: float = 4.0,
) -> AdaptationResult:
    """Does knowing the context actually help the filter?

    Road part: journeys tiled with road annotations whose segments drive the
    latent chain through the matching road presets; the road-aware policy is
    compared with fixed Standard by pooled AUC over prompt-window instances.
    Profile part: drivers who are almost always Low; the L-profile policy is
    compared with fixed Standard by pooled F1 at the default 0.5 decision
    threshold. Emissions are kept weakly informative so the transition prior
    carries weight.
    """
    schema = default_schema()
    emission = make_emission_model(schema, separation)
    rates = {c.channel_id: rate_hz for c in schema}
    presets = builtin_matrices()

    segments = (("motorway", 45.0), ("urban", 25.0), ("junction", 10.0), ("country", 40.0))
    contexts = road_cycle(duration_s, segments)
    context_matrices = {tag: presets[name] for tag, name in ROAD_PRESETS.items()}
    base_style = default_styles()["M"]

    seeds = _journey_seeds(seed, n_road + n_low)
    road_sims = []
    for i in range(n_road):
        cfg = SimConfig(
            duration_s=duration_s,
            channel_rates=rates,
            contexts=contexts,
            context_matrices=context_matrices,
            seed=seeds[i],
        )
        road_sims.append(simulate_journey(cfg, base_style, emission, f"road{i:02d}", schema))

    name, rho_ll, rho_hh = _SPARSE_HIGH_STYLE
    low_style = DriverStyle("L", TransitionMatrix(rho_ll, rho_hh, name), 0.99)
    low_sims = []
    for i in range(n_low):
        cfg = SimConfig(duration_s=duration_s, channel_rates=rates, seed=seeds[n_road + i])
        low_sims.append(simulate_journey(cfg, low_style, emission, f"low{i:02d}", schema))

    road_policy = policy_from_road_types()
    awp_policy = policy_from_awp("L")
    fixed = fixed_policy("Standard")

    road_tables = _loo_tables([j for j, _ in road_sims])
    pooled: dict[str, tuple[list[str], list[float]]] = {
        "road": ([], []),
        "fixed": ([], []),
    }
    for journey, _ in road_sims:
        tables = road_tables[journey.journey_id]
        for key, policy in (("road", road_policy), ("fixed", fixed)):
            y, s = labeled_filter_scores(journey, tables, policy)
            pooled[key][0].extend(y)
            pooled[key][1].extend(s)
    road_auc = roc(*pooled["road"]).auc
    fixed_auc = roc(*pooled["fixed"]).auc

    low_tables = _loo_tables([j for j, _ in low_sims])
    f1s: dict[str, float] = {}
    for key, policy in (("awp", awp_policy), ("fixed", fixed)):
        truth_all: list[str] = []
        pred_all: list[str] = []
        for journey, _ in low_sims:
            y, s = labeled_filter_scores(journey, low_tables[journey.journey_id], policy)
            truth_all.extend(y)
            pred_all.extend(HIGH if v >= 0.5 else LOW for v in s)
        f1s[key] = binary_metrics(truth_all, pred_all).f1

    return AdaptationResult(
        road_auc=road_auc,
        fixed_auc=fixed_auc,
        awp_f1=f1s["awp"],
        fixed_f1=f1s["fixed"],
    )


def run_profiling_trial(
    seed: int,
    *,
    n_per_class: int = 8,
    duration_s: float = 450.0,
    rate_hz: float = 8.0,
    length: int = 400,
    n_features: int = 600,
    separation: float = 3.0,
    style_offset: float = 1.0,
) -> ProfilingReport:
    """Profile classification on a simulated three-class cohort.

    Membership is by realized label, the way driver groups are formed from
    their measured press ratio: a journey whose realized label disagrees
    with its intended style is redrawn with a fresh seed, so each class
    contributes exactly n_per_class journeys. The report compares per-window
    accuracy with the fused per-journey accuracy.
    """
    schema = default_schema()
    rates = {c.channel_id: rate_hz for c in schema}
    styles = default_styles()
    rng = np.random.default_rng(seed)
    journeys = []
    for cls in ("L", "M", "H"):
        emission = class_emission_model(schema, cls, separation, style_offset)
        kept = 0
        attempts = 0
        while kept < n_per_class:
            attempts += 1
            if attempts > 20 * n_per_class:
                raise InsufficientDataError(
                    f"class {cls}: realized labels keep missing the intended band"
                )
            cfg = SimConfig(
                duration_s=duration_s,
                channel_rates=rates,
                seed=int(rng.integers(0, 2**63 - 1)),
            )
            journey, _ = simulate_journey(
                cfg, styles[cls], emission, f"{cls}{kept:02d}", schema
            )
            if journey.awp_label == cls:
                journeys.append(journey)
                kept += 1
    return run_profiling(
        journeys, length=length, seed=seed, split="window", n_features=n_features
    )
