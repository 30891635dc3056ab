"""Sequential two-state Bayesian filter for instantaneous workload.

The latent state is binary (Low/High). At every observation instant the
posterior is pushed through a two-state Markov transition and reweighted by
the likelihood of whichever channels arrived at that instant:

    raw_low  = l_low  * (rho_ll * pi_low + (1 - rho_hh) * pi_high)
    raw_high = l_high * ((1 - rho_ll) * pi_low + rho_hh * pi_high)
    posterior = (raw_low, raw_high) / (raw_low + raw_high)

rho_ll and rho_hh are the self-transition probabilities of the Low and High
states. One prediction step is applied per observation instant, however many
channels arrive at it and however irregular the spacing.

A context policy swaps the transition matrix while the journey moves through
annotated intervals (road type) or fixes it to a profile-matched preset.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InsufficientDataError, InvariantViolation
from .journey import ContextAnnotation, Journey
from .labeling import HIGH, LOW, AWP_CLASSES
from .likelihood import eval_likelihood

# posterior components must sum to one within this bound after every step
NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class TransitionMatrix:
    """Two-state transition matrix held by its diagonal.

    rho_ll = P(Low -> Low), rho_hh = P(High -> High); the off-diagonals
    follow as 1 - rho_ll and 1 - rho_hh.
    """

    rho_ll: float
    rho_hh: float
    name: str = ""

    def __post_init__(self):
        if not (0.0 < self.rho_ll < 1.0 and 0.0 < self.rho_hh < 1.0):
            raise InvariantViolation("transition diagonals must lie strictly in (0, 1)")

    @property
    def rho_lh(self) -> float:
        return 1.0 - self.rho_ll

    @property
    def rho_hl(self) -> float:
        return 1.0 - self.rho_hh

    def stationary_low(self) -> float:
        """Stationary probability of the Low state."""
        return self.rho_hl / (self.rho_lh + self.rho_hl)

    def as_array(self) -> np.ndarray:
        """Row-stochastic 2x2 array, state order (Low, High)."""
        return np.array(
            [[self.rho_ll, self.rho_lh], [self.rho_hl, self.rho_hh]], dtype=float
        )


def builtin_matrices() -> dict[str, TransitionMatrix]:
    """The five built-in presets, keyed by preset name.

    Standard is the context-free default. H/Ha bias toward the High state
    with ever faster escape from Low; La/L bias toward Low.
    """
    return {
        "Standard": TransitionMatrix(0.8, 0.92, "Standard"),
        "H": TransitionMatrix(0.4, 0.98, "H"),
        "Ha": TransitionMatrix(0.7, 0.92, "Ha"),
        "La": TransitionMatrix(0.75, 0.8, "La"),
        "L": TransitionMatrix(0.9, 0.8, "L"),
    }


# road type -> preset name: junctions demand the most attention, motorways
# the least
ROAD_PRESETS = {"junction": "H", "urban": "Ha", "country": "La", "motorway": "L"}

# profile class -> preset name for profile-personalized filtering
AWP_PRESETS = {"L": "L", "M": "Standard", "H": "H"}


@dataclass(frozen=True)
class ContextPolicy:
    """Maps an active context tag to the transition matrix to use.

    kind selects which annotation kind the filter reads from the journey
    ('road' or 'awp'); None means the default matrix is used everywhere.
    The default also covers instants with no active annotation and tags
    missing from the mapping.
    """

    default: TransitionMatrix
    mapping: dict[str, TransitionMatrix] = field(default_factory=dict)
    kind: str | None = None

    def matrix_for(self, tag: str | None) -> TransitionMatrix:
        if tag is None:
            return self.default
        return self.mapping.get(tag, self.default)


def fixed_policy(matrix="Standard") -> ContextPolicy:
    """Context-independent policy. Accepts a preset name or a matrix."""
    if isinstance(matrix, str):
        presets = builtin_matrices()
        if matrix not in presets:
            raise InvariantViolation(f"unknown preset {matrix!r}; choose from {sorted(presets)}")
        matrix = presets[matrix]
    return ContextPolicy(default=matrix)


def policy_from_road_types() -> ContextPolicy:
    """Road-adaptive policy over journey road annotations."""
    presets = builtin_matrices()
    return ContextPolicy(
        default=presets["Standard"],
        mapping={road: presets[name] for road, name in ROAD_PRESETS.items()},
        kind="road",
    )


def policy_from_awp(awp: str) -> ContextPolicy:
    """Profile-personalized constant policy: L -> L, M -> Standard, H -> H."""
    if awp not in AWP_CLASSES:
        raise InvariantViolation(f"awp must be one of {AWP_CLASSES}: {awp!r}")
    return ContextPolicy(default=builtin_matrices()[AWP_PRESETS[awp]])


@dataclass(frozen=True)
class WorkloadPosterior:
    """Posterior over (Low, High) at time t. Components sum to one."""

    t: float
    pi_low: float
    pi_high: float


@dataclass(frozen=True)
class FilterState:
    posterior: WorkloadPosterior
    policy: ContextPolicy
    tables: dict


def init_filter(policy: ContextPolicy, tables, prior_low: float | None = None) -> FilterState:
    """Fresh filter at t = 0. The default prior is the stationary
    distribution of the policy's default matrix."""
    if prior_low is None:
        prior_low = policy.default.stationary_low()
    if not 0.0 <= prior_low <= 1.0:
        raise InvariantViolation(f"prior_low must lie in [0, 1], got {prior_low}")
    return FilterState(WorkloadPosterior(0.0, prior_low, 1.0 - prior_low), policy, tables)


def _advance(pi_low, pi_high, rho_ll, rho_hh, l_low, l_high):
    """One predict-update-normalize step of the two-state recursion."""
    raw_low = l_low * (rho_ll * pi_low + (1.0 - rho_hh) * pi_high)
    raw_high = l_high * ((1.0 - rho_ll) * pi_low + rho_hh * pi_high)
    total = raw_low + raw_high
    if not total > 0.0:
        raise InvariantViolation(
            "posterior mass vanished; likelihood floor or inputs are invalid"
        )
    p_low = raw_low / total
    p_high = raw_high / total
    assert abs(p_low + p_high - 1.0) <= NORMALIZATION_TOL
    return p_low, p_high


def step(state: FilterState, obs, context: str | None = None) -> FilterState:
    """Advance by one observation instant.

    obs is the set of channel samples sharing one timestamp, which must be
    strictly later than the current posterior time.
    """
    obs = list(obs)
    if not obs:
        raise InvariantViolation("empty observation set")
    t = obs[0].t
    for s in obs[1:]:
        if s.t != t:
            raise InvariantViolation("all samples of one step must share a timestamp")
    if not t > state.posterior.t:
        raise InvariantViolation(
            f"non-increasing timestamp: {t} after {state.posterior.t}"
        )
    mat = state.policy.matrix_for(context)
    l_low = eval_likelihood(state.tables, obs, LOW)
    l_high = eval_likelihood(state.tables, obs, HIGH)
    p_low, p_high = _advance(
        state.posterior.pi_low, state.posterior.pi_high,
        mat.rho_ll, mat.rho_hh, l_low, l_high,
    )
    return replace(state, posterior=WorkloadPosterior(t, p_low, p_high))


def decide(p: WorkloadPosterior, threshold: float = 0.5) -> str:
    """MAP-style decision: High when pi_high >= threshold (ties go High)."""
    if not 0.0 < threshold < 1.0:
        raise InvariantViolation(f"threshold must lie in (0, 1), got {threshold}")
    return HIGH if p.pi_high >= threshold else LOW


def _context_tags(policy: ContextPolicy, contexts, inst_times: np.ndarray):
    """Active annotation tag per instant for the policy's kind, or None."""
    tags: list[str | None] = [None] * inst_times.size
    if policy.kind is None:
        return tags
    anns = sorted(
        (c for c in contexts if c.kind == policy.kind), key=lambda c: c.t_start
    )
    if not anns:
        return tags
    starts = np.array([c.t_start for c in anns])
    pos = np.searchsorted(starts, inst_times, side="right") - 1
    for k, p in enumerate(pos):
        if p >= 0 and inst_times[k] < anns[p].t_end:
            tags[k] = anns[p].tag
    return tags


def run_filter(journey: Journey, state: FilterState) -> list[WorkloadPosterior]:
    """Filter a whole journey, one posterior per distinct observation
    instant. Samples sharing a timestamp enter the same step. Equivalent to
    folding step() over the grouped samples, but with the per-channel
    likelihood lookups vectorized.
    """
    samples = journey.samples
    if not samples:
        return []
    times = np.array([s.t for s in samples], dtype=float)
    if (np.diff(times) < 0).any():
        raise InvariantViolation("journey samples must be time ordered")
    is_first = np.ones(times.size, dtype=bool)
    np.greater(times[1:], times[:-1], out=is_first[1:])
    inst_of = np.cumsum(is_first) - 1
    inst_times = times[is_first]
    if not inst_times[0] > state.posterior.t:
        raise InvariantViolation(
            f"non-increasing timestamp: {inst_times[0]} after {state.posterior.t}"
        )
    n = inst_times.size

    # per-sample densities, interpolated channel by channel
    values = np.array([s.value for s in samples], dtype=float)
    dens_low = np.empty(values.size)
    dens_high = np.empty(values.size)
    by_channel: dict[str, list[int]] = {}
    for i, s in enumerate(samples):
        by_channel.setdefault(s.channel_id, []).append(i)
    for cid, idx in by_channel.items():
        t_low = state.tables.get((cid, LOW))
        t_high = state.tables.get((cid, HIGH))
        if t_low is None or t_high is None:
            raise InvariantViolation(f"missing likelihood tables for channel {cid}")
        idx = np.array(idx)
        dens_low[idx] = np.interp(values[idx], t_low.grid, t_low.density)
        dens_high[idx] = np.interp(values[idx], t_high.grid, t_high.density)

    # per-instant likelihood products, accumulated in sample order
    lik_low = np.ones(n)
    lik_high = np.ones(n)
    np.multiply.at(lik_low, inst_of, dens_low)
    np.multiply.at(lik_high, inst_of, dens_high)

    tags = _context_tags(state.policy, journey.contexts, inst_times)
    rho_ll = np.empty(n)
    rho_hh = np.empty(n)
    for k, tag in enumerate(tags):
        mat = state.policy.matrix_for(tag)
        rho_ll[k] = mat.rho_ll
        rho_hh[k] = mat.rho_hh

    out: list[WorkloadPosterior] = []
    pi_low = state.posterior.pi_low
    pi_high = state.posterior.pi_high
    for k in range(n):
        pi_low, pi_high = _advance(
            pi_low, pi_high, rho_ll[k], rho_hh[k], lik_low[k], lik_high[k]
        )
        out.append(WorkloadPosterior(float(inst_times[k]), pi_low, pi_high))
    return out
