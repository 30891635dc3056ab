"""Synthetic journey generator with known ground truth.

The latent workload state evolves as a two-state Markov chain on a fixed
20 Hz tick grid, following the transition matrix of whichever context
annotation is active (falling back to the driver style's matrix). Channels
emit at independent jittered arrival times; each sample is drawn from the
channel's state-conditional Gaussian mixture and clamped to the declared
physical range. Prompts fire at uniform random gaps and are answered by a
press only when the latent state is Low, with a per-driver reliability.

Everything is driven by numpy Generators seeded through a SeedSequence, so
a fixed config seed reproduces journeys byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError, InvariantViolation, ParseError
from .filtering import TransitionMatrix
from .journey import (
    ChannelSample,
    ChannelSchema,
    ContextAnnotation,
    Journey,
    PromptEvent,
    default_schema,
)
from .labeling import HIGH, LOW, awp_from_lwr, label_prompts, lwr

# latent tick rate, Hz
TICK_HZ = 20.0

# press delay after a prompt, seconds; stays well inside the minimum prompt gap
_PRESS_DELAY = (0.15, 1.2)


@dataclass(frozen=True)
class GaussianMixture:
    """Mixture of up to three Gaussian components."""

    weights: tuple[float, ...]
    means: tuple[float, ...]
    stds: tuple[float, ...]

    def __post_init__(self):
        k = len(self.weights)
        if not 1 <= k <= 3 or len(self.means) != k or len(self.stds) != k:
            raise InvariantViolation("mixture needs 1..3 aligned components")
        if abs(sum(self.weights) - 1.0) > 1e-9 or any(w < 0 for w in self.weights):
            raise InvariantViolation("mixture weights must be a simplex")
        if any(s <= 0 for s in self.stds):
            raise InvariantViolation("mixture stds must be > 0")

    def pooled_std(self) -> float:
        mean = sum(w * m for w, m in zip(self.weights, self.means))
        var = sum(
            w * (s * s + (m - mean) ** 2)
            for w, m, s in zip(self.weights, self.means, self.stds)
        )
        return math.sqrt(var)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        comp = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights))
        means = np.asarray(self.means)[comp]
        stds = np.asarray(self.stds)[comp]
        return rng.normal(means, stds)


@dataclass(frozen=True)
class EmissionModel:
    """State-conditional mixture per channel plus the separation knob.

    separation is the distance between the Low and High mixture means in
    pooled-standard-deviation units; separation 0 makes the two states
    emission-identical.
    """

    mixtures: dict[tuple[str, str], GaussianMixture]
    separation: float


def make_emission_model(
    schema,
    separation: float,
    *,
    sigma_scale: float = 1.0,
    mean_shift: float = 0.0,
) -> EmissionModel:
    """Deterministic two-component emission model over a channel schema.

    Each channel gets a main component plus a wider low-weight tail; the
    High-state mixture is the Low-state mixture displaced by `separation`
    pooled standard deviations along a per-channel direction. sigma_scale
    inflates or deflates the noise scale and mean_shift slides both states
    together (style knobs for distinct driver populations).
    """
    if separation < 0:
        raise InvariantViolation("separation must be >= 0")
    if sigma_scale <= 0:
        raise InvariantViolation("sigma_scale must be > 0")
    mixtures: dict[tuple[str, str], GaussianMixture] = {}
    for i, ch in enumerate(schema):
        span = ch.max - ch.min
        if not math.isfinite(span):
            raise InvariantViolation(
                f"channel {ch.channel_id} needs a finite range for simulation"
            )
        sigma = span / 40.0 * sigma_scale
        center = ch.min + span * 0.45 + mean_shift * span * 0.02
        direction = 1.0 if i % 2 == 0 else -1.0
        # shape of one state's mixture, relative to its own mean
        rel_means = (0.0, 1.5 * sigma * direction)
        rel_stds = (sigma, 2.0 * sigma)
        weights = (0.7, 0.3)
        shape = GaussianMixture(weights, rel_means, rel_stds)
        pooled = shape.pooled_std()
        half = 0.5 * separation * pooled * direction
        for state, sign in ((LOW, -1.0), (HIGH, 1.0)):
            mixtures[(ch.channel_id, state)] = GaussianMixture(
                weights,
                tuple(center + sign * half + m for m in rel_means),
                rel_stds,
            )
    return EmissionModel(mixtures, separation)


@dataclass(frozen=True)
class DriverStyle:
    """Long-term behaviour of one simulated driver.

    The transition override is the latent chain used outside annotated
    contexts; its stationary Low probability must fall inside the LWR band
    of the declared profile so realized labels can match the intent.
    press_reliability is the chance a Low-state prompt actually gets pressed.
    """

    awp: str
    transition: TransitionMatrix
    press_reliability: float

    def __post_init__(self):
        if self.awp not in ("L", "M", "H"):
            raise InvariantViolation(f"awp must be L, M or H: {self.awp!r}")
        if not 0.9 < self.press_reliability <= 1.0:
            raise InvariantViolation("press_reliability must lie in (0.9, 1]")
        band = awp_from_lwr(self.transition.stationary_low())
        if band != self.awp:
            raise InvariantViolation(
                f"style matrix stationary pi_low {self.transition.stationary_low():.4f} "
                f"falls in band {band}, not declared {self.awp}"
            )


def default_styles() -> dict[str, DriverStyle]:
    """One style per profile class, tuned so the expected press ratio sits
    well inside the class's own band (L near 0.96, M near 0.70, H near
    0.38), keeping realized labels stable at moderate journey lengths."""
    return {
        "L": DriverStyle("L", TransitionMatrix(0.995, 0.85, "style-L"), 0.99),
        "M": DriverStyle("M", TransitionMatrix(0.965, 0.909, "style-M"), 0.97),
        "H": DriverStyle("H", TransitionMatrix(0.88, 0.92, "style-H"), 0.95),
    }


@dataclass(frozen=True)
class SimConfig:
    """Journey-level generation knobs.

    channel_rates None means every schema channel emits at 10 Hz. Context
    annotations are copied into the generated journey; context_matrices maps
    an annotation tag to the latent transition matrix used while it is
    active (tags without an entry keep the style matrix).
    """

    duration_s: float = 600.0
    channel_rates: dict[str, float] | None = None
    rate_jitter: float = 0.3
    prompt_min_s: float = 5.0
    prompt_max_s: float = 10.0
    contexts: tuple[ContextAnnotation, ...] = ()
    context_matrices: dict[str, TransitionMatrix] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if not self.duration_s > 0:
            raise InvariantViolation("duration_s must be > 0")
        if not 0.0 <= self.rate_jitter < 1.0:
            raise InvariantViolation("rate_jitter must lie in [0, 1)")
        if not 0.0 < self.prompt_min_s < self.prompt_max_s:
            raise InvariantViolation("need 0 < prompt_min_s < prompt_max_s")


@dataclass(frozen=True)
class TruthTrack:
    """Latent state per tick; 0 is Low, 1 is High."""

    tick_hz: float
    states: np.ndarray

    def times(self) -> np.ndarray:
        return np.arange(self.states.size) / self.tick_hz

    def index_at(self, t) -> np.ndarray:
        idx = np.asarray(np.floor(np.asarray(t, dtype=float) * self.tick_hz), dtype=int)
        return np.clip(idx, 0, self.states.size - 1)

    def state_at(self, t: float) -> str:
        return HIGH if self.states[self.index_at(t)] else LOW

    def states_at(self, ts) -> np.ndarray:
        """Vectorized lookup: uint8 states at the given times."""
        return self.states[self.index_at(ts)]

    def labels_at(self, ts) -> list[str]:
        """Vectorized lookup: Low/High label names at the given times."""
        return [HIGH if s else LOW for s in self.states_at(ts)]


def _latent_states(cfg: SimConfig, style: DriverStyle, rng: np.random.Generator):
    n_ticks = max(1, int(round(cfg.duration_s * TICK_HZ)))
    rho_ll = np.full(n_ticks, style.transition.rho_ll)
    rho_hh = np.full(n_ticks, style.transition.rho_hh)
    tick_t = np.arange(n_ticks) / TICK_HZ
    for ann in cfg.contexts:
        mat = cfg.context_matrices.get(ann.tag)
        if mat is None:
            continue
        mask = (tick_t >= ann.t_start) & (tick_t < ann.t_end)
        rho_ll[mask] = mat.rho_ll
        rho_hh[mask] = mat.rho_hh
    pi_low0 = TransitionMatrix(float(rho_ll[0]), float(rho_hh[0])).stationary_low()
    u = rng.random(n_ticks)
    states = np.empty(n_ticks, dtype=np.uint8)
    s = 0 if u[0] < pi_low0 else 1
    states[0] = s
    for k in range(1, n_ticks):
        if s == 0:
            s = 0 if u[k] < rho_ll[k] else 1
        else:
            s = 1 if u[k] < rho_hh[k] else 0
        states[k] = s
    return states


def simulate_journey(
    cfg: SimConfig,
    style: DriverStyle,
    emission: EmissionModel,
    journey_id: str = "sim",
    schema=None,
) -> tuple[Journey, TruthTrack]:
    """Generate one journey plus its latent truth track.

    The journey's awp label is set from the realized LWR of its prompts, not
    from the style's intent.
    """
    schema = list(schema) if schema is not None else default_schema()
    rates = cfg.channel_rates
    if rates is None:
        rates = {c.channel_id: 10.0 for c in schema}
    ss = np.random.SeedSequence(cfg.seed)
    child = ss.spawn(2 + len(schema))
    rng_latent = np.random.default_rng(child[0])
    rng_prompt = np.random.default_rng(child[1])

    states = _latent_states(cfg, style, rng_latent)
    truth = TruthTrack(TICK_HZ, states)

    order = {c.channel_id: i for i, c in enumerate(schema)}
    channel_samples: list[ChannelSample] = []
    for ci, ch in enumerate(schema):
        rate = rates.get(ch.channel_id, 0.0)
        if rate <= 0:
            continue
        rng_c = np.random.default_rng(child[2 + ci])
        n_max = int(cfg.duration_s * rate * (1.0 + cfg.rate_jitter)) + 8
        dts = (1.0 / rate) * (
            1.0 + cfg.rate_jitter * (2.0 * rng_c.random(n_max) - 1.0)
        )
        times = np.cumsum(dts)
        times = times[times < cfg.duration_s]
        if times.size == 0:
            continue
        st = truth.states_at(times)
        values = np.empty(times.size)
        for state_code, state_name in ((0, LOW), (1, HIGH)):
            mask = st == state_code
            if mask.any():
                mix = emission.mixtures.get((ch.channel_id, state_name))
                if mix is None:
                    raise InsufficientDataError(
                        f"emission model lacks ({ch.channel_id}, {state_name})"
                    )
                values[mask] = mix.sample(rng_c, int(mask.sum()))
        values = np.clip(values, ch.min, ch.max)
        channel_samples.extend(
            ChannelSample(ch.channel_id, float(t), float(v))
            for t, v in zip(times, values)
        )
    channel_samples.sort(key=lambda s: (s.t, order[s.channel_id]))

    prompts: list[PromptEvent] = []
    t = 0.0
    while True:
        t += rng_prompt.uniform(cfg.prompt_min_s, cfg.prompt_max_s)
        if t >= cfg.duration_s:
            break
        press = None
        if truth.states[truth.index_at(t)] == 0:
            if rng_prompt.random() < style.press_reliability:
                press = t + rng_prompt.uniform(*_PRESS_DELAY)
        prompts.append(PromptEvent(float(t), None if press is None else float(press)))

    journey = Journey(
        journey_id, schema, channel_samples, prompts, list(cfg.contexts), None
    )
    labels = label_prompts(journey)
    if labels:
        journey.awp_label = awp_from_lwr(lwr(labels))
    return journey, truth


# class knobs: style_offset scales how far apart the three profile classes
# sit in emission space (noise scale and a common mean slide)
_CLASS_DELTA = {"L": -1.0, "M": 0.0, "H": 1.0}


def class_emission_model(
    schema, cls: str, separation: float, style_offset: float
) -> EmissionModel:
    delta = _CLASS_DELTA[cls]
    return make_emission_model(
        schema,
        separation,
        sigma_scale=1.0 + 0.35 * style_offset * delta,
        mean_shift=style_offset * delta,
    )


def simulate_population(
    n_per_class: int,
    cfg: SimConfig,
    *,
    separation: float = 3.0,
    style_offset: float = 1.0,
    styles: dict[str, DriverStyle] | None = None,
    schema=None,
) -> list[tuple[Journey, TruthTrack]]:
    """Simulate n_per_class drivers for each profile class (L, M, H).

    Classes get distinct emission models (scaled by style_offset) and their
    own latent styles. Journey ids are <class><index>; labels are realized,
    not intended, so a journey can land outside its class's band.
    """
    if n_per_class < 1:
        raise InvariantViolation("n_per_class must be >= 1")
    styles = styles or default_styles()
    schema = list(schema) if schema is not None else default_schema()
    seeds = np.random.default_rng(cfg.seed).integers(0, 2**63 - 1, size=3 * n_per_class)
    out: list[tuple[Journey, TruthTrack]] = []
    k = 0
    for cls in ("L", "M", "H"):
        emission = class_emission_model(schema, cls, separation, style_offset)
        for i in range(n_per_class):
            jcfg = replace(cfg, seed=int(seeds[k]))
            out.append(
                simulate_journey(jcfg, styles[cls], emission, f"{cls}{i:02d}", schema)
            )
            k += 1
    return out


def road_cycle(duration_s: float, segments) -> tuple[ContextAnnotation, ...]:
    """Tile [0, duration) with road annotations cycling through segments,
    each a (tag, length_s) pair. The last segment is truncated to fit."""
    segments = list(segments)
    if not segments:
        raise InvariantViolation("need at least one road segment")
    out = []
    t = 0.0
    i = 0
    while t < duration_s:
        tag, length = segments[i % len(segments)]
        end = min(t + float(length), duration_s)
        out.append(ContextAnnotation("road", t, end, tag))
        t = end
        i += 1
    return tuple(out)


def write_truth(track: TruthTrack, path, provenance: str | None = None) -> None:
    """Sidecar format: one `<t> <Low|High>` line per tick."""
    lines = []
    if provenance:
        lines.append(f"# {provenance}")
    for i, s in enumerate(track.states):
        t = i / track.tick_hz
        lines.append(f"{repr(float(t))} {HIGH if s else LOW}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_truth(path) -> TruthTrack:
    path = Path(path)
    times: list[float] = []
    states: list[int] = []
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2 or parts[1] not in (LOW, HIGH):
                raise ParseError(path, line_no, "expected: <t> <Low|High>")
            try:
                times.append(float(parts[0]))
            except ValueError:
                raise ParseError(path, line_no, f"bad time {parts[0]!r}") from None
            states.append(1 if parts[1] == HIGH else 0)
    if len(times) < 2:
        raise ParseError(path, 0, "truth track needs at least 2 ticks")
    dt = np.diff(times)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12) or dt[0] <= 0:
        raise InvariantViolation(f"{path}: truth ticks must be uniformly spaced")
    return TruthTrack(1.0 / float(dt[0]), np.asarray(states, dtype=np.uint8))
