"""Journey data model and line-delimited journey log I/O.

A journey is an ordered event log of scalar samples from named asynchronous
channels, interleaved across channels, plus prompt/press events and optional
context annotations (road-type or profile intervals). Channels arrive at
their own irregular times; there is no common sampling grid.

Log format (UTF-8, one record per line, space separated):

    # free-form provenance comment, ignored by the parser
    J <journey_id> [awp L|M|H]
    H <channel> <unit> <min> <max> <derive_rate 0|1>
    C <kind> <t_start> <t_end> <tag>
    P <t_prompt> [t_press]
    S <channel> <t> <value>

The J line comes first and H lines precede all data records. Timestamps are
seconds; floats are written with repr so a write/read/write cycle is
byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvariantViolation, ParseError

ROAD_TAGS = ("junction", "urban", "country", "motorway")
AWP_TAGS = ("L", "M", "H")
CONTEXT_KINDS = ("road", "awp")

# suffix appended to a channel id for its derived rate-of-change companion
RATE_SUFFIX = ".rate"


@dataclass(frozen=True)
class ChannelSample:
    """One timestamped scalar reading from one named channel."""

    channel_id: str
    t: float
    value: float


@dataclass(frozen=True)
class ChannelSchema:
    """Declared physical range and rate-derivation flag for one channel."""

    channel_id: str
    unit: str
    min: float
    max: float
    derive_rate: bool = False


@dataclass(frozen=True)
class PromptEvent:
    """A workload prompt and the button press answering it, if any.

    A press means the driver reported low workload for this prompt. The
    press must fall at or after the prompt and before the next prompt.
    """

    t_prompt: float
    t_press: float | None = None


@dataclass(frozen=True)
class ContextAnnotation:
    """A tagged time interval of kind 'road' (road type) or 'awp' (profile)."""

    kind: str
    t_start: float
    t_end: float
    tag: str


@dataclass
class Journey:
    journey_id: str
    schema: list[ChannelSchema]
    samples: list[ChannelSample] = field(default_factory=list)
    prompts: list[PromptEvent] = field(default_factory=list)
    contexts: list[ContextAnnotation] = field(default_factory=list)
    awp_label: str | None = None

    def channel_ids(self) -> list[str]:
        return [c.channel_id for c in self.schema]

    def schema_for(self, channel_id: str) -> ChannelSchema:
        for c in self.schema:
            if c.channel_id == channel_id:
                return c
        raise KeyError(channel_id)

    def samples_for(self, channel_id: str) -> list[ChannelSample]:
        return [s for s in self.samples if s.channel_id == channel_id]


def default_schema() -> list[ChannelSchema]:
    """Driving-performance channel set used throughout.

    Seven base channels; all but the two steering-wheel signals are marked
    for rate-of-change derivation, so the derived channel count is 12.
    """
    return [
        ChannelSchema("VehicleSpeed", "mph", 0.0, 200.0, derive_rate=True),
        ChannelSchema("SteeringWheelAngle", "deg", -780.0, 780.0),
        ChannelSchema("SteeringWheelAngleSpeed", "deg/s", 0.0, 1016.0),
        ChannelSchema("PedalPos", "percent", 0.0, 100.0, derive_rate=True),
        ChannelSchema("BrakePressure", "bar", 0.0, 204.6, derive_rate=True),
        ChannelSchema("LateralAcceleration", "m/s2", -11.0, 11.0, derive_rate=True),
        ChannelSchema("YawRate", "deg/s", -100.0, 100.0, derive_rate=True),
    ]


def validate_journey(j: Journey) -> None:
    """Raise InvariantViolation naming the first violated rule, if any."""
    seen = set()
    for c in j.schema:
        if c.channel_id in seen:
            raise InvariantViolation(f"duplicate channel id in schema: {c.channel_id}")
        seen.add(c.channel_id)
        if not c.min < c.max:
            raise InvariantViolation(
                f"channel {c.channel_id}: declared range must satisfy min < max"
            )
    if j.awp_label is not None and j.awp_label not in AWP_TAGS:
        raise InvariantViolation(f"awp label must be one of {AWP_TAGS}: {j.awp_label!r}")

    by_channel = {c.channel_id: c for c in j.schema}
    last_t_channel: dict[str, float] = {}
    last_t = None
    for s in j.samples:
        sch = by_channel.get(s.channel_id)
        if sch is None:
            raise InvariantViolation(f"sample references unknown channel {s.channel_id}")
        if not s.t >= 0.0:
            raise InvariantViolation(f"sample timestamp must be >= 0, got {s.t}")
        if not (sch.min <= s.value <= sch.max):
            raise InvariantViolation(
                f"sample value out of range for {s.channel_id}: "
                f"{s.value} not in [{sch.min}, {sch.max}]"
            )
        if last_t is not None and s.t < last_t:
            raise InvariantViolation("interleaved samples must be time ordered")
        prev = last_t_channel.get(s.channel_id)
        if prev is not None and s.t <= prev:
            raise InvariantViolation(
                f"per-channel timestamps must strictly increase ({s.channel_id} at t={s.t})"
            )
        last_t_channel[s.channel_id] = s.t
        last_t = s.t

    for i, p in enumerate(j.prompts):
        if not p.t_prompt >= 0.0:
            raise InvariantViolation("prompt time must be >= 0")
        if i and p.t_prompt <= j.prompts[i - 1].t_prompt:
            raise InvariantViolation("prompts must be ordered by strictly increasing time")
        if p.t_press is not None:
            if p.t_press < p.t_prompt:
                raise InvariantViolation("press must not precede its prompt")
            if i + 1 < len(j.prompts) and p.t_press >= j.prompts[i + 1].t_prompt:
                raise InvariantViolation("press must precede the next prompt")

    per_kind: dict[str, list[ContextAnnotation]] = {}
    for c in j.contexts:
        if c.kind not in CONTEXT_KINDS:
            raise InvariantViolation(f"context kind must be one of {CONTEXT_KINDS}: {c.kind!r}")
        tags = ROAD_TAGS if c.kind == "road" else AWP_TAGS
        if c.tag not in tags:
            raise InvariantViolation(f"context tag {c.tag!r} invalid for kind {c.kind!r}")
        if not c.t_start < c.t_end:
            raise InvariantViolation("context interval must satisfy t_start < t_end")
        per_kind.setdefault(c.kind, []).append(c)
    for kind, anns in per_kind.items():
        anns = sorted(anns, key=lambda a: a.t_start)
        for a, b in zip(anns, anns[1:]):
            if b.t_start < a.t_end:
                raise InvariantViolation(f"{kind} context intervals must not overlap")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_journey(j: Journey, path, provenance: str | None = None) -> None:
    """Serialize a journey; floats use repr so round trips are byte exact."""
    lines = []
    if provenance:
        lines.append(f"# {provenance}")
    head = f"J {j.journey_id}"
    if j.awp_label is not None:
        head += f" awp {j.awp_label}"
    lines.append(head)
    for c in j.schema:
        flag = 1 if c.derive_rate else 0
        lines.append(f"H {c.channel_id} {c.unit} {_fmt(c.min)} {_fmt(c.max)} {flag}")
    for c in j.contexts:
        lines.append(f"C {c.kind} {_fmt(c.t_start)} {_fmt(c.t_end)} {c.tag}")
    for p in j.prompts:
        if p.t_press is None:
            lines.append(f"P {_fmt(p.t_prompt)}")
        else:
            lines.append(f"P {_fmt(p.t_prompt)} {_fmt(p.t_press)}")
    for s in j.samples:
        lines.append(f"S {s.channel_id} {_fmt(s.t)} {_fmt(s.value)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_float(path, line_no, token, what):
    try:
        return float(token)
    except ValueError:
        raise ParseError(path, line_no, f"bad {what}: {token!r}") from None


def read_journey(path) -> Journey:
    """Parse and validate a journey log. Rejects malformed lines with the
    line number and any invariant violation (range, ordering, overlap)."""
    path = Path(path)
    journey_id = None
    awp_label = None
    schema: list[ChannelSchema] = []
    samples: list[ChannelSample] = []
    prompts: list[PromptEvent] = []
    contexts: list[ContextAnnotation] = []
    data_seen = False

    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "J":
                if journey_id is not None:
                    raise ParseError(path, line_no, "duplicate J header")
                if schema or data_seen:
                    raise ParseError(path, line_no, "J header must come first")
                if len(parts) == 2:
                    journey_id = parts[1]
                elif len(parts) == 4 and parts[2] == "awp":
                    journey_id = parts[1]
                    awp_label = parts[3]
                else:
                    raise ParseError(path, line_no, "expected: J <id> [awp L|M|H]")
            elif tag == "H":
                if journey_id is None:
                    raise ParseError(path, line_no, "H before J header")
                if data_seen:
                    raise ParseError(path, line_no, "H lines must precede data records")
                if len(parts) != 6:
                    raise ParseError(
                        path, line_no, "expected: H <channel> <unit> <min> <max> <0|1>"
                    )
                lo = _parse_float(path, line_no, parts[3], "channel min")
                hi = _parse_float(path, line_no, parts[4], "channel max")
                if parts[5] not in ("0", "1"):
                    raise ParseError(path, line_no, "derive_rate flag must be 0 or 1")
                schema.append(ChannelSchema(parts[1], parts[2], lo, hi, parts[5] == "1"))
            elif tag == "S":
                if journey_id is None:
                    raise ParseError(path, line_no, "S before J header")
                data_seen = True
                if len(parts) != 4:
                    raise ParseError(path, line_no, "expected: S <channel> <t> <value>")
                t = _parse_float(path, line_no, parts[2], "sample time")
                v = _parse_float(path, line_no, parts[3], "sample value")
                samples.append(ChannelSample(parts[1], t, v))
            elif tag == "P":
                if journey_id is None:
                    raise ParseError(path, line_no, "P before J header")
                data_seen = True
                if len(parts) not in (2, 3):
                    raise ParseError(path, line_no, "expected: P <t_prompt> [t_press]")
                tp = _parse_float(path, line_no, parts[1], "prompt time")
                press = None
                if len(parts) == 3:
                    press = _parse_float(path, line_no, parts[2], "press time")
                prompts.append(PromptEvent(tp, press))
            elif tag == "C":
                if journey_id is None:
                    raise ParseError(path, line_no, "C before J header")
                data_seen = True
                if len(parts) != 5:
                    raise ParseError(path, line_no, "expected: C <kind> <t_start> <t_end> <tag>")
                t0 = _parse_float(path, line_no, parts[2], "context start")
                t1 = _parse_float(path, line_no, parts[3], "context end")
                contexts.append(ContextAnnotation(parts[1], t0, t1, parts[4]))
            else:
                raise ParseError(path, line_no, f"unknown record tag {tag!r}")

    if journey_id is None:
        raise ParseError(path, 0, "missing J header")
    j = Journey(journey_id, schema, samples, prompts, contexts, awp_label)
    validate_journey(j)
    return j


def derive_rate_channels(j: Journey) -> Journey:
    """Append a backward-difference rate companion for each marked channel.

    The companion is named <channel>.rate, carries one sample per source
    sample from the second onward with value (v_i - v_{i-1}) / (t_i - t_{i-1}),
    and has an unbounded declared range. Source channels are unmarked in the
    result, so applying this twice is a no-op.
    """
    if not any(c.derive_rate for c in j.schema):
        return j
    new_schema: list[ChannelSchema] = []
    rate_samples: list[ChannelSample] = []
    existing = {c.channel_id for c in j.schema}
    for c in j.schema:
        if not c.derive_rate:
            new_schema.append(c)
            continue
        rate_id = c.channel_id + RATE_SUFFIX
        if rate_id in existing:
            raise InvariantViolation(
                f"cannot derive {rate_id}: a channel with that id already exists"
            )
        new_schema.append(ChannelSchema(c.channel_id, c.unit, c.min, c.max, False))
        new_schema.append(
            ChannelSchema(rate_id, f"{c.unit}/s", float("-inf"), float("inf"), False)
        )
        src = j.samples_for(c.channel_id)
        for a, b in zip(src, src[1:]):
            dt = b.t - a.t
            if dt <= 0.0:
                raise InvariantViolation(
                    f"duplicate timestamp in channel {c.channel_id} at t={b.t}"
                )
            rate_samples.append(ChannelSample(rate_id, b.t, (b.value - a.value) / dt))
    # stable sort keeps source samples ahead of same-instant rate samples
    merged = sorted(j.samples + rate_samples, key=lambda s: s.t)
    return Journey(
        j.journey_id, new_schema, merged, list(j.prompts), list(j.contexts), j.awp_label
    )
