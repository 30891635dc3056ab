"""Prompt/press labeling, low workload ratio, and profile banding.

A prompt answered by a button press before the next prompt is a Low
instantaneous-workload event; an unanswered prompt is High. The low workload
ratio (LWR) of a journey is #Low / (#Low + #High) over its prompt labels, and
the long-term profile (AWP) follows fixed LWR bands: H when LWR <= 0.55,
M when 0.55 < LWR <= 0.85, L when LWR > 0.85.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass

from .errors import InsufficientDataError, InvariantViolation
from .journey import ChannelSample, Journey, PromptEvent

LOW = "Low"
HIGH = "High"
IWL_STATES = (LOW, HIGH)

AWP_CLASSES = ("L", "M", "H")
AWP_INDEX = {c: i for i, c in enumerate(AWP_CLASSES)}
# tie-breaking and reporting order, highest workload first
AWP_BY_WORKLOAD = ("H", "M", "L")


@dataclass(frozen=True)
class LabeledInstant:
    """A prompt time with its realized Low/High label."""

    t: float
    label: str


@dataclass(frozen=True)
class LabelWindow:
    """Half-width of the interval a prompt label is spread over, seconds.

    The nominal window for a prompt at t is [t - pre_s, t + post_s]; windows
    of adjacent prompts are truncated at the midpoint between the prompts so
    no sample can inherit two labels.
    """

    pre_s: float = 2.0
    post_s: float = 3.0

    def __post_init__(self):
        if self.pre_s < 0 or self.post_s < 0:
            raise InvariantViolation("label window extents must be >= 0")
        if self.pre_s + self.post_s <= 0:
            raise InvariantViolation("label window must have positive width")


def label_prompts(j: Journey) -> list[LabeledInstant]:
    """One label per prompt: Low when a press answered it, else High."""
    return [
        LabeledInstant(p.t_prompt, LOW if p.t_press is not None else HIGH)
        for p in j.prompts
    ]


def attach_presses(
    prompt_times: list[float], press_times: list[float]
) -> tuple[list[PromptEvent], int]:
    """Couple raw press times to the prompt interval [t_prompt, next prompt).

    Returns the prompt events plus the count of ignored presses (before any
    prompt, or redundant extra presses within one interval).
    """
    for a, b in zip(prompt_times, prompt_times[1:]):
        if b <= a:
            raise InvariantViolation("prompt times must strictly increase")
    presses: list[float | None] = [None] * len(prompt_times)
    ignored = 0
    for t in sorted(press_times):
        i = bisect_right(prompt_times, t) - 1
        if i < 0 or presses[i] is not None:
            ignored += 1
        else:
            presses[i] = t
    return [PromptEvent(tp, pr) for tp, pr in zip(prompt_times, presses)], ignored


def lwr(labels) -> float:
    """Low workload ratio: #Low / (#Low + #High)."""
    labels = list(labels)
    if not labels:
        raise InsufficientDataError("lwr undefined for an empty label sequence")
    n_low = 0
    for lab in labels:
        telling = lab.label if isinstance(lab, LabeledInstant) else lab
        if telling == LOW:
            n_low += 1
        elif telling != HIGH:
            raise InvariantViolation(f"unknown label {telling!r}")
    return n_low / len(labels)


def awp_from_lwr(x: float) -> str:
    """Band an LWR value into a profile class. Boundaries go to the
    higher-workload class: 0.55 -> H, 0.85 -> M."""
    if not 0.0 <= x <= 1.0:
        raise InvariantViolation(f"lwr must lie in [0, 1], got {x}")
    if x <= 0.55:
        return "H"
    if x <= 0.85:
        return "M"
    return "L"


def window_spans(
    prompt_times: list[float], w: LabelWindow
) -> list[tuple[float, float, bool]]:
    """Effective per-prompt label intervals (lo, hi, hi_open).

    Each window is the nominal [t - pre_s, t + post_s] clipped to the cell
    between the midpoints with the neighbouring prompts. A clipped right edge
    is open so the boundary sample belongs to the next window; natural edges
    stay closed.
    """
    spans = []
    n = len(prompt_times)
    for i, t in enumerate(prompt_times):
        lo = t - w.pre_s
        hi = t + w.post_s
        hi_open = False
        if i > 0:
            lo = max(lo, (prompt_times[i - 1] + t) / 2.0)
        if i + 1 < n:
            mid = (t + prompt_times[i + 1]) / 2.0
            if mid <= hi:
                hi = mid
                hi_open = True
        spans.append((lo, hi, hi_open))
    return spans


def expand_labels(
    j: Journey, labels: list[LabeledInstant], w: LabelWindow | None = None
) -> list[tuple[ChannelSample, str]]:
    """Spread prompt labels over the samples inside each prompt's window.

    Returns (sample, label) pairs in time order. Every sample carries at most
    one label; samples outside all windows are dropped.
    """
    w = w or LabelWindow()
    if not labels:
        return []
    times = [lab.t for lab in labels]
    for a, b in zip(times, times[1:]):
        if b <= a:
            raise InvariantViolation("labels must be ordered by strictly increasing time")
    sample_times = [s.t for s in j.samples]
    out: list[tuple[ChannelSample, str]] = []
    for lab, (lo, hi, hi_open) in zip(labels, window_spans(times, w)):
        a = bisect_left(sample_times, lo)
        b = bisect_left(sample_times, hi) if hi_open else bisect_right(sample_times, hi)
        for k in range(a, b):
            out.append((j.samples[k], lab.label))
    return out
