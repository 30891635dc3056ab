"""Shared builders and hypothesis strategies for the test suite."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from driveload import (
    ChannelSample,
    ChannelSchema,
    Journey,
    LikelihoodTable,
    PromptEvent,
    TransitionMatrix,
)

HIGH = "High"
LOW = "Low"


def flat_table(channel_id, state, lo=0.0, hi=1.0, n_grid=64):
    """Uninformative constant density integrating to exactly one."""
    grid = np.linspace(lo, hi, n_grid)
    density = np.full(n_grid, 1.0 / (hi - lo))
    return LikelihoodTable(
        channel_id=channel_id, state=state, grid=grid, density=density, bandwidth=0.1
    )


def flat_tables(channel_ids, lo=0.0, hi=1.0):
    """Flat Low/High table pair for each channel."""
    return {
        (cid, state): flat_table(cid, state, lo, hi)
        for cid in channel_ids
        for state in (LOW, HIGH)
    }


def simple_schema(channel_ids=("a", "b"), lo=-1e6, hi=1e6):
    return [ChannelSchema(cid, "unit", lo, hi) for cid in channel_ids]


def make_journey(
    journey_id="j0",
    sample_rows=(),
    prompts=(),
    contexts=(),
    awp_label=None,
    channel_ids=None,
):
    """Journey from (channel_id, t, value) rows; schema inferred if absent."""
    samples = [ChannelSample(c, t, v) for c, t, v in sample_rows]
    if channel_ids is None:
        seen = []
        for s in samples:
            if s.channel_id not in seen:
                seen.append(s.channel_id)
        channel_ids = seen or ["a"]
    return Journey(
        journey_id=journey_id,
        schema=simple_schema(channel_ids),
        samples=sorted(samples, key=lambda s: (s.t, s.channel_id)),
        prompts=list(prompts),
        contexts=list(contexts),
        awp_label=awp_label,
    )


def prompt(t, pressed):
    return PromptEvent(t, t + 0.2 if pressed else None)


# -- hypothesis strategies ---------------------------------------------------

probabilities = st.floats(
    min_value=0.01, max_value=0.99, allow_nan=False, allow_infinity=False
)

transition_matrices = st.builds(
    lambda ll, hh: TransitionMatrix(ll, hh, "case"), probabilities, probabilities
)

likelihood_pairs = st.tuples(
    st.floats(min_value=1e-6, max_value=1e6),
    st.floats(min_value=1e-6, max_value=1e6),
)

label_lists = st.lists(st.sampled_from([LOW, HIGH]), min_size=1, max_size=60)

score_lists = st.lists(
    st.floats(min_value=0.0, max_value=1.0, allow_nan=False), min_size=1, max_size=60
)
