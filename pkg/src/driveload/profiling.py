"""Long-horizon profile classification from journey windows.

Pipeline: linearly interpolate the asynchronous channels (base channels plus
derived rates) onto a uniform 20 Hz grid, slice the grid into fixed-length
non-overlapping windows, robust-scale per channel with statistics learned on
the training split only, featurize each window with a bank of random
dilated convolution kernels pooled by PPV (the proportion of convolution
outputs exceeding a per-feature bias), and score windows with a
ridge-regularized linear classifier whose one-vs-rest margins are softmaxed
onto the (L, M, H) simplex. A journey-level decision fuses its window scores
with a simple moving average before taking the MAP class.

Every kernel has nine taps with weights in {-1, 2}, exactly three 2s, so the
taps sum to zero and the features ignore constant level shifts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np
from sklearn.linear_model import RidgeClassifierCV

from .errors import InsufficientDataError, InvariantViolation
from .journey import Journey, derive_rate_channels
from .labeling import AWP_BY_WORKLOAD, AWP_CLASSES, AWP_INDEX
from .metrics import ConfusionMatrix, macro_f1

# uniform grid rate for interpolation, Hz
GRID_HZ = 20.0

# supported window lengths in grid samples (400 = 20 s at 20 Hz)
DEFAULT_WINDOW_LENGTHS = (100, 200, 400, 600, 1200, 1800)
DEFAULT_WINDOW_LENGTH = 400

KERNEL_TAPS = 9
_N_KERNELS = 84  # all placements of three 2s among nine taps


@dataclass(frozen=True)
class Window:
    """One fixed-length slice of the interpolated channel grid."""

    data: np.ndarray  # (n_channels, length)
    t_start: float
    journey_id: str
    channel_ids: tuple[str, ...]


def sample_grid(journey: Journey):
    """Interpolate all channels (rates derived on demand) onto a shared
    20 Hz grid spanning the journey's sampled extent.

    Returns (times, matrix, channel_ids) with matrix shaped
    (n_channels, n_grid). Interpolation is exact at sample timestamps and
    holds the edge value outside a channel's own extent.
    """
    j = derive_rate_channels(journey)
    channel_ids = tuple(j.channel_ids())
    per_channel: dict[str, tuple[list[float], list[float]]] = {
        cid: ([], []) for cid in channel_ids
    }
    for s in j.samples:
        ts, vs = per_channel[s.channel_id]
        ts.append(s.t)
        vs.append(s.value)
    for cid, (ts, _) in per_channel.items():
        if not ts:
            raise InsufficientDataError(f"channel {cid} has no samples to interpolate")
    t_lo = min(ts[0] for ts, _ in per_channel.values())
    t_hi = max(ts[-1] for ts, _ in per_channel.values())
    n = int(np.floor((t_hi - t_lo) * GRID_HZ)) + 1
    times = t_lo + np.arange(n) / GRID_HZ
    matrix = np.empty((len(channel_ids), n))
    for row, cid in enumerate(channel_ids):
        ts, vs = per_channel[cid]
        matrix[row] = np.interp(times, np.asarray(ts), np.asarray(vs))
    return times, matrix, channel_ids


def slice_windows(times, matrix, channel_ids, journey_id, length: int) -> list[Window]:
    """Non-overlapping length-sized slices; the ragged tail is dropped."""
    if length < 2:
        raise InvariantViolation("window length must be >= 2")
    n = matrix.shape[1]
    out = []
    for k in range(n // length):
        a = k * length
        out.append(
            Window(
                matrix[:, a : a + length].copy(),
                float(times[a]),
                journey_id,
                tuple(channel_ids),
            )
        )
    return out


@dataclass(frozen=True)
class RobustScaleParams:
    """Per-channel median and IQR learned on the training split.

    Channels whose IQR degenerates to zero are flagged constant and only
    median-centered (divisor one), so constant rows scale to all zeros.
    """

    channel_ids: tuple[str, ...]
    median: np.ndarray
    iqr: np.ndarray
    constant: np.ndarray


def fit_robust_scale(windows) -> RobustScaleParams:
    windows = list(windows)
    if not windows:
        raise InsufficientDataError("no windows to fit scaling on")
    channel_ids = windows[0].channel_ids
    for w in windows:
        if w.channel_ids != channel_ids:
            raise InvariantViolation("windows disagree on channel layout")
    pooled = np.concatenate([w.data for w in windows], axis=1)
    median = np.median(pooled, axis=1)
    q75, q25 = np.percentile(pooled, [75.0, 25.0], axis=1)
    iqr = q75 - q25
    constant = iqr <= 0.0
    return RobustScaleParams(channel_ids, median, np.where(constant, 1.0, iqr), constant)


def apply_scale(window: Window, params: RobustScaleParams) -> Window:
    if window.channel_ids != params.channel_ids:
        raise InvariantViolation("window channels do not match scaling params")
    data = (window.data - params.median[:, None]) / params.iqr[:, None]
    return replace(window, data=data)


def preprocess(
    journey: Journey, length: int = DEFAULT_WINDOW_LENGTH, scale: RobustScaleParams | None = None
) -> list[Window]:
    """Interpolate, window, and optionally robust-scale one journey."""
    times, matrix, channel_ids = sample_grid(journey)
    windows = slice_windows(times, matrix, channel_ids, journey.journey_id, length)
    if scale is not None:
        windows = [apply_scale(w, scale) for w in windows]
    return windows


@dataclass(frozen=True)
class KernelBank:
    """Frozen random-kernel feature bank.

    Per feature: a kernel (by id into the fixed 84-kernel set), a dilation,
    a channel subset whose convolutions are summed, a bias quantile level,
    and, once fitted, the realized bias. Dilations are powers of two whose
    dilated span fits the bank's window length.
    """

    seed: int
    n_channels: int
    window_length: int
    kernels: np.ndarray  # (84, 9) tap weights
    kernel_positions: np.ndarray  # (84, 3) indices of the +2 taps
    kernel_ids: np.ndarray  # (n_features,)
    dilations: np.ndarray  # (n_features,)
    channel_sets: tuple  # n_features sorted index arrays
    quantile_levels: np.ndarray  # (n_features,)
    biases: np.ndarray | None = None

    @property
    def n_features(self) -> int:
        return self.kernel_ids.size


def _kernel_set():
    positions = np.array(list(combinations(range(KERNEL_TAPS), 3)), dtype=int)
    kernels = np.full((positions.shape[0], KERNEL_TAPS), -1.0)
    for k, pos in enumerate(positions):
        kernels[k, pos] = 2.0
    return kernels, positions


def build_kernel_bank(
    seed: int, q: int, n_features: int = 2000, window_length: int = DEFAULT_WINDOW_LENGTH
) -> KernelBank:
    """Draw a deterministic feature bank for q channels.

    Biases start unset; fit them on training windows with fit_bank_biases
    before transforming.
    """
    if q < 1:
        raise InvariantViolation("need at least one channel")
    if window_length < KERNEL_TAPS:
        raise InvariantViolation(f"window length must be >= {KERNEL_TAPS}")
    if n_features < 1:
        raise InvariantViolation("need at least one feature")
    kernels, positions = _kernel_set()
    dil = []
    d = 1
    while (KERNEL_TAPS - 1) * d + 1 <= window_length:
        dil.append(d)
        d *= 2
    dil_set = np.array(dil, dtype=int)
    rng = np.random.default_rng(seed)
    kernel_ids = rng.integers(0, _N_KERNELS, size=n_features)
    dilations = dil_set[rng.integers(0, dil_set.size, size=n_features)]
    max_subset = min(q, 4)
    sizes = rng.integers(1, max_subset + 1, size=n_features)
    channel_sets = tuple(
        np.sort(rng.choice(q, size=int(s), replace=False)) for s in sizes
    )
    quantile_levels = rng.uniform(0.05, 0.95, size=n_features)
    return KernelBank(
        seed=seed,
        n_channels=q,
        window_length=window_length,
        kernels=kernels,
        kernel_positions=positions,
        kernel_ids=kernel_ids,
        dilations=dilations,
        channel_sets=channel_sets,
        quantile_levels=quantile_levels,
        biases=None,
    )


def _conv_outputs(x: np.ndarray, positions: np.ndarray, d: int) -> np.ndarray:
    """Valid dilated convolutions of every kernel against every channel.

    x is (..., q, length); the result is (..., q, 84, length - 8 d). Each
    kernel is -1 everywhere plus 3 at its three positions, so the output is
    3 * (sum of the three dilated taps) - (sum of all nine).
    """
    length = x.shape[-1]
    n_out = length - (KERNEL_TAPS - 1) * d
    if n_out < 1:
        raise InvariantViolation(
            f"dilation {d} does not fit a window of length {length}"
        )
    v = np.stack([x[..., j * d : j * d + n_out] for j in range(KERNEL_TAPS)], axis=-2)
    s_all = v.sum(axis=-2)
    out_shape = x.shape[:-1] + (positions.shape[0], n_out)
    out = np.empty(out_shape)
    for k, (p0, p1, p2) in enumerate(positions):
        out[..., k, :] = 3.0 * (v[..., p0, :] + v[..., p1, :] + v[..., p2, :]) - s_all
    return out


def fit_bank_biases(bank: KernelBank, windows) -> KernelBank:
    """Set each feature's bias to its quantile of the feature's convolution
    output on one training window (chosen deterministically per feature)."""
    windows = list(windows)
    if not windows:
        raise InsufficientDataError("no windows to fit biases on")
    for w in windows:
        if w.data.shape != (bank.n_channels, bank.window_length):
            raise InvariantViolation("window shape does not match the bank")
    rng = np.random.default_rng(np.random.SeedSequence([bank.seed, 1]))
    win_idx = rng.integers(0, len(windows), size=bank.n_features)
    biases = np.empty(bank.n_features)
    groups: dict[tuple[int, int], list[int]] = {}
    for f in range(bank.n_features):
        groups.setdefault((int(win_idx[f]), int(bank.dilations[f])), []).append(f)
    for (wi, d), feats in groups.items():
        conv = _conv_outputs(windows[wi].data, bank.kernel_positions, d)
        for f in feats:
            series = conv[bank.channel_sets[f], bank.kernel_ids[f], :].sum(axis=0)
            biases[f] = np.quantile(series, bank.quantile_levels[f])
    return replace(bank, biases=biases)


def transform_many(windows, bank: KernelBank) -> np.ndarray:
    """PPV features for many windows, shape (n_windows, n_features), each
    value in [0, 1]."""
    if bank.biases is None:
        raise InvariantViolation("bank has no biases; call fit_bank_biases first")
    windows = list(windows)
    for w in windows:
        if w.data.shape != (bank.n_channels, bank.window_length):
            raise InvariantViolation("window shape does not match the bank")
    n = len(windows)
    out = np.empty((n, bank.n_features))
    if n == 0:
        return out
    x = np.stack([w.data for w in windows])
    by_dilation: dict[int, list[int]] = {}
    for f in range(bank.n_features):
        by_dilation.setdefault(int(bank.dilations[f]), []).append(f)
    for d, feats in by_dilation.items():
        n_out = bank.window_length - (KERNEL_TAPS - 1) * d
        # chunk windows so the (chunk, q, 84, n_out) conv block stays modest
        per_window = bank.n_channels * _N_KERNELS * n_out
        chunk = max(1, int(25_000_000 / per_window))
        for a in range(0, n, chunk):
            conv = _conv_outputs(x[a : a + chunk], bank.kernel_positions, d)
            for f in feats:
                series = conv[:, bank.channel_sets[f], bank.kernel_ids[f], :].sum(axis=1)
                out[a : a + chunk, f] = (series > bank.biases[f]).mean(axis=1)
    return out


def transform(window: Window, bank: KernelBank) -> np.ndarray:
    """PPV feature vector for one window."""
    return transform_many([window], bank)[0]


@dataclass(frozen=True)
class LinearScorer:
    """Fitted ridge one-vs-rest classifier plus its class order."""

    model: RidgeClassifierCV
    classes: tuple[str, ...]


def train_classifier(features: np.ndarray, labels, alphas=None) -> LinearScorer:
    """Ridge classifier with the regularization strength picked by
    generalized cross-validation over a log grid."""
    labels = list(labels)
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(labels):
        raise InvariantViolation("features must be (n_windows, n_features) aligned with labels")
    present = sorted(set(labels))
    if len(present) < 2:
        raise InsufficientDataError("training needs at least two classes")
    for lab in present:
        if lab not in AWP_CLASSES:
            raise InvariantViolation(f"unknown class label {lab!r}")
    if alphas is None:
        alphas = np.logspace(-3.0, 3.0, 13)
    model = RidgeClassifierCV(alphas=alphas)
    model.fit(X, labels)
    return LinearScorer(model, tuple(model.classes_))


def score_windows(scorer: LinearScorer, features: np.ndarray) -> np.ndarray:
    """Per-window class scores on the (L, M, H) simplex via softmax of the
    one-vs-rest margins. Classes absent from training score zero."""
    X = np.asarray(features, dtype=float)
    margins = scorer.model.decision_function(X)
    if margins.ndim == 1:
        margins = np.stack([-margins, margins], axis=1)
    shifted = margins - margins.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    soft = e / e.sum(axis=1, keepdims=True)
    out = np.zeros((X.shape[0], len(AWP_CLASSES)))
    for ci, cls in enumerate(scorer.classes):
        out[:, AWP_INDEX[cls]] = soft[:, ci]
    return out


def sequence_filter(scores) -> np.ndarray:
    """Fuse a journey's window scores by simple moving average, renormalized
    onto the simplex."""
    s = np.asarray(scores, dtype=float)
    if s.ndim == 1:
        s = s[None, :]
    if s.size == 0:
        raise InsufficientDataError("sequence filter needs at least one score")
    if s.shape[1] != len(AWP_CLASSES):
        raise InvariantViolation("scores must have one column per class")
    if (s < 0).any():
        raise InvariantViolation("scores must be non-negative")
    mean = s.mean(axis=0)
    total = mean.sum()
    if not total > 0:
        raise InvariantViolation("cannot renormalize an all-zero score")
    return mean / total


def decide_awp(score) -> str:
    """MAP class of a score vector; exact ties break toward the
    higher-workload class (H over M over L)."""
    s = np.asarray(score, dtype=float)
    if s.shape != (len(AWP_CLASSES),):
        raise InvariantViolation("score must have one entry per class")
    if not np.isfinite(s).all():
        raise InvariantViolation("score must be finite")
    m = s.max()
    for cls in AWP_BY_WORKLOAD:
        if s[AWP_INDEX[cls]] == m:
            return cls
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class JourneyProfileRow:
    journey_id: str
    label: str
    n_test_windows: int
    window_scores: np.ndarray  # (n_test_windows, 3) pre-fusion
    fused: np.ndarray  # (3,)
    decision: str


@dataclass(frozen=True)
class ProfilingReport:
    length: int
    split: str
    seed: int
    n_features: int
    n_train_windows: int
    n_test_windows: int
    window_accuracy: float
    window_macro_f1: float
    fused_accuracy: float
    fused_macro_f1: float
    rows: tuple[JourneyProfileRow, ...]
    confusion: ConfusionMatrix
    n_unscored_journeys: int


def _split_indices(rng, labels, train_frac):
    """Stratified index split keeping every class represented in training."""
    train: list[int] = []
    test: list[int] = []
    labels = np.asarray(labels)
    for cls in sorted(set(labels.tolist())):
        idx = np.nonzero(labels == cls)[0]
        perm = idx[rng.permutation(idx.size)]
        n_tr = int(round(train_frac * idx.size))
        n_tr = min(max(n_tr, 1), idx.size - 1) if idx.size > 1 else 1
        train.extend(perm[:n_tr].tolist())
        test.extend(perm[n_tr:].tolist())
    return sorted(train), sorted(test)


def run_profiling(
    journeys,
    *,
    length: int = DEFAULT_WINDOW_LENGTH,
    seed: int = 7,
    split: str = "window",
    n_features: int = 2000,
    train_frac: float = 0.8,
) -> ProfilingReport:
    """Train and evaluate the profile classifier on labeled journeys.

    split 'window' pools every journey's windows and splits them 80/20
    (stratified by class); split 'journey' holds out whole journeys instead.
    Scaling, bank biases, and the classifier are fitted on the training
    split only. Fused metrics cover journeys that received at least one
    test window.
    """
    if split not in ("window", "journey"):
        raise InvariantViolation("split must be 'window' or 'journey'")
    if not 0.0 < train_frac < 1.0:
        raise InvariantViolation("train_frac must lie in (0, 1)")
    journeys = list(journeys)
    for j in journeys:
        if j.awp_label is None:
            raise InsufficientDataError(f"journey {j.journey_id} has no awp label")
    all_windows: list[Window] = []
    window_labels: list[str] = []
    journey_of: list[int] = []
    journey_labels = [j.awp_label for j in journeys]
    for ji, j in enumerate(journeys):
        ws = preprocess(j, length)
        all_windows.extend(ws)
        window_labels.extend([j.awp_label] * len(ws))
        journey_of.extend([ji] * len(ws))
    if len(all_windows) < 5:
        raise InsufficientDataError(f"only {len(all_windows)} windows; need more data")

    rng = np.random.default_rng(seed)
    if split == "window":
        train_idx, test_idx = _split_indices(rng, window_labels, train_frac)
    else:
        tr_j, te_j = _split_indices(rng, journey_labels, train_frac)
        tr_j = set(tr_j)
        train_idx = [i for i, ji in enumerate(journey_of) if ji in tr_j]
        test_idx = [i for i, ji in enumerate(journey_of) if ji not in tr_j]
    if not train_idx or not test_idx:
        raise InsufficientDataError("degenerate train/test split")

    scale = fit_robust_scale([all_windows[i] for i in train_idx])
    scaled = [apply_scale(w, scale) for w in all_windows]
    train_windows = [scaled[i] for i in train_idx]
    test_windows = [scaled[i] for i in test_idx]
    y_train = [window_labels[i] for i in train_idx]
    y_test = [window_labels[i] for i in test_idx]

    bank = build_kernel_bank(seed, len(scale.channel_ids), n_features, length)
    bank = fit_bank_biases(bank, train_windows)
    X_train = transform_many(train_windows, bank)
    X_test = transform_many(test_windows, bank)
    scorer = train_classifier(X_train, y_train)
    test_scores = score_windows(scorer, X_test)
    window_pred = [decide_awp(s) for s in test_scores]
    window_accuracy = float(np.mean([p == t for p, t in zip(window_pred, y_test)]))
    window_f1 = macro_f1(y_test, window_pred, AWP_CLASSES)

    rows = []
    fused_truth: list[str] = []
    fused_pred: list[str] = []
    for ji, j in enumerate(journeys):
        mine = [k for k, i in enumerate(test_idx) if journey_of[i] == ji]
        if not mine:
            continue
        fused = sequence_filter(test_scores[mine])
        decision = decide_awp(fused)
        rows.append(
            JourneyProfileRow(
                j.journey_id,
                journey_labels[ji],
                len(mine),
                test_scores[mine],
                fused,
                decision,
            )
        )
        fused_truth.append(journey_labels[ji])
        fused_pred.append(decision)
    if not rows:
        raise InsufficientDataError("no journey received test windows")
    fused_accuracy = float(np.mean([p == t for p, t in zip(fused_pred, fused_truth)]))
    fused_f1 = macro_f1(fused_truth, fused_pred, AWP_CLASSES)
    confusion = ConfusionMatrix.from_pairs(fused_truth, fused_pred, AWP_CLASSES)

    return ProfilingReport(
        length=length,
        split=split,
        seed=seed,
        n_features=n_features,
        n_train_windows=len(train_idx),
        n_test_windows=len(test_idx),
        window_accuracy=window_accuracy,
        window_macro_f1=window_f1,
        fused_accuracy=fused_accuracy,
        fused_macro_f1=fused_f1,
        rows=tuple(rows),
        confusion=confusion,
        n_unscored_journeys=len(journeys) - len(rows),
    )
