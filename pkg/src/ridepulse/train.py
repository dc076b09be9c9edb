"""Rider-level split, Adam training loop with truncated BPTT, checkpoints.

Sessions are split by rider, never by session, so validation riders are
entirely unseen. Training iterates one session at a time (sessions vary too
much in length to batch), carrying hidden state across truncated windows
within a session. After every epoch the full validation set is scored in
de-standardized beats per minute and the checkpoint with the best mean
validation RMSE is retained.

Checkpoint file layout (all little-endian):

    magic  b"PTRN"
    u32    format version (currently 1)
    u32    length of the JSON block
    bytes  JSON: config, standardizer, training rider ids, epoch, dims
    f64[]  w_x, w_h, b, v (row-major, gate order i, f, g, o), then c_out
    u32    CRC-32 of all preceding bytes
"""

from __future__ import annotations

import dataclasses
import json
import struct
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import evaluate as _evaluate
from .cleanse import DEFAULT_SPURIOUS_HR_THRESHOLD
from .features import (
    FeatureMatrix,
    Standardizer,
    TooShortSessionError,
    apply_standardizer,
    build_features,
    fit_standardizer,
)
from .ingest import RiderProfile, Session
from .lstm import (
    INPUT_DIM,
    Gradients,
    LstmParams,
    LstmState,
    NumericsError,
    init_params,
    sequence_backward,
    sequence_forward,
    truncated_windows,
)

CHECKPOINT_MAGIC = b"PTRN"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable, truncated or corrupted checkpoint file."""


@dataclass(frozen=True)
class TrainConfig:
    hidden_dim: int = 64
    window: int = 200
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    grad_clip_norm: float = 5.0
    epochs: int = 20
    seed: int = 0
    spurious_hr_threshold: float = DEFAULT_SPURIOUS_HR_THRESHOLD
    validation_rider_fraction: float = 1.0 / 3.0

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.grad_clip_norm <= 0:
            raise ValueError("grad_clip_norm must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 <= self.validation_rider_fraction < 1:
            raise ValueError("validation_rider_fraction must lie in [0, 1)")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_rmse_min: float
    val_rmse_mean: float
    val_rmse_max: float
    wall_seconds: float
    skipped_windows: int = 0


@dataclass
class TrainReport:
    """One record per completed epoch; serialized as JSON lines."""

    records: list[EpochRecord] = field(default_factory=list)

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(dataclasses.asdict(r), sort_keys=True) + "\n" for r in self.records
        )


@dataclass
class Checkpoint:
    config: TrainConfig
    params: LstmParams
    standardizer: Standardizer
    training_rider_ids: tuple[str, ...]
    epoch: int
    version: int = CHECKPOINT_VERSION


def split_by_rider(
    pairs: list[tuple[Session, RiderProfile]], fraction: float, seed: int
) -> tuple[list[tuple[Session, RiderProfile]], list[tuple[Session, RiderProfile]]]:
    """Partition riders (not sessions) into train/validation sets.

    ``fraction`` is the share of riders held out for validation, clamped so
    both sides keep at least one rider. Deterministic under the seed.
    """
    riders = sorted({p.rider_id for _, p in pairs})
    if len(riders) < 2:
        raise ValueError(f"need at least 2 distinct riders to split, got {len(riders)}")
    rng = np.random.default_rng(seed)
    order = [riders[i] for i in rng.permutation(len(riders))]
    n_val = int(round(len(riders) * fraction))
    n_val = min(max(n_val, 1), len(riders) - 1)
    val_riders = set(order[:n_val])
    train = [(s, p) for s, p in pairs if p.rider_id not in val_riders]
    val = [(s, p) for s, p in pairs if p.rider_id in val_riders]
    return train, val


@dataclass
class AdamState:
    """First/second moment estimates shaped like the parameters."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    m_c: float
    v_c: float
    step: int

    @classmethod
    def zeros_like(cls, params: LstmParams) -> "AdamState":
        return cls(
            m=[np.zeros_like(t) for t in params.tensors()],
            v=[np.zeros_like(t) for t in params.tensors()],
            m_c=0.0,
            v_c=0.0,
            step=0,
        )


def clip_gradients(grads: Gradients, max_norm: float) -> float:
    """Scale gradients in place so their global norm is at most max_norm.
    Returns the pre-clip norm."""
    sq = sum(float(t.ravel() @ t.ravel()) for t in grads.tensors()) + grads.c_out**2
    norm = float(np.sqrt(sq))
    if norm > max_norm:
        scale = max_norm / norm
        for t in grads.tensors():
            t *= scale
        grads.c_out *= scale
    return norm


def adam_step(
    params: LstmParams, grads: Gradients, state: AdamState, config: TrainConfig
) -> tuple[LstmParams, AdamState]:
    """One bias-corrected adaptive-moment update, applied in place.

    The caller is expected to clip first; this function rejects non-finite
    gradients outright.
    """
    for t in grads.tensors():
        if not np.isfinite(t).all():
            raise NumericsError("non-finite gradient passed to adam_step")
    if not np.isfinite(grads.c_out):
        raise NumericsError("non-finite gradient passed to adam_step")

    state.step += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1**state.step
    bc2 = 1.0 - b2**state.step
    lr = config.learning_rate
    tensors = params.tensors()
    for k, g in enumerate(grads.tensors()):
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        tensor = tensors[k]
        tensor -= lr * (m / bc1) / (np.sqrt(v / bc2) + config.epsilon)
    state.m_c = b1 * state.m_c + (1 - b1) * grads.c_out
    state.v_c = b2 * state.v_c + (1 - b2) * grads.c_out**2
    params.c_out -= lr * (state.m_c / bc1) / (np.sqrt(state.v_c / bc2) + config.epsilon)
    return params, state


def build_feature_sets(
    train_pairs: list[tuple[Session, RiderProfile]],
    val_pairs: list[tuple[Session, RiderProfile]],
) -> tuple[list[FeatureMatrix], list[FeatureMatrix], Standardizer, list[tuple[str, str]]]:
    """Build raw matrices, fit the standardizer on the training pool only,
    and return standardized train/val matrices plus too-short exclusions."""
    excluded: list[tuple[str, str]] = []

    def build_raw(pairs):
        raws = []
        for session, profile in pairs:
            try:
                raws.append(build_features(session, profile))
            except TooShortSessionError as exc:
                excluded.append((session.session_id, str(exc)))
        return raws

    train_raw = build_raw(train_pairs)
    val_raw = build_raw(val_pairs)
    if not train_raw:
        raise ValueError("empty training set after cleaning and feature building")
    standardizer = fit_standardizer(train_raw)
    train_mats = [apply_standardizer(standardizer, m) for m in train_raw]
    val_mats = [apply_standardizer(standardizer, m) for m in val_raw]
    return train_mats, val_mats, standardizer, excluded


def _train_one_session(
    params: LstmParams, matrix: FeatureMatrix, state: AdamState, config: TrainConfig
) -> tuple[float, int, int]:
    """All windows of one session with state carryover. Returns summed squared
    error weight (loss * masked steps), masked step count, skipped windows."""
    carry = LstmState.zeros(config.hidden_dim)
    loss_weighted = 0.0
    n_masked_total = 0
    skipped = 0
    for start, end in truncated_windows(len(matrix), config.window):
        rows = matrix.rows[start:end]
        targets = matrix.targets[start:end]
        mask = matrix.target_mask[start:end]
        preds, cache, carry = sequence_forward(params, rows, initial_state=carry)
        n_masked = int(mask.sum())
        if n_masked == 0:
            skipped += 1
            continue
        grads, loss = sequence_backward(params, cache, preds, targets, mask)
        clip_gradients(grads, config.grad_clip_norm)
        adam_step(params, grads, state, config)
        loss_weighted += loss * n_masked
        n_masked_total += n_masked
    return loss_weighted, n_masked_total, skipped


def train_model(
    pairs: list[tuple[Session, RiderProfile]], config: TrainConfig
) -> tuple[Checkpoint, TrainReport]:
    """Full training run over an already-cleaned dataset.

    With validation_rider_fraction > 0 the riders are split and the model is
    scored on held-out riders; with 0 no split happens and the training set
    doubles as the validation set (useful for single-session overfit runs).
    The returned checkpoint holds the parameters from the epoch with the
    best mean validation RMSE.
    """
    if not pairs:
        raise ValueError("empty dataset")
    if config.validation_rider_fraction > 0:
        train_pairs, val_pairs = split_by_rider(
            pairs, config.validation_rider_fraction, config.seed
        )
    else:
        train_pairs, val_pairs = list(pairs), list(pairs)

    train_mats, val_mats, standardizer, _excluded = build_feature_sets(train_pairs, val_pairs)
    if not val_mats:
        raise ValueError("no evaluable validation sessions")
    train_mats.sort(key=lambda m: m.session_id)
    val_mats.sort(key=lambda m: m.session_id)

    rng = np.random.default_rng(config.seed)
    params = init_params(INPUT_DIM, config.hidden_dim, rng)
    adam = AdamState.zeros_like(params)
    report = TrainReport()
    best_params = params.copy()
    best_epoch = 0
    best_val_mean = np.inf

    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        loss_weighted = 0.0
        n_masked = 0
        skipped = 0
        for idx in rng.permutation(len(train_mats)):
            lw, nm, sk = _train_one_session(params, train_mats[idx], adam, config)
            loss_weighted += lw
            n_masked += nm
            skipped += sk
        train_loss = loss_weighted / n_masked if n_masked else 0.0

        val_rmses = np.array(
            [_evaluate.matrix_rmse_bpm(params, standardizer, m) for m in val_mats]
        )
        val_mean = float(val_rmses.mean())
        if val_mean < best_val_mean:
            best_val_mean = val_mean
            best_params = params.copy()
            best_epoch = epoch
        report.records.append(
            EpochRecord(
                epoch=epoch,
                train_loss=train_loss,
                val_rmse_min=float(val_rmses.min()),
                val_rmse_mean=val_mean,
                val_rmse_max=float(val_rmses.max()),
                wall_seconds=time.perf_counter() - t0,
                skipped_windows=skipped,
            )
        )

    checkpoint = Checkpoint(
        config=config,
        params=best_params,
        standardizer=standardizer,
        training_rider_ids=tuple(sorted({p.rider_id for _, p in train_pairs})),
        epoch=best_epoch,
    )
    return checkpoint, report


def _standardizer_to_dict(s: Standardizer) -> dict:
    return {
        "feature_mean": s.feature_mean.tolist(),
        "feature_std": s.feature_std.tolist(),
        "target_mean": s.target_mean,
        "target_std": s.target_std,
    }


def _standardizer_from_dict(d: dict) -> Standardizer:
    return Standardizer(
        feature_mean=np.array(d["feature_mean"], dtype=np.float64),
        feature_std=np.array(d["feature_std"], dtype=np.float64),
        target_mean=float(d["target_mean"]),
        target_std=float(d["target_std"]),
    )


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    """Write the binary checkpoint; byte-identical for identical contents."""
    meta = {
        "config": checkpoint.config.to_dict(),
        "standardizer": _standardizer_to_dict(checkpoint.standardizer),
        "training_rider_ids": list(checkpoint.training_rider_ids),
        "epoch": checkpoint.epoch,
        "input_dim": checkpoint.params.input_dim,
        "hidden_dim": checkpoint.params.hidden_dim,
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<I", checkpoint.version)
    blob += struct.pack("<I", len(meta_bytes))
    blob += meta_bytes
    for tensor in checkpoint.params.tensors():
        blob += np.ascontiguousarray(tensor, dtype="<f8").tobytes()
    blob += struct.pack("<d", checkpoint.params.c_out)
    blob += struct.pack("<I", zlib.crc32(bytes(blob)))
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read and verify a checkpoint; round-trips bit-exactly with save."""
    blob = Path(path).read_bytes()
    if len(blob) < 12 + 4:
        raise CheckpointError("truncated checkpoint file")
    if blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad magic bytes {blob[:4]!r}")
    (stored_crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise CheckpointError("checksum mismatch: checkpoint corrupted")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack("<I", blob[8:12])
    off = 12
    try:
        meta = json.loads(blob[off : off + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"bad metadata block: {exc}") from None
    off += meta_len

    d = int(meta["input_dim"])
    h = int(meta["hidden_dim"])
    shapes = [(4 * h, d), (4 * h, h), (4 * h,), (h,)]
    tensors = []
    for shape in shapes:
        n = int(np.prod(shape))
        raw = blob[off : off + 8 * n]
        if len(raw) != 8 * n:
            raise CheckpointError("truncated tensor data")
        tensors.append(np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape))
        off += 8 * n
    (c_out,) = struct.unpack("<d", blob[off : off + 8])
    off += 8
    if off != len(blob) - 4:
        raise CheckpointError("trailing bytes in checkpoint")

    params = LstmParams(
        w_x=tensors[0], w_h=tensors[1], b=tensors[2], v=tensors[3], c_out=c_out
    )
    return Checkpoint(
        config=TrainConfig.from_dict(meta["config"]),
        params=params,
        standardizer=_standardizer_from_dict(meta["standardizer"]),
        training_rider_ids=tuple(meta["training_rider_ids"]),
        epoch=int(meta["epoch"]),
        version=version,
    )
