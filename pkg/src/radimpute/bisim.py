"""Bidirectional sequence-to-sequence imputation of MAR RSSIs and null RPs.

Each survey path is cut into windows of ``seq_len`` records. An encoder walks
the fingerprints (with time-lag decay of its hidden state), a decoder walks
the reference points, and a masked additive attention lets every decoder step
look back at the encoder states of observed cells only. The same network with
its own parameters runs over the reversed window, and the two directions'
completed vectors are averaged.

Inputs are scaled before arithmetic: RSSI ``r -> (r + 100) / 100`` and RP
coordinates min-max over the observed RPs' bounding box. Null cells are
zero-filled; masks keep them out of outputs and loss.
"""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .survey import MAR, MNAR, MNAR_FILL, RSSI_MAX, RSSI_MIN, RadioMap, amend_mask, check_mask

log = logging.getLogger(__name__)

_MAGIC = b"RIMPBSM1"


@dataclass
class BiSimConfig:
    hidden: int = 64
    seq_len: int = 5
    batch_size: int = 32
    epochs: int = 500
    lr: float = 0.001
    seed: int = 0
    h0_std: float = 0.1
    # stop early once the relative change of the epoch loss stays below this
    plateau_tol: float | None = None
    plateau_patience: int = 10


@dataclass(frozen=True)
class Scaler:
    """Affine maps between dBm / meters and the model's [0, 1] units."""

    rp_min: tuple[float, float] = (0.0, 0.0)
    rp_span: tuple[float, float] = (1.0, 1.0)

    @classmethod
    def from_map(cls, rmap: RadioMap) -> "Scaler":
        rps = rmap.rps[rmap.rp_observed]
        if len(rps) == 0:
            return cls()
        lo, hi = rps.min(axis=0), rps.max(axis=0)
        span = np.where(hi - lo > 0, hi - lo, 1.0)
        return cls(tuple(map(float, lo)), tuple(map(float, span)))

    def rssi(self, r):
        return (np.asarray(r, dtype=float) - MNAR_FILL) / 100.0

    def rssi_inv(self, x):
        return np.asarray(x, dtype=float) * 100.0 + MNAR_FILL

    def rp(self, p):
        return (np.asarray(p, dtype=float) - self.rp_min) / self.rp_span

    def rp_inv(self, x):
        return np.asarray(x, dtype=float) * self.rp_span + self.rp_min


# features ------------------------------------------------------------------

def time_lags(times, mask) -> np.ndarray:
    """Per-dimension time since the last observation, by the recurrence
    delta_1 = 0; delta_i = gap if the previous cell was observed, else
    delta_{i-1} + gap."""
    times = np.asarray(times, dtype=float)
    mask = np.asarray(mask)
    delta = np.zeros(mask.shape, dtype=float)
    for i in range(1, len(times)):
        gap = times[i] - times[i - 1]
        delta[i] = np.where(mask[i - 1] == 1, gap, delta[i - 1] + gap)
    return delta


@dataclass
class FeatureSequence:
    """Model inputs for one time-ordered window (all arrays have T rows)."""

    f: np.ndarray       # (T, D) scaled RSSIs, zero where null
    m: np.ndarray       # (T, D) 1 observed / 0 missing
    delta: np.ndarray   # (T, D) time lags in seconds
    l: np.ndarray       # (T, 2) scaled RPs, zero where null
    k: np.ndarray       # (T, 2) all-ones iff RP observed
    times: np.ndarray   # (T,)

    def __len__(self):
        return len(self.times)

    def reversed(self) -> "FeatureSequence":
        times = -self.times[::-1]
        m = self.m[::-1].copy()
        return FeatureSequence(self.f[::-1].copy(), m, time_lags(times, m),
                               self.l[::-1].copy(), self.k[::-1].copy(), times)

    def window(self, start: int, stop: int) -> "FeatureSequence":
        m = self.m[start:stop]
        t = self.times[start:stop]
        return FeatureSequence(self.f[start:stop], m, time_lags(t, m),
                               self.l[start:stop], self.k[start:stop], t)


def prepare_features(rmap: RadioMap, mask, scaler: Scaler | None = None) -> FeatureSequence:
    """Build encoder/decoder inputs for records of one path in time order.

    ``mask`` holds the amended rows (0 = MAR, 1 = observed or MNAR-filled).
    """
    if len(rmap) == 0:
        raise ValueError("prepare_features needs at least one record")
    scaler = scaler or Scaler()
    mask = np.asarray(mask, dtype=float)
    if mask.shape != rmap.fingerprints.shape:
        raise ValueError("mask rows do not match the records")
    if np.any(np.diff(rmap.times) < 0):
        raise ValueError("records must be time-ordered")
    f = np.where(mask == 1, scaler.rssi(np.nan_to_num(rmap.fingerprints, nan=MNAR_FILL)), 0.0)
    obs_rp = rmap.rp_observed
    k = np.repeat(obs_rp[:, None], 2, axis=1).astype(float)
    l = np.where(k == 1, scaler.rp(np.nan_to_num(rmap.rps)), 0.0)
    return FeatureSequence(f, mask, time_lags(rmap.times, mask), l, k, np.array(rmap.times, dtype=float))


def slice_windows(seq: FeatureSequence, seq_len: int) -> list[FeatureSequence]:
    """Consecutive windows of ``seq_len``; a shorter final window is kept."""
    return [seq.window(s, min(s + seq_len, len(seq))) for s in range(0, len(seq), seq_len)]


# parameters ----------------------------------------------------------------

PARAM_NAMES = ("W_f", "b_f", "W_g", "b_g", "enc_W", "enc_b", "dec_W", "dec_b",
               "W_l", "b_l", "W_a", "b_a", "att_Ws", "att_Wh", "att_b", "att_v")


def _param_shapes(n_aps: int, hidden: int) -> dict[str, tuple[int, ...]]:
    D, H = n_aps, hidden
    return {
        "W_f": (H, D), "b_f": (D,),
        "W_g": (D, H), "b_g": (H,),
        "enc_W": (2 * D + H, 4 * H), "enc_b": (4 * H,),
        "dec_W": (2 + D + H, 4 * H), "dec_b": (4 * H,),
        "W_l": (H, 2), "b_l": (2,),
        "W_a": (H, D), "b_a": (D,),
        "att_Ws": (H, H), "att_Wh": (D, H), "att_b": (H,), "att_v": (H, 1),
    }


class BiSimModel:
    """Forward and backward parameter sets plus the fixed initial hidden vector."""

    def __init__(self, n_aps: int, config: BiSimConfig | None = None, scaler: Scaler | None = None):
        self.config = config or BiSimConfig()
        self.n_aps = n_aps
        self.scaler = scaler or Scaler()
        H = self.config.hidden
        rng = np.random.default_rng(self.config.seed)
        shapes = _param_shapes(n_aps, H)
        self.params: dict[str, dict[str, Tensor]] = {}
        for direction in ("fwd", "bwd"):
            group = {}
            for name in PARAM_NAMES:
                shape = shapes[name]
                fan_in = shape[0] if len(shape) == 2 else H
                bound = 1.0 / np.sqrt(fan_in)
                group[name] = Tensor(rng.uniform(-bound, bound, size=shape),
                                     requires_grad=True, name=f"{direction}.{name}")
            self.params[direction] = group
        self.h0 = rng.normal(0.0, self.config.h0_std, size=H)

    def parameters(self) -> list[Tensor]:
        return [self.params[d][n] for d in ("fwd", "bwd") for n in PARAM_NAMES]

    # units -------------------------------------------------------------

    @staticmethod
    def _lstm(W: Tensor, b: Tensor, x: Tensor, h: Tensor, c: Tensor, H: int):
        z = ad.add(ad.matmul(ad.concat([x, h]), W), b)
        i = ad.sigmoid(ad.cols(z, 0, H))
        f = ad.sigmoid(ad.cols(z, H, 2 * H))
        g = ad.tanh(ad.cols(z, 2 * H, 3 * H))
        o = ad.sigmoid(ad.cols(z, 3 * H, 4 * H))
        c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
        return ad.mul(o, ad.tanh(c_new)), c_new

    def encoder_step(self, p, f, m, delta, h_prev, c_prev):
        """One encoder unit; returns ``(f_pred, f_comp, h, c)``."""
        H = self.config.hidden
        f_pred = ad.add(ad.matmul(h_prev, p["W_f"]), p["b_f"])
        f_comp = ad.add(ad.const(m * f), ad.mul(f_pred, ad.const(1.0 - m)))
        gamma = ad.exp(ad.neg(ad.relu(ad.add(ad.matmul(ad.const(delta), p["W_g"]), p["b_g"]))))
        h_dec = ad.mul(h_prev, gamma)
        h, c = self._lstm(p["enc_W"], p["enc_b"], ad.concat([f_comp, ad.const(m)]), h_dec, c_prev, H)
        return f_pred, f_comp, h, c

    def attention_keys(self, p, hs, ms):
        """Masked projections of the encoder states and their MLP contributions."""
        masked = [ad.mul(ad.add(ad.matmul(h, p["W_a"]), p["b_a"]), ad.const(m)) for h, m in zip(hs, ms)]
        keys = [ad.matmul(hm, p["att_Wh"]) for hm in masked]
        return masked, keys

    def attention_step(self, p, s_prev, masked, keys):
        """Context vector and weights for one decoder step."""
        q = ad.add(ad.matmul(s_prev, p["att_Ws"]), p["att_b"])
        scores = [ad.matmul(ad.tanh(ad.add(q, key)), p["att_v"]) for key in keys]
        alpha = ad.softmax(ad.concat(scores))
        ctx = ad.scale_rows(masked[0], ad.take_col(alpha, 0))
        for i in range(1, len(masked)):
            ctx = ad.add(ctx, ad.scale_rows(masked[i], ad.take_col(alpha, i)))
        return ctx, alpha

    def decoder_step(self, p, l, k, s_prev, c_prev, ctx):
        """One decoder unit; returns ``(l_pred, l_comp, s, c)``."""
        H = self.config.hidden
        l_pred = ad.add(ad.matmul(s_prev, p["W_l"]), p["b_l"])
        l_comp = ad.add(ad.const(k * l), ad.mul(l_pred, ad.const(1.0 - k)))
        s, c = self._lstm(p["dec_W"], p["dec_b"], ad.concat([l_comp, ctx]), s_prev, c_prev, H)
        return l_pred, l_comp, s, c

    def run_direction(self, direction: str, batch: dict[str, np.ndarray]) -> dict:
        """Run encoder, attention and decoder over a batch of equal-length windows.

        ``batch`` arrays have shape (B, T, ...). Returns per-step lists.
        """
        p = self.params[direction]
        B, T, _ = batch["f"].shape
        H = self.config.hidden
        h = ad.const(np.tile(self.h0, (B, 1)))
        c = ad.const(np.zeros((B, H)))
        out = {"f_pred": [], "f_comp": [], "l_pred": [], "l_comp": [], "alpha": [], "h": []}
        for i in range(T):
            f_pred, f_comp, h, c = self.encoder_step(p, batch["f"][:, i], batch["m"][:, i],
                                                     batch["delta"][:, i], h, c)
            out["f_pred"].append(f_pred)
            out["f_comp"].append(f_comp)
            out["h"].append(h)
        masked, keys = self.attention_keys(p, out["h"], [batch["m"][:, i] for i in range(T)])
        s = h  # s_0 = h_T
        for j in range(T):
            ctx, alpha = self.attention_step(p, s, masked, keys)
            l_pred, l_comp, s, c = self.decoder_step(p, batch["l"][:, j], batch["k"][:, j], s, c, ctx)
            out["l_pred"].append(l_pred)
            out["l_comp"].append(l_comp)
            out["alpha"].append(alpha)
        return out

    def forward(self, windows: list[FeatureSequence]):
        """Forward and re-aligned backward outputs for equal-length windows."""
        fwd = self.run_direction("fwd", stack(windows))
        bwd = self.run_direction("bwd", stack([w.reversed() for w in windows]))
        for key in bwd:
            bwd[key] = bwd[key][::-1]
        return fwd, bwd

    def loss(self, windows: list[FeatureSequence]) -> Tensor:
        """Forward + backward reconstruction loss plus the cross-direction term."""
        batch = stack(windows)
        fwd, bwd = self.forward(windows)
        T = batch["f"].shape[1]
        terms = []
        for i in range(T):
            m, k = batch["m"][:, i], batch["k"][:, i]
            f, l = ad.const(batch["f"][:, i]), ad.const(batch["l"][:, i])
            terms += [
                ad.masked_mse(fwd["f_pred"][i], f, m), ad.masked_mse(fwd["l_pred"][i], l, k),
                ad.masked_mse(bwd["f_pred"][i], f, m), ad.masked_mse(bwd["l_pred"][i], l, k),
                ad.masked_mse(fwd["f_pred"][i], bwd["f_pred"][i], m),
                ad.masked_mse(fwd["l_pred"][i], bwd["l_pred"][i], k),
            ]
        total = terms[0]
        for t in terms[1:]:
            total = ad.add(total, t)
        return ad.scale(total, 1.0 / T)

    # inference ---------------------------------------------------------

    def run_bidirectional(self, seq: FeatureSequence) -> tuple[np.ndarray, np.ndarray]:
        """Imputed ``(fingerprints, rps)`` in scaled units for one window or path.

        Longer sequences are windowed with ``seq_len`` and reassembled.
        Observed cells equal the inputs exactly.
        """
        fs, ls = [], []
        for w in slice_windows(seq, self.config.seq_len):
            with ad.Tape():
                fwd, bwd = self.forward([w])
            f_hat = np.stack([(a.data[0] + b.data[0]) / 2 for a, b in zip(fwd["f_comp"], bwd["f_comp"])])
            l_hat = np.stack([(a.data[0] + b.data[0]) / 2 for a, b in zip(fwd["l_comp"], bwd["l_comp"])])
            fs.append(np.where(w.m == 1, w.f, f_hat))
            ls.append(np.where(w.k == 1, w.l, l_hat))
        return np.concatenate(fs), np.concatenate(ls)

    # persistence -------------------------------------------------------

    def save(self, path) -> None:
        """Binary checkpoint: magic, little-endian u64 header length, JSON header, f64 data."""
        tensors = [("h0", self.h0)] + [(t.name, t.data) for t in self.parameters()]
        header = {
            "names": [n for n, _ in tensors],
            "shapes": [list(a.shape) for _, a in tensors],
            "seed": self.config.seed,
            "n_aps": self.n_aps,
            "hyperparameters": asdict(self.config),
            "scaler": {"rp_min": list(self.scaler.rp_min), "rp_span": list(self.scaler.rp_span)},
        }
        blob = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            for _, a in tensors:
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "BiSimModel":
        raw = Path(path).read_bytes()
        if raw[:8] != _MAGIC:
            raise ValueError(f"{path}: not a BiSIM checkpoint")
        (n,) = struct.unpack("<Q", raw[8:16])
        header = json.loads(raw[16:16 + n])
        config = BiSimConfig(**header["hyperparameters"])
        scaler = Scaler(tuple(header["scaler"]["rp_min"]), tuple(header["scaler"]["rp_span"]))
        model = cls(header["n_aps"], config, scaler)
        by_name = {t.name: t for t in model.parameters()}
        offset = 16 + n
        for name, shape in zip(header["names"], header["shapes"]):
            size = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(raw, dtype="<f8", count=size, offset=offset).reshape(shape).copy()
            offset += 8 * size
            if name == "h0":
                model.h0 = arr
            else:
                by_name[name].data = arr
        return model


def stack(windows: list[FeatureSequence]) -> dict[str, np.ndarray]:
    lengths = {len(w) for w in windows}
    if len(lengths) != 1:
        raise ValueError(f"windows in a batch must share one length, got {sorted(lengths)}")
    return {key: np.stack([getattr(w, key) for w in windows]) for key in ("f", "m", "delta", "l", "k")}


# training ------------------------------------------------------------------

@dataclass
class TrainResult:
    model: BiSimModel
    losses: list[float] = field(default_factory=list)


def _batches(windows: list[FeatureSequence], batch_size: int, rng: np.random.Generator):
    groups: dict[int, list[int]] = {}
    for i, w in enumerate(windows):
        groups.setdefault(len(w), []).append(i)
    out = []
    for length in sorted(groups, reverse=True):
        idx = np.array(groups[length])[rng.permutation(len(groups[length]))]
        out += [idx[s:s + batch_size] for s in range(0, len(idx), batch_size)]
    return out


def train(sequences: list[FeatureSequence], n_aps: int, config: BiSimConfig | None = None,
          scaler: Scaler | None = None, model: BiSimModel | None = None) -> TrainResult:
    """Fit a model on whole-path feature sequences with Adam.

    Paths are cut into ``seq_len`` windows; batches only mix windows of equal
    length. Training is single-threaded and bit-reproducible for a seed.
    """
    config = config or BiSimConfig()
    if not sequences:
        raise ValueError("train needs at least one sequence")
    model = model or BiSimModel(n_aps, config, scaler)
    windows = [w for s in sequences for w in slice_windows(s, config.seq_len)]
    params = model.parameters()
    opt = ad.Adam(params, lr=config.lr)
    rng = np.random.default_rng(config.seed + 1)
    losses: list[float] = []
    calm = 0
    for epoch in range(config.epochs):
        total, count = 0.0, 0
        for idx in _batches(windows, config.batch_size, rng):
            with ad.Tape():
                loss = model.loss([windows[i] for i in idx])
            opt.step(ad.gradients(loss, params))
            total += float(loss.data) * len(idx)
            count += len(idx)
        losses.append(total / count)
        if epoch % 50 == 0:
            log.info("epoch %d loss %.6f", epoch, losses[-1])
        if config.plateau_tol is not None and len(losses) > 1:
            rel = abs(losses[-2] - losses[-1]) / max(abs(losses[-2]), 1e-12)
            calm = calm + 1 if rel < config.plateau_tol else 0
            if calm >= config.plateau_patience:
                log.info("loss plateaued at epoch %d", epoch)
                break
    return TrainResult(model, losses)


# radio map level -----------------------------------------------------------

def map_sequences(rmap: RadioMap, amended_mask: np.ndarray, scaler: Scaler):
    """One feature sequence per path, with the record indices it covers."""
    out = []
    for idx in rmap.path_slices():
        out.append((idx, prepare_features(rmap.subset(idx), amended_mask[idx], scaler)))
    return out


def needs_model(rmap: RadioMap, mask: np.ndarray) -> bool:
    return bool((np.asarray(mask) == MAR).any() or (~rmap.rp_observed).any())


def impute_radio_map(rmap: RadioMap, mask: np.ndarray, model: BiSimModel | None) -> RadioMap:
    """Dense radio map: MNARs become -100, MARs and null RPs come from the model.

    Imputed RSSIs are rounded to integers and clamped to [-99, 0]; observed
    cells are copied from the input unchanged.
    """
    mask = np.asarray(mask)
    check_mask(rmap, mask)
    filled, amended = amend_mask(rmap, mask)
    if not needs_model(rmap, mask):
        return filled
    if model is None:
        raise ValueError("map has MAR cells or null RPs but no model was given")
    fp = filled.fingerprints.copy()
    rps = filled.rps.copy()
    for idx, seq in map_sequences(filled, amended, model.scaler):
        f_hat, l_hat = model.run_bidirectional(seq)
        f_dbm = np.clip(np.round(model.scaler.rssi_inv(f_hat)), RSSI_MIN, RSSI_MAX)
        block = fp[idx]
        block[amended[idx] == MAR] = f_dbm[amended[idx] == MAR]
        fp[idx] = block
        rp_block = rps[idx]
        missing = np.isnan(rp_block).any(axis=1)
        rp_block[missing] = model.scaler.rp_inv(l_hat[missing])
        rps[idx] = rp_block
    return filled.replace(fingerprints=fp, rps=rps)


def fit_impute(rmap: RadioMap, mask: np.ndarray, config: BiSimConfig | None = None,
               model: BiSimModel | None = None) -> tuple[RadioMap, BiSimModel | None, list[float]]:
    """Train on ``rmap`` (unless ``model`` is given) and return the dense map."""
    config = config or BiSimConfig()
    mask = np.asarray(mask)
    if model is None and not needs_model(rmap, mask):
        return impute_radio_map(rmap, mask, None), None, []
    losses: list[float] = []
    if model is None:
        scaler = Scaler.from_map(rmap)
        filled, amended = amend_mask(rmap, mask)
        seqs = [s for _, s in map_sequences(filled, amended, scaler)]
        result = train(seqs, rmap.n_aps, config, scaler)
        model, losses = result.model, result.losses
    return impute_radio_map(rmap, mask, model), model, losses

