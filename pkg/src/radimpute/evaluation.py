"""Metrics and the seeded experiment harness.

One *trial* simulates a survey, builds the radio map, holds out test
queries, differentiates, removes a fraction of observed values as
imputation truth, imputes with every requested imputer and positions the
test queries. Sweeps vary one parameter at a time around a default point.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import bisim
from .differentiator import differentiate_map
from .mapbuild import build_radio_map
from .positioning import DEFAULT_K, baseline_cd, baseline_li, baseline_mean, locate_all
from .simulator import VenueSpec, generate_survey, remove_cells
from .survey import MAR, MNAR_FILL, OBSERVED, RadioMap, SurveyRecord

log = logging.getLogger(__name__)


# metrics -------------------------------------------------------------------

def ape(estimates, truths) -> float:
    """Average Euclidean distance between paired 2-D points."""
    a = np.asarray(estimates, dtype=float).reshape(-1, 2)
    b = np.asarray(truths, dtype=float).reshape(-1, 2)
    if len(a) != len(b):
        raise ValueError(f"{len(a)} estimates for {len(b)} truths")
    if len(a) == 0:
        raise ValueError("APE of an empty set")
    return float(np.hypot(*(a - b).T).mean())


def fingerprint_mae(imputed, truth, cells) -> float:
    """Mean absolute RSSI error over ``cells``, a list of (record, ap) pairs."""
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    if len(cells) == 0:
        raise ValueError("MAE over an empty cell set")
    imp = np.asarray(imputed, dtype=float)[cells[:, 0], cells[:, 1]]
    tru = np.asarray(truth, dtype=float)
    if tru.ndim == 2:
        tru = tru[cells[:, 0], cells[:, 1]]
    return float(np.abs(imp - tru).mean())


def rp_error(imputed, truth, indices) -> float:
    """Mean Euclidean RP error over the held-out record ``indices``."""
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if len(idx) == 0:
        raise ValueError("RP error over an empty index set")
    imp = np.asarray(imputed, dtype=float)[idx]
    tru = np.asarray(truth, dtype=float)
    if len(tru) != len(idx):
        tru = tru[idx]
    return ape(imp, tru)


# configuration ---------------------------------------------------------------

IMPUTERS = ("bisim", "li", "cd", "mean")


@dataclass
class ExperimentConfig:
    venue: str | dict = "mall"
    seeds: list[int] = field(default_factory=lambda: [0])
    epsilon: float = 0.5
    test_fraction: float = 0.1
    differentiator: str = "tac"
    imputers: list[str] = field(default_factory=lambda: list(IMPUTERS))
    estimator: str = "wknn"
    k: int = DEFAULT_K
    # default point of every sweep
    alpha: float = 0.0
    beta: float = 0.2
    eta: float = 0.1
    rp_density: float = 1.0
    # sweep grids; an empty list skips that sweep
    alphas: list[float] = field(default_factory=lambda: [0.0, 0.05, 0.10, 0.15, 0.20])
    betas: list[float] = field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    etas: list[float] = field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3])
    rp_densities: list[float] = field(default_factory=lambda: [0.6, 0.7, 0.8, 0.9, 1.0])
    differentiators: list[str] = field(default_factory=lambda: ["tac", "akm", "elkm", "mar-only", "mnar-only"])
    k_upper: int = 200
    gammas: list[float] = field(default_factory=lambda: list(range(1, 21)))
    bisim: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown experiment keys: {sorted(unknown)}")
        return cls(**obj)

    def venue_spec(self) -> VenueSpec:
        if isinstance(self.venue, dict):
            return VenueSpec.from_json(self.venue)
        return VenueSpec.load(self.venue)

    def bisim_config(self, seed: int) -> bisim.BiSimConfig:
        return bisim.BiSimConfig(**{"seed": seed, **self.bisim})


# one trial -------------------------------------------------------------------

def thin_rps(table: list[SurveyRecord], density: float, seed: int) -> list[SurveyRecord]:
    """Keep a fraction ``density`` of the RP records of a survey table."""
    if density >= 1.0:
        return list(table)
    rp_idx = [i for i, r in enumerate(table) if r.kind == "RP"]
    rng = np.random.default_rng(seed)
    keep = set(rng.choice(rp_idx, size=int(round(density * len(rp_idx))), replace=False).tolist())
    return [r for i, r in enumerate(table) if r.kind != "RP" or i in keep]


def split_test(rmap: RadioMap, fraction: float, seed: int) -> np.ndarray:
    """Sorted indices of the test queries: a fraction of the observed-RP records."""
    cand = np.flatnonzero(rmap.rp_observed)
    n = max(1, int(round(fraction * len(cand))))
    return np.sort(np.random.default_rng(seed).choice(cand, size=n, replace=False))


def nullify(rmap: RadioMap, alpha: float, seed: int) -> RadioMap:
    """Randomly null a fraction ``alpha`` of the observed RSSIs."""
    if alpha <= 0:
        return rmap
    reduced, _ = remove_cells(rmap, alpha, "rssi", seed)
    return reduced


@dataclass
class Prepared:
    """A radio map ready for imputation plus everything needed to score it."""

    rmap: RadioMap                 # test RPs and beta-removed values nulled
    mask: np.ndarray               # differentiator output with removed cells as MAR
    test: np.ndarray
    test_rps: np.ndarray
    rssi_cells: np.ndarray
    rssi_truth: np.ndarray
    rp_index: np.ndarray
    rp_truth: np.ndarray


def _subseed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def prepare(spec: VenueSpec, seed: int, cfg: ExperimentConfig, *, method: str | None = None,
            alpha: float | None = None, beta: float | None = None, eta: float | None = None,
            rp_density: float | None = None) -> Prepared:
    method = method or cfg.differentiator
    alpha = cfg.alpha if alpha is None else alpha
    beta = cfg.beta if beta is None else beta
    eta = cfg.eta if eta is None else eta
    rp_density = cfg.rp_density if rp_density is None else rp_density

    table, _ = generate_survey(spec, seed)
    table = thin_rps(table, rp_density, _subseed(seed, 11))
    rmap = build_radio_map(table, cfg.epsilon, n_aps=spec.n_aps)
    rmap = nullify(rmap, alpha, _subseed(seed, 12))

    test = split_test(rmap, cfg.test_fraction, _subseed(seed, 13))
    test_rps = rmap.rps[test].copy()
    rps = rmap.rps.copy()
    rps[test] = np.nan
    rmap = rmap.replace(rps=rps)

    mask = differentiate_map(rmap, method, eta, topology=spec.walls, k_upper=cfg.k_upper,
                             gammas=cfg.gammas, seed=seed)
    # beta removal happens after MNAR filling: only truly observed values qualify
    rmap, held_rssi = remove_cells(rmap, beta, "rssi", _subseed(seed, 14))
    rmap, held_rp = remove_cells(rmap, beta, "rp", _subseed(seed, 15))
    mask = mask.copy()
    mask[held_rssi.cells[:, 0], held_rssi.cells[:, 1]] = MAR
    return Prepared(rmap, mask, test, test_rps, held_rssi.cells, held_rssi.values, held_rp.cells, held_rp.values)


def impute(prep: Prepared, imputer: str, bisim_config: bisim.BiSimConfig | None = None):
    """Dense map from one imputer; returns ``(dense, model_losses)``."""
    if imputer == "bisim":
        dense, _, losses = bisim.fit_impute(prep.rmap, prep.mask, bisim_config)
        return dense, losses
    if imputer == "li":
        return baseline_li(prep.rmap), []
    if imputer == "cd":
        return baseline_cd(prep.rmap), []
    if imputer == "mean":
        return baseline_mean(prep.rmap), []
    raise ValueError(f"unknown imputer {imputer!r}; expected one of {IMPUTERS}")


def score(prep: Prepared, imputer: str, dense: RadioMap, estimator: str = "wknn", k: int = DEFAULT_K) -> dict:
    """APE of the test queries plus MAE / RP error on the held-out values."""
    out: dict = {}
    if imputer == "cd":
        # case deletion drops the test records (their RPs are null); queries get the -100 fill
        queries = np.where(np.isnan(prep.rmap.fingerprints[prep.test]), MNAR_FILL,
                           prep.rmap.fingerprints[prep.test])
        kept = np.flatnonzero(prep.rmap.rp_observed)
        ref = dense
        if len(prep.rssi_cells):
            # map the held-out cells onto the surviving records
            pos = {int(r): i for i, r in enumerate(kept)}
            cells = [(pos[r], c) for r, c in prep.rssi_cells if r in pos]
            vals = [v for (r, _), v in zip(prep.rssi_cells, prep.rssi_truth) if r in pos]
            if cells:
                out["mae"] = fingerprint_mae(dense.fingerprints, np.array(vals), np.array(cells))
    else:
        train = np.setdiff1d(np.arange(len(dense)), prep.test)
        queries = dense.fingerprints[prep.test]
        ref = dense.subset(train)
        if len(prep.rssi_cells):
            out["mae"] = fingerprint_mae(dense.fingerprints, prep.rssi_truth, prep.rssi_cells)
        if len(prep.rp_index):
            out["rp_error"] = rp_error(dense.rps, prep.rp_truth, prep.rp_index)
    est = locate_all(ref, queries, estimator, min(k, len(ref)))
    out["ape"] = ape(est, prep.test_rps)
    return out


def run_trial(spec: VenueSpec, seed: int, cfg: ExperimentConfig, imputers=None, **point) -> dict:
    """Metrics per imputer for one seed at one parameter point."""
    prep = prepare(spec, seed, cfg, **point)
    results = {}
    for imp in imputers or cfg.imputers:
        dense, losses = impute(prep, imp, cfg.bisim_config(seed))
        results[imp] = score(prep, imp, dense, cfg.estimator, cfg.k)
        if losses:
            results[imp]["epochs"] = len(losses)
            results[imp]["final_loss"] = losses[-1]
    return results


# sweeps --------------------------------------------------------------------------

SWEEPS = {
    "alpha": ("alphas", "differentiators"),
    "eta": ("etas", "differentiators"),
    "beta": ("betas", "imputers"),
    "rp_density": ("rp_densities", "imputers"),
}


def _rows_for(spec, cfg: ExperimentConfig, param: str) -> list[dict]:
    grid_name, axis = SWEEPS[param]
    rows = []
    for value in getattr(cfg, grid_name):
        for seed in cfg.seeds:
            if axis == "differentiators":
                # differentiators are compared through the same BiSIM imputer
                for method in cfg.differentiators:
                    prep = prepare(spec, seed, cfg, method=method, **{param: value})
                    dense, _ = impute(prep, "bisim", cfg.bisim_config(seed))
                    m = score(prep, "bisim", dense, cfg.estimator, cfg.k)
                    rows.append({param: value, "seed": seed, "method": method, **m})
            else:
                res = run_trial(spec, seed, cfg, **{param: value})
                for imp, m in res.items():
                    rows.append({param: value, "seed": seed, "method": imp, **m})
            log.info("sweep %s=%s seed=%d done", param, value, seed)
    return rows


def write_csv(rows: list[dict], path) -> None:
    keys: list[str] = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.6f}" if isinstance(v, float) else v) for k, v in r.items()})


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Run every non-empty sweep; optionally write ``<sweep>.csv`` and ``summary.json``."""
    spec = cfg.venue_spec()
    report: dict = {"config": asdict(cfg), "sweeps": {}}
    for param, (grid_name, _) in SWEEPS.items():
        if not getattr(cfg, grid_name):
            continue
        rows = _rows_for(spec, cfg, param)
        report["sweeps"][param] = rows
    summary = {param: _summarize(rows, param) for param, rows in report["sweeps"].items()}
    report["summary"] = summary
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for param, rows in report["sweeps"].items():
            write_csv(rows, out / f"{param}.csv")
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return report


def _summarize(rows: list[dict], param: str) -> dict:
    """Seed-averaged metrics keyed by method then parameter value."""
    acc: dict = {}
    for r in rows:
        slot = acc.setdefault(r["method"], {}).setdefault(str(r[param]), {})
        for key in ("ape", "mae", "rp_error"):
            if key in r:
                slot.setdefault(key, []).append(r[key])
    return {m: {v: {k: round(float(np.mean(x)), 6) for k, x in metrics.items()} for v, metrics in vals.items()}
            for m, vals in acc.items()}
