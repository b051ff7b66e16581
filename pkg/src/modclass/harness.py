"""Monte Carlo experiment driver: model building, paired trials, CSV output."""

from __future__ import annotations

import csv
import dataclasses
import itertools
import json
import logging
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from . import kernels
from .baselines import (
    VdModel,
    build_vd_model,
    kuiper_distances,
    ml_log_likelihoods,
    rck_distances,
    vd_distances,
)
from .bayes import (
    DiscriminantModel,
    RegionProbabilities,
    build_discriminant_model,
    class_statistics,
    discriminant_scores,
    exact_bayes_scores,
    normalize_priors,
)
from .distributions import TestpointSet, theoretical_cdf
from .signal import ChannelConfig, quadrature_feature, standard_constellation
from .testpoints import (
    PairContext,
    default_starts,
    multiclass_testpoints,
    nested_starts,
    optimize_testpoints,
)

__all__ = [
    "CLASSIFIERS",
    "MODEL_DIR_ENV",
    "ExperimentConfig",
    "ConfusionMatrix",
    "ResultRow",
    "MissingModelError",
    "ModelStore",
    "trial_rng",
    "build_models",
    "run_experiment",
    "emit_csv",
    "read_results_csv",
]

log = logging.getLogger(__name__)

CLASSIFIERS = ("bayes", "exact-bayes", "vd", "rck", "kuiper", "ml")
#: classifiers whose decision depends on the testpoint count
_PER_L = ("bayes", "exact-bayes", "rck")
MODEL_DIR_ENV = "MODCLASS_MODEL_DIR"
CROSSINGS = "crossings"


class MissingModelError(FileNotFoundError):
    pass


@dataclass
class ExperimentConfig:
    classes: List[str] = field(default_factory=lambda: ["4QAM", "16QAM"])
    snr_db_grid: List[float] = field(default_factory=lambda: [float(s) for s in range(-4, 9)])
    M: int = 200
    trials: int = 10_000
    L_grid: List[Union[int, str]] = field(default_factory=lambda: list(range(1, 9)))
    classifiers: List[str] = field(default_factory=lambda: ["bayes", "vd", "kuiper", "ml"])
    seed: int = 0
    priors: Optional[List[float]] = None
    model_dir: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        if len(self.classes) < 2:
            raise ValueError("need at least two classes")
        for name in self.classes:
            standard_constellation(name)
        if self.trials < 1 or self.M < 1:
            raise ValueError("trials and M must be >= 1")
        if not self.classifiers:
            raise ValueError("classifier list is empty")
        unknown = set(self.classifiers) - set(CLASSIFIERS)
        if unknown:
            raise ValueError(f"unknown classifiers {sorted(unknown)}; choose from {CLASSIFIERS}")
        for L in self.L_grid:
            if L != CROSSINGS and (not isinstance(L, int) or L < 1):
                raise ValueError(f"L_grid entries must be positive ints or {CROSSINGS!r}, got {L!r}")
        if not self.snr_db_grid:
            raise ValueError("snr_db_grid is empty")
        self.snr_db_grid = [float(s) for s in self.snr_db_grid]
        self.priors = list(normalize_priors(self.priors, len(self.classes)))

    @property
    def N(self) -> int:
        return 2 * self.M

    @property
    def set_name(self) -> str:
        return "-".join(self.classes)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns decided classes."""

    counts: np.ndarray
    names: List[str]
    priors: np.ndarray

    @property
    def pc(self) -> float:
        """Prior-weighted mean of per-class accuracies."""
        rows = self.counts.sum(axis=1)
        acc = np.diag(self.counts) / np.maximum(rows, 1)
        return float(np.sum(acc * self.priors) / np.sum(self.priors[rows > 0]))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def stderr(self) -> float:
        p = self.pc
        return float(np.sqrt(p * (1.0 - p) / self.total))

    @classmethod
    def from_decisions(cls, decisions: Sequence[np.ndarray], names, priors) -> "ConfusionMatrix":
        K = len(names)
        counts = np.zeros((K, K), dtype=np.int64)
        for k, dec in enumerate(decisions):
            counts[k] = np.bincount(dec, minlength=K)
        return cls(counts, list(names), np.asarray(priors, dtype=float))


@dataclass(frozen=True, eq=False)
class ResultRow:
    snr_db: float
    L: int
    classifier: str
    confusion: ConfusionMatrix
    decisions: Optional[List[np.ndarray]] = None

    @property
    def pc(self) -> float:
        return self.confusion.pc

    @property
    def stderr(self) -> float:
        return self.confusion.stderr


def _snr_key(snr_db: float) -> int:
    return zlib.crc32(f"{float(snr_db):.9f}".encode())


def trial_rng(seed: int, snr_db: float, class_idx: int, trial: int) -> np.random.Generator:
    """Independent stream per (seed, SNR value, class, trial).

    Keyed on the SNR value rather than its grid position, so reordering or
    subsetting the grid leaves every cell's data unchanged.
    """
    ss = np.random.SeedSequence([int(seed), _snr_key(snr_db), int(class_idx), int(trial)])
    return np.random.Generator(np.random.PCG64(ss))


def generate_blocks(cfg: ExperimentConfig, snr_db: float) -> List[np.ndarray]:
    """Received blocks for every class, shape (trials, M) each."""
    ch = ChannelConfig(snr_db)
    scale = np.sqrt(ch.noise_variance / 2.0)
    out = []
    for k, name in enumerate(cfg.classes):
        pts = standard_constellation(name).points
        R = np.empty((cfg.trials, cfg.M), dtype=np.complex128)
        for n in range(cfg.trials):
            rng = trial_rng(cfg.seed, snr_db, k, n)
            idx = rng.integers(0, pts.size, size=cfg.M)
            g = rng.standard_normal((cfg.M, 2)) * scale
            R[n] = pts[idx] + (g[:, 0] + 1j * g[:, 1])
        out.append(R)
    return out


class ModelStore:
    """Testpoint/model files for one class set, optionally backed by a directory.

    Layout: ``<root>/<set>/snr_<snr>/L<L>.testpoints.json``,
    ``L<L>.model.json`` and ``vd.json``.
    """

    def __init__(self, cfg: ExperimentConfig, root=None):
        self.cfg = cfg
        self.root = Path(root) if root is not None else None
        self._cache: Dict = {}

    def cell_dir(self, snr_db: float) -> Path:
        return self.root / self.cfg.set_name / f"snr_{snr_db:+.2f}"

    def paths(self, snr_db: float, L: int):
        d = self.cell_dir(snr_db)
        return d / f"L{L}.testpoints.json", d / f"L{L}.model.json"

    def vd_path(self, snr_db: float) -> Path:
        return self.cell_dir(snr_db) / "vd.json"

    def cdfs(self, snr_db: float):
        s2 = ChannelConfig(snr_db).noise_variance
        return [theoretical_cdf(standard_constellation(c), s2) for c in self.cfg.classes]

    def vd_model(self, snr_db: float, build: bool = True) -> VdModel:
        key = ("vd", snr_db)
        if key not in self._cache:
            path = self.vd_path(snr_db) if self.root else None
            if path is not None and path.exists():
                self._cache[key] = VdModel.from_json(path.read_text(encoding="utf-8"))
            elif build:
                self._cache[key] = build_vd_model(self.cdfs(snr_db), snr_db)
            else:
                raise MissingModelError(str(path))
        return self._cache[key]

    def resolve_L(self, snr_db: float, L) -> int:
        return len(self.vd_model(snr_db).testpoints) if L == CROSSINGS else int(L)

    def missing(self, snr_db: float, Ls) -> List[str]:
        if self.root is None:
            return []
        out = [] if self.vd_path(snr_db).exists() else [str(self.vd_path(snr_db))]
        if out:
            return out
        for L in Ls:
            _, mpath = self.paths(snr_db, self.resolve_L(snr_db, L))
            if not mpath.exists():
                out.append(str(mpath))
        return out

    def discriminant(self, snr_db: float, L: int, build: bool = True) -> DiscriminantModel:
        key = ("model", snr_db, L)
        if key in self._cache:
            return self._cache[key]
        mpath = self.paths(snr_db, L)[1] if self.root else None
        if mpath is not None and mpath.exists():
            model = DiscriminantModel.from_json(mpath.read_text(encoding="utf-8"))
        elif build:
            model = self._build(snr_db, L)
        else:
            raise MissingModelError(str(mpath))
        self._cache[key] = model
        return model

    def _build(self, snr_db: float, L: int) -> DiscriminantModel:
        # models for L-1 seed the search for L, so D_B never drops as L grows
        cdfs = self.cdfs(snr_db)
        starts = default_starts(cdfs, L, self.cfg.N)
        if L > 1:
            prev = self.discriminant(snr_db, L - 1)
            starts += nested_starts(prev.testpoints.t, cdfs, self.cfg.N, keep=2)
        if len(cdfs) > 2:
            for A, B in itertools.combinations(cdfs, 2):
                starts.append(optimize_testpoints(PairContext(A, B, self.cfg.N, L, snr_db))[0].t)
        tp, db = multiclass_testpoints(cdfs, self.cfg.N, L, snr_db, init=starts)
        log.info("snr=%+.2f L=%d D_B=%.6f t=%s", snr_db, L, db, np.round(tp.t, 4).tolist())
        stats = [class_statistics(F, tp, self.cfg.N) for F in cdfs]
        return build_discriminant_model(stats, self.cfg.priors, sigma2=cdfs[0].sigma2)

    def save(self, snr_db: float, L: int, force: bool = False) -> bool:
        """Write the (testpoints, model) pair; returns False if it was skipped."""
        tpath, mpath = self.paths(snr_db, L)
        key = ("model", snr_db, L)
        if tpath.exists() and mpath.exists() and not force:
            self._cache[key] = DiscriminantModel.from_json(mpath.read_text(encoding="utf-8"))
            return False
        model = self._build(snr_db, L)
        self._cache[key] = model
        tpath.parent.mkdir(parents=True, exist_ok=True)
        _write_text(tpath, model.testpoints.to_json() + "\n")
        _write_text(mpath, model.to_json() + "\n")
        return True

    def save_vd(self, snr_db: float, force: bool = False) -> bool:
        path = self.vd_path(snr_db)
        if path.exists() and not force:
            return False
        model = build_vd_model(self.cdfs(snr_db), snr_db)
        self._cache[("vd", snr_db)] = model
        path.parent.mkdir(parents=True, exist_ok=True)
        _write_text(path, model.to_json() + "\n")
        return True


def _write_text(path: Path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _default_root(cfg: ExperimentConfig, model_dir):
    if model_dir is not None:
        return model_dir
    if cfg.model_dir is not None:
        return cfg.model_dir
    return os.environ.get(MODEL_DIR_ENV)


def build_models(cfg: ExperimentConfig, model_dir=None, force: bool = False) -> Path:
    """Optimize and persist testpoints, discriminant and VD models for every cell."""
    root = _default_root(cfg, model_dir)
    if root is None:
        raise ValueError(f"no model directory given (pass one or set {MODEL_DIR_ENV})")
    store = ModelStore(cfg, root)
    for snr in cfg.snr_db_grid:
        store.save_vd(snr, force)
        Ls = sorted({store.resolve_L(snr, L) for L in cfg.L_grid})
        for L in Ls:
            try:
                store.save(snr, L, force)
            except ValueError as exc:
                raise type(exc)(f"cell {cfg.set_name} snr={snr:+.2f} L={L}: {exc}") from exc
    return Path(root)


def _decide(name, store, snr, L, Z, R, cfg, cdfs):
    """Per-class decision arrays for one classifier."""
    N = cfg.N
    if name == "ml":
        s2 = cdfs[0].sigma2
        classes = [(standard_constellation(c), s2) for c in cfg.classes]
        return [np.argmax(ml_log_likelihoods(r, classes, cfg.priors), axis=1) for r in R]
    if name == "kuiper":
        return [np.argmin(kuiper_distances(z, cdfs), axis=1) for z in Z]
    if name == "vd":
        vd = store.vd_model(snr)
        X = [_ecdf(z, vd.testpoints.t) for z in Z]
        return [np.argmin(vd_distances(x, vd), axis=1) for x in X]
    model = store.discriminant(snr, L).with_sample_count(N)
    t = model.testpoints.t
    counts = [kernels.region_counts(z, np.ascontiguousarray(t)) for z in Z]
    if name == "bayes":
        return [np.argmax(discriminant_scores(model, np.cumsum(c, 1)[:, :-1] / N), axis=1)
                for c in counts]
    if name == "exact-bayes":
        P = [RegionProbabilities.from_cdf(F, t) for F in cdfs]
        return [np.argmax(exact_bayes_scores(c, P, cfg.priors), axis=1) for c in counts]
    if name == "rck":
        means = [c.mu for c in model.classes]
        return [np.argmin(rck_distances(np.cumsum(c, 1)[:, :-1] / N, means), axis=1)
                for c in counts]
    raise ValueError(f"unknown classifier {name!r}")


def _ecdf(z, t):
    c = kernels.region_counts(z, np.ascontiguousarray(t))
    return np.cumsum(c, axis=1)[:, :-1] / z.shape[1]


def _run_snr(cfg: ExperimentConfig, root, build: bool, snr: float, keep: bool):
    store = ModelStore(cfg, root)
    cdfs = store.cdfs(snr)
    R = generate_blocks(cfg, snr)
    Z = [np.ascontiguousarray(quadrature_feature(r)) for r in R]
    rows = []
    for name in cfg.classifiers:
        if name in _PER_L:
            Ls = []
            for L in cfg.L_grid:
                L = store.resolve_L(snr, L)
                if L not in Ls:
                    Ls.append(L)
        else:
            Ls = [len(store.vd_model(snr).testpoints) if name == "vd" else 0]
        for L in Ls:
            dec = _decide(name, store, snr, L, Z, R, cfg, cdfs)
            cm = ConfusionMatrix.from_decisions(dec, cfg.classes, cfg.priors)
            rows.append(ResultRow(snr, L, name, cm, dec if keep else None))
    return rows


def run_experiment(cfg: ExperimentConfig, model_dir=None, build: bool = True,
                   keep_decisions: bool = False) -> List[ResultRow]:
    """Classify identical trial blocks with every classifier at every grid cell.

    Non-testpoint classifiers (``ml``, ``kuiper``) are reported with ``L = 0``;
    ``vd`` with its pdf-crossing count.
    """
    root = _default_root(cfg, model_dir)
    if root is not None and not build:
        store = ModelStore(cfg, root)
        missing = []
        for snr in cfg.snr_db_grid:
            if not store.vd_path(snr).exists():
                missing.append(str(store.vd_path(snr)))
                continue
            missing += store.missing(snr, cfg.L_grid)
        if missing:
            raise MissingModelError("missing models:\n  " + "\n  ".join(missing))
    if cfg.jobs > 1 and len(cfg.snr_db_grid) > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            parts = list(pool.map(_run_snr, *zip(*[(cfg, root, build, s, keep_decisions)
                                                   for s in cfg.snr_db_grid])))
    else:
        parts = [_run_snr(cfg, root, build, s, keep_decisions) for s in cfg.snr_db_grid]
    return [row for part in parts for row in part]


RESULT_HEADER = ["snr_db", "L", "classifier", "pc", "stderr"]


def emit_csv(results: Sequence[ResultRow], out_dir) -> Path:
    """Write ``results.csv`` and one ``confusion/*.csv`` per row; returns the former."""
    if not results:
        raise ValueError("no results to write")
    out = Path(out_dir)
    try:
        (out / "confusion").mkdir(parents=True, exist_ok=True)
        path = out / "results.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESULT_HEADER)
            for r in results:
                w.writerow([repr(float(r.snr_db)), r.L, r.classifier, repr(r.pc), repr(r.stderr)])
        for r in results:
            cpath = out / "confusion" / f"snr{r.snr_db:+.2f}_L{r.L}_{r.classifier}.csv"
            with open(cpath, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["true\\decided"] + r.confusion.names)
                for name, row in zip(r.confusion.names, r.confusion.counts):
                    w.writerow([name] + [int(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write results under {out}: {exc}") from exc
    return path


def read_results_csv(path) -> List[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [{"snr_db": float(r["snr_db"]), "L": int(r["L"]), "classifier": r["classifier"],
                 "pc": float(r["pc"]), "stderr": float(r["stderr"])}
                for r in csv.DictReader(fh)]
