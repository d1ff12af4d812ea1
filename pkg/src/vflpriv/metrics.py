"""Evaluation: per-feature MSE (empirical and closed form), bounds and divergences.

The closed forms tie the min-norm and box-center estimators to second-moment
matrices of the passive features; eigenvalue trace bounds bracket them without
knowing the nullspace orientation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .dataset import Dataset
from .model import TrainConfig, VflModel, VflSplit, predict, train
from .system import EPS_CLIP, LinearSystem, build_system
from .attacks import run_attack

_PSD_SLACK = -1e-8


class MetricsError(Exception):
    """Raised for inconsistent shapes or invalid probability vectors."""


@dataclass
class MomentMatrices:
    """Second moments of the passive features about 0, the box center and the mean."""

    k0: np.ndarray       # E[X X^T]
    k_half: np.ndarray   # E[(X - 1/2)(X - 1/2)^T]
    k_mu: np.ndarray     # covariance about mu
    mu: np.ndarray
    n: int

    def __post_init__(self):
        for name in ("k0", "k_half", "k_mu"):
            m = numerics.as_matrix(getattr(self, name))
            setattr(self, name, 0.5 * (m + m.T))
            if float(np.linalg.eigvalsh(getattr(self, name))[0]) < _PSD_SLACK:
                raise MetricsError(f"{name} is not positive semidefinite")
        self.mu = numerics.as_vector(self.mu)


@dataclass
class MseReport:
    """Closed-form MSE values for one system with their eigenvalue bracket."""

    attack: str
    d: int
    closed_form: float
    lower: float
    upper: float
    mu_lower: float
    empirical: float | None = None
    n: int | None = None

    def __post_init__(self):
        if not (self.lower - 1e-9 <= self.closed_form <= self.upper + 1e-9):
            raise MetricsError(
                f"{self.attack}: closed form {self.closed_form} escapes "
                f"[{self.lower}, {self.upper}]")


def empirical_mse(truths, estimates, d: int | None = None) -> float:
    """(1/(N d)) sum_i ||x_i - x_hat_i||^2 over paired rows."""
    truths = np.atleast_2d(np.asarray(truths, dtype=float))
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    if truths.shape != estimates.shape:
        raise MetricsError("truths and estimates disagree in shape")
    if d is None:
        d = truths.shape[1]
    return float(np.sum((truths - estimates) ** 2) / (truths.shape[0] * d))


def moments(ds: Dataset, feature_subset=None) -> MomentMatrices:
    """Sample moments over all rows, restricted to the given feature columns."""
    if ds.n == 0:
        raise MetricsError("empty dataset")
    cols = list(feature_subset) if feature_subset is not None else list(range(ds.d_t))
    x = ds.x[:, cols]
    n = x.shape[0]
    mu = x.mean(axis=0)
    xc = x - 0.5
    xm = x - mu
    return MomentMatrices(k0=x.T @ x / n, k_half=xc.T @ xc / n,
                          k_mu=xm.T @ xm / n, mu=mu, n=n)


def closed_form_mse(sys_: LinearSystem, mom: MomentMatrices
                          ) -> dict[str, MseReport]:
    """Closed-form MSE of the min-norm (ls) and box-center (half_star) estimators.

    MSE(ls) = Tr((I - A^+A) K0) / d and likewise with K_half for half_star.
    Each is bracketed by sums of the smallest/largest nul(A) eigenvalues of
    the moment matrix, and lower-bounded by Tr((I - A^+A) K_mu) / d.
    """
    d = sys_.d
    proj = sys_.projector
    mu_lower = float(np.trace(proj @ mom.k_mu)) / d
    out = {}
    for attack, km in (("ls", mom.k0), ("half_star", mom.k_half)):
        closed = float(np.trace(proj @ km)) / d
        lower, upper = numerics.von_neumann_bounds(proj, km)
        out[attack] = MseReport(attack=attack, d=d, closed_form=closed,
                                lower=lower / d, upper=upper / d,
                                mu_lower=mu_lower, n=mom.n)
    return out


def _check_prob(p, name: str) -> np.ndarray:
    p = np.asarray(p, dtype=float).ravel()
    if p.size < 2 or np.any(p < -1e-9) or abs(p.sum() - 1.0) > 1e-6:
        raise MetricsError(f"{name} is not a probability vector")
    return np.clip(p, 0.0, None)


def kl_divergence(p, q, eps_clip: float = EPS_CLIP) -> float:
    """D(p || q) in bits; q is clipped below at eps_clip."""
    p = _check_prob(p, "p")
    q = np.clip(_check_prob(q, "q"), eps_clip, None)
    mask = p > 0.0
    return float(np.sum(p[mask] * np.log2(p[mask] / q[mask])))


def total_variation(p, q) -> float:
    """Half the l1 distance between two probability vectors; lies in [0, 1]."""
    return float(0.5 * np.sum(np.abs(_check_prob(p, "p") - _check_prob(q, "q"))))


def cross_entropy(p, q, eps_clip: float = EPS_CLIP) -> float:
    """H(p, q) = -sum p log2 q in bits, with q clipped below at eps_clip."""
    p = _check_prob(p, "p")
    q = np.clip(_check_prob(q, "q"), eps_clip, None)
    return float(-np.sum(p * np.log2(q)))


def attack_mse_on_rows(model: VflModel, ds: Dataset, rows, attack: str,
                       rng: np.random.Generator | None = None,
                       init: str = "half") -> float:
    """Mean per-feature MSE of one attack over the given sample rows."""
    act = list(model.split.active)
    pas = list(model.split.passive)
    truths, estimates = [], []
    for i in rows:
        y_act = ds.x[i, act]
        x_pas = ds.x[i, pas]
        c = predict(model, y_act, x_pas)
        sys_ = build_system(model, y_act, c)
        est = run_attack(attack, sys_, model=model, y_act=y_act, c=c,
                         rng=rng, init=init)
        truths.append(x_pas)
        estimates.append(est.x_hat)
    return empirical_mse(np.array(truths), np.array(estimates))


def average_over_space(ds: Dataset, d: int, attack: str, n_pred: int = 1000,
                       train_cfg: TrainConfig | None = None, seed: int = 0) -> float:
    """Mean attack MSE over all d_t contiguous passive windows (mod d_t).

    Each window allocates features {s, ..., s+d-1 mod d_t} to the passive
    party, retrains, runs the attack on up to n_pred test predictions and
    averages the d_t resulting MSE values.
    """
    if d > ds.d_t:
        raise MetricsError("passive dimension exceeds the feature count")
    base = train_cfg or TrainConfig()
    values = []
    for start in range(ds.d_t):
        split_cfg = VflSplit.contiguous(ds.d_t, start, d)
        cfg = TrainConfig(learning_rate=base.learning_rate, max_epochs=base.max_epochs,
                          patience=base.patience, tol=base.tol, lam=base.lam,
                          seed=seed + start, val_fraction=base.val_fraction)
        model = train(ds, split_cfg, cfg)
        rng = np.random.default_rng(seed + start)
        test_rows = np.flatnonzero(ds.test_mask)
        rows = test_rows[:n_pred]
        values.append(attack_mse_on_rows(model, ds, rows, attack, rng=rng))
    return float(np.mean(values))


def write_csv(path, header: list[str], rows: list[list]) -> None:
    """Write one result table; every cell is rendered with repr-round-trip floats."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def write_json(path, doc: dict) -> None:
    import json

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
