"""Turning one prediction's confidence scores into the adversary's linear system.

Given known parameters, consecutive log-ratios of the scores eliminate the
softmax and leave A x = b' with A = J W_pas, where J takes consecutive
differences of the logits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .model import VflModel

# Scores are clipped below at this value before taking logs.
EPS_CLIP = 1e-12


class SystemError_(Exception):
    """Raised when a constructed system fails its internal consistency checks."""


def difference_matrix(k: int) -> np.ndarray:
    """(k-1) x k matrix whose row m is -1 at column m and +1 at column m+1."""
    if k < 2:
        raise ValueError("need at least two classes")
    j = np.zeros((k - 1, k))
    idx = np.arange(k - 1)
    j[idx, idx] = -1.0
    j[idx, idx + 1] = 1.0
    return j


def log_ratio_scores(c, eps_clip: float = EPS_CLIP) -> np.ndarray:
    """Consecutive log ratios ln(c_{m+1}/c_m) of a probability vector."""
    c = np.asarray(c, dtype=float)
    logc = np.log(np.clip(c, eps_clip, None))
    return logc[1:] - logc[:-1]


@dataclass
class LinearSystem:
    """A x = b' for one prediction, with cached SVD-derived quantities.

    Immutable after construction by convention; the cached pseudoinverse,
    nullspace projector and nullspace basis are consistent with (a, b).
    """

    a: np.ndarray
    b: np.ndarray
    source: str = "clean"
    tau_feas: float = numerics.TAU_FEAS
    _pinv: np.ndarray | None = field(default=None, repr=False)
    _projector: np.ndarray | None = field(default=None, repr=False)
    _nullspace: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.a = numerics.as_matrix(self.a)
        self.b = numerics.as_vector(self.b)

    @property
    def d(self) -> int:
        return self.a.shape[1]

    @property
    def pinv(self) -> np.ndarray:
        if self._pinv is None:
            self._pinv = numerics.pinv(self.a)
        return self._pinv

    @property
    def projector(self) -> np.ndarray:
        if self._projector is None:
            p = np.eye(self.d) - self.pinv @ self.a
            self._projector = 0.5 * (p + p.T)
        return self._projector

    @property
    def nullspace(self) -> np.ndarray:
        if self._nullspace is None:
            self._nullspace = numerics.nullspace_basis(self.a)
        return self._nullspace

    @property
    def rank(self) -> int:
        return self.d - self.nullspace.shape[1]

    @property
    def nullity(self) -> int:
        return self.nullspace.shape[1]

    @property
    def min_norm_solution(self) -> np.ndarray:
        return self.pinv @ self.b

    def polytope(self) -> numerics.PolytopeAffineBox:
        return numerics.PolytopeAffineBox(self.a, self.b, tau_feas=self.tau_feas)

    def is_satisfiable(self, tol: float = 1e-6) -> bool:
        return bool(np.linalg.norm(self.a @ self.min_norm_solution - self.b) <= tol)


def build_system(model: VflModel, y_act, c, source: str = "clean") -> LinearSystem:
    """Assemble A = J W_pas and b' = c' - J W_act y - J b from one prediction.

    For clean scores the system must be satisfiable; a failed check indicates
    a clipping or dimension bug and raises rather than returning silently.
    """
    y_act = np.asarray(y_act, dtype=float).ravel()
    c = np.asarray(c, dtype=float).ravel()
    if c.shape[0] != model.k:
        raise ValueError("confidence vector length must equal the class count")
    j = difference_matrix(model.k)
    a = j @ model.w_pas
    bprime = log_ratio_scores(c) - j @ (model.w_act @ y_act) - j @ model.b
    sys_ = LinearSystem(a=a, b=bprime, source=source)
    if source == "clean" and not sys_.is_satisfiable(tol=1e-6):
        resid = np.linalg.norm(a @ sys_.min_norm_solution - bprime)
        raise SystemError_(
            f"clean-score system is not satisfiable (residual {resid:.3e}); "
            "check score clipping and dimensions")
    return sys_


def transform_system(sys_: LinearSystem, r) -> LinearSystem:
    """Equivalent system (RA, Rb') for invertible R; the solution space is unchanged."""
    r = numerics.as_matrix(r)
    m = sys_.a.shape[0]
    if r.shape != (m, m):
        raise ValueError(f"R must be {m}x{m}")
    if np.linalg.cond(r) > 1e12:
        raise ValueError("R is singular or too ill-conditioned")
    return LinearSystem(a=r @ sys_.a, b=r @ sys_.b, source=sys_.source,
                        tau_feas=sys_.tau_feas)
