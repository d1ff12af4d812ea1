"""Defenses: orthonormal reparameterization (PPS-1) and coordinator logit noise (PPS-2).

PPS-1 retrains (or equivalently reveals transformed parameters) so the
adversary reconstructs Hx instead of x, leaving confidence scores untouched.
PPS-2 perturbs the logits before softmax in ways that never change the
predicted label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .dataset import Dataset
from .model import VflModel, softmax
from .system import LinearSystem, difference_matrix

_ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class OrthonormalTransform:
    """A d x d orthonormal matrix with its provenance tag."""

    h: np.ndarray
    provenance: str = "user"   # neg_identity | optimal_ls | user

    def __post_init__(self):
        h = numerics.as_matrix(self.h)
        object.__setattr__(self, "h", h)
        if h.shape[0] != h.shape[1]:
            raise ValueError("H must be square")
        if np.max(np.abs(h.T @ h - np.eye(h.shape[0]))) > _ORTHO_TOL:
            raise ValueError("H is not orthonormal")

    @staticmethod
    def neg_identity(d: int) -> "OrthonormalTransform":
        return OrthonormalTransform(h=-np.eye(d), provenance="neg_identity")


@dataclass(frozen=True)
class NoisePlan:
    """Noise budget alpha with the scheme id and the optimal logit direction v1."""

    alpha: float
    scheme: str                # s1 | s2 | s3 | class_label
    v1: np.ndarray

    def __post_init__(self):
        if self.alpha < 0.0:
            raise ValueError("noise budget must be non-negative")
        v1 = numerics.as_vector(self.v1)
        if abs(np.linalg.norm(v1) - 1.0) > 1e-10:
            raise ValueError("v1 must be unit norm")
        object.__setattr__(self, "v1", v1)


@dataclass(frozen=True)
class Pps1Result:
    """Transformed dataset plus the affine renormalization x_new = (Hx - off) / scale."""

    dataset: Dataset
    transform: OrthonormalTransform
    scale: np.ndarray
    offset: np.ndarray


def pps1_transform(ds: Dataset, transform: OrthonormalTransform,
                   passive: tuple | None = None) -> Pps1Result:
    """Map the passive feature block x -> Hx, then min-max renormalize to [0, 1].

    For H = -I this reduces to x -> 1 - x. passive defaults to all features.
    """
    h = transform.h
    d = h.shape[0]
    if passive is None:
        passive = tuple(range(d))
    cols = list(passive)
    if len(cols) != d:
        raise ValueError("H size must match the passive feature count")
    block = ds.x[:, cols] @ h.T
    lo = block.min(axis=0)
    hi = block.max(axis=0)
    span = hi - lo
    span[span == 0.0] = 1.0
    x_new = ds.x.copy()
    x_new[:, cols] = (block - lo) / span
    out = Dataset(x=x_new, y=ds.y, k=ds.k, feature_names=ds.feature_names,
                  train_mask=ds.train_mask, test_mask=ds.test_mask)
    return Pps1Result(dataset=out, transform=transform, scale=span, offset=lo)


def pps1_reveal_params(model: VflModel, transform: OrthonormalTransform) -> VflModel:
    """Disclose W_pas H^T (= W_pas H^{-1}) instead of the true passive weights.

    Logits on the transformed features Hx equal the original logits exactly.
    """
    return VflModel(w_act=model.w_act, w_pas=model.w_pas @ transform.h.T,
                    b=model.b, k=model.k, split=model.split, lam=model.lam)


def pps1_reveal_params_renormalized(model: VflModel, res: Pps1Result) -> VflModel:
    """Parameters consistent with the renormalized features of pps1_transform.

    With x_new = (Hx - off) / scale the disclosed weights are
    W_pas H^T diag(scale) and the bias absorbs W_pas H^T off, keeping logits
    on x_new identical to the originals.
    """
    w_h = model.w_pas @ res.transform.h.T
    return VflModel(w_act=model.w_act, w_pas=w_h * res.scale,
                    b=model.b + w_h @ res.offset,
                    k=model.k, split=model.split, lam=model.lam)


def pps1_optimal_h(sys_: LinearSystem, k0) -> OrthonormalTransform:
    """MSE-maximizing orthonormal transform against the min-norm attack.

    With USV^T an SVD of A^+A K0, the maximizer is -VU^T; when A^+A = I
    (fewer passive features than classes) this collapses to -I.
    """
    k0 = numerics.as_matrix(k0)
    proj = sys_.pinv @ sys_.a
    f = numerics.svd(proj @ k0)
    h = -f.v @ f.u.T
    return OrthonormalTransform(h=h, provenance="optimal_ls")


def pps1_h_objective(sys_: LinearSystem, k0, h) -> float:
    """d * MSE of the min-norm attack after revealing W_pas H^{-1}.

    Equals Tr((I + A^+A) K0) - 2 Tr(H A^+A K0); at the optimal H this is
    Tr((I + A^+A) K0) + 2 ||A^+A K0||_*. Divide by d for MSE per feature.
    """
    k0 = numerics.as_matrix(k0)
    proj = sys_.pinv @ sys_.a
    h = numerics.as_matrix(h)
    return float(np.trace((np.eye(sys_.d) + proj) @ k0) - 2.0 * np.trace(h @ proj @ k0))


def pps2_optimal_direction(sys_: LinearSystem, alpha: float, scheme: str = "s1"
                           ) -> NoisePlan:
    """Noise plan along the top right singular vector of A^+ J.

    The achievable MSE inflation under trace budget alpha is sigma_1^2 alpha,
    attained by the correlation matrix alpha v1 v1^T.
    """
    k = sys_.a.shape[0] + 1
    apj = sys_.pinv @ difference_matrix(k)
    f = numerics.svd(apj)
    v1 = f.v[:, 0]
    i_big = int(np.argmax(np.abs(v1)))
    if v1[i_big] < 0:   # fix the SVD sign ambiguity
        v1 = -v1
    return NoisePlan(alpha=float(alpha), scheme=scheme, v1=v1)


def pps2_objective(sys_: LinearSystem, s) -> float:
    """Tr(A^+ J S J^T A^+T): the (unnormalized) MSE inflation for noise correlation S."""
    k = sys_.a.shape[0] + 1
    apj = sys_.pinv @ difference_matrix(k)
    return float(np.trace(apj @ numerics.as_matrix(s) @ apj.T))


def _argmax_set(z: np.ndarray) -> np.ndarray:
    return np.flatnonzero(z == z.max())


def pps2_scheme1(z, plan: NoisePlan) -> np.ndarray:
    """Reveal sigma(z + sqrt(alpha) n/||n||) with the top entries of n forced to max v1.

    The noise direction follows v1 except at the argmax indices of z, which
    receive max_j v1_j so the predicted label cannot change.
    """
    z = numerics.as_vector(z)
    n_tilde = plan.v1.copy()
    n_tilde[_argmax_set(z)] = plan.v1.max()
    n = np.sqrt(plan.alpha) * n_tilde / np.linalg.norm(n_tilde)
    return softmax(z + n)


def pps2_scheme2(z, plan: NoisePlan) -> np.ndarray:
    """Add sqrt(alpha) v1 to the logits, then lift the argmax entries to the new max."""
    z = numerics.as_vector(z)
    z_prime = z + np.sqrt(plan.alpha) * plan.v1
    z_tilde = z_prime.copy()
    z_tilde[_argmax_set(z)] = z_prime.max()
    return softmax(z_tilde)


def pps2_scheme3(z, alpha: float) -> np.ndarray:
    """Reveal sigma((1 - alpha) z + alpha 1): logits shrink toward uniform."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError("scheme-3 alpha must be in [0, 1)")
    z = numerics.as_vector(z)
    return softmax((1.0 - alpha) * z + alpha)


def pps2_class_label(z, eps: float) -> np.ndarray:
    """Reveal (almost) the class label: argmax -> 1-(k-1) eps, the rest -> eps."""
    z = numerics.as_vector(z)
    k = z.size
    if not 0.0 < eps < 1.0 / k:
        raise ValueError("eps must be in (0, 1/k)")
    out = np.full(k, eps)
    out[int(np.argmax(z))] = 1.0 - (k - 1) * eps
    return out


def noise_realization(plan: NoisePlan, rng: np.random.Generator) -> np.ndarray:
    """Draw n = +-sqrt(alpha) v1 with a random sign: correlation exactly alpha v1 v1^T."""
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return sign * np.sqrt(plan.alpha) * plan.v1


def apply_scheme(z, plan_or_param, scheme: str) -> np.ndarray:
    """Dispatch one noisy-score scheme by name."""
    if scheme == "s1":
        return pps2_scheme1(z, plan_or_param)
    if scheme == "s2":
        return pps2_scheme2(z, plan_or_param)
    if scheme == "s3":
        return pps2_scheme3(z, plan_or_param)
    if scheme == "class_label":
        return pps2_class_label(z, plan_or_param)
    raise ValueError(f"unknown scheme {scheme!r}")


def mse_under_noise(sys_: LinearSystem, s, k0) -> float:
    """Closed-form MSE of the min-norm attack under noise correlation S.

    (1/d) Tr((I - A^+A) K0) + (1/d) Tr(A^+ J S J^T A^+T); the second term is
    the non-negative degradation caused by the noisy scores.
    """
    k0 = numerics.as_matrix(k0)
    d = sys_.d
    clean = float(np.trace(sys_.projector @ k0)) / d
    return clean + pps2_objective(sys_, s) / d
