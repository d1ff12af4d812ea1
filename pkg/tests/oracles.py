"""Independent reference implementations used only to cross-check the package.

Everything here takes a different computational route from the production
code: general-purpose constrained optimization instead of closed forms,
vertex-hull reasoning instead of alternating projections, finite differences
instead of analytic gradients.
"""

from __future__ import annotations

import numpy as np
from scipy import optimize


def project_box_affine(x0, a, b):
    """Euclidean projection onto {x in [0,1]^d : Ax = b} via SLSQP."""
    x0 = np.asarray(x0, dtype=float)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    d = x0.size

    res = optimize.minimize(
        lambda x: 0.5 * np.sum((x - x0) ** 2),
        np.clip(x0, 0.0, 1.0),
        jac=lambda x: x - x0,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * d,
        constraints=[{"type": "eq", "fun": lambda x: a @ x - b,
                      "jac": lambda x: a}],
        options={"maxiter": 2000, "ftol": 1e-14},
    )
    if not res.success:
        raise RuntimeError(f"SLSQP projection failed: {res.message}")
    return res.x


def project_hull(x0, vertices, rho: float = 1e6):
    """Projection of x0 onto the convex hull of the given vertices.

    Solves min ||V^T lam - x0|| over lam >= 0 with the sum-to-one constraint
    enforced through a heavily weighted penalty row fed to NNLS.
    """
    x0 = np.asarray(x0, dtype=float)
    v = np.asarray(vertices, dtype=float)   # one vertex per row
    design = np.vstack([v.T, rho * np.ones(v.shape[0])])
    rhs = np.concatenate([x0, [rho]])
    lam, _ = optimize.nnls(design, rhs)
    lam = lam / lam.sum()
    return v.T @ lam


def box_least_squares_ref(a, b):
    """Box-constrained least squares via scipy's dedicated solver."""
    res = optimize.lsq_linear(a, b, bounds=(0.0, 1.0), tol=1e-14)
    return res.x


def minimal_ball_brute(points):
    """Exact minimal enclosing ball by exhaustive boundary-subset search.

    Only for small point sets: tries every subset of size <= d+1 as the
    boundary, computes its circumsphere, and keeps the smallest ball that
    encloses everything.
    """
    from itertools import combinations

    pts = np.asarray(points, dtype=float)
    n, d = pts.shape
    best = None
    for size in range(1, min(n, d + 1) + 1):
        for idx in combinations(range(n), size):
            sub = pts[list(idx)]
            p0 = sub[0]
            if size == 1:
                c, r = p0, 0.0
            else:
                q = sub[1:] - p0
                rhs = 0.5 * np.einsum("ij,ij->i", q, q)
                c = p0 + np.linalg.lstsq(q, rhs, rcond=None)[0]
                r = float(np.max(np.linalg.norm(sub - c, axis=1)))
            if np.all(np.linalg.norm(pts - c, axis=1) <= r + 1e-9):
                if best is None or r < best[1]:
                    best = (c, r)
    return best


def finite_difference_grad(fun, x, h: float = 1e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * h)
    return g


def random_satisfiable_system(rng, d, m, margin: float = 0.05):
    """Random (A, b, x_true) with x_true comfortably inside the unit box."""
    a = rng.standard_normal((m, d))
    x_true = rng.uniform(margin, 1.0 - margin, size=d)
    return a, a @ x_true, x_true
