"""Convex-minimization front end over the inclusion solver.

The target problems minimize

    sum_k (ell_k o N_k) [inf-conv] (g_k o M_k) (sum_i L_{k,i} x_i - r_k)
    + sum_i (f_i(x_i) - <x_i, z_i>) + phi(x_1, ..., x_m)

where every f_i, g_k, ell_k is prox-describable and phi is smooth.  Mapping
subdifferentials to the system operators (A_i from f_i, B_k from g_k, D_k
from ell_k and the coupling from grad phi) turns the splitting iteration
into a fully proximal scheme for this objective.

True infimal-convolution values require an inner minimization, so the
measurable objective here is a *surrogate* with an explicit splitting
variable: it upper-bounds the true primal value for every split and matches
it at the optimal split (which the solver's auxiliary x2 blocks converge
to).  The dual surrogate mirrors this with a conjugate split and is
reported on the scale where weak duality reads
``primal_surrogate >= dual_surrogate``.

Existence of solutions and the primal-dual correspondence rest on the usual
qualification conditions (a range condition on the offsets and a relative
interior condition on the conjugate domains); these are preconditions the
instance builder asserts, never verified numerically.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NotComputableError, SpecificationError
from .linops import operator_norm
from .prox import (
    FEASIBILITY_SLACK,
    _assemble_quadratic,
    gradient_coupling,
    make_function,
)
from .system import SpaceLayout, SystemSpec

FD_STEP = 1e-5  # relative central-difference step for gradient spot checks


@dataclass(frozen=True)
class SmoothFunction:
    """A convex differentiable function with a Lipschitz gradient.

    ``lipschitz`` is the asserted gradient Lipschitz constant (it feeds the
    coupling bound, so an upper bound is safe and an underestimate is not).
    """

    dim: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    conjugate_value: Optional[Callable[[np.ndarray], float]] = None
    tag: str = ""


def zero_smooth(dim):
    """phi = 0."""
    def conjugate_value(u):
        return 0.0 if np.all(np.abs(u) <= FEASIBILITY_SLACK) else np.inf

    return SmoothFunction(dim, lambda x: 0.0, lambda x: np.zeros(dim), 0.0,
                          conjugate_value, tag="zero")


def quadratic_smooth(terms, dim):
    """phi(x) = 0.5 sum_k w_k ||T_k x - r_k||^2 with assembled gradient.

    The Lipschitz constant is the sum of ``w_k ||T_k||^2`` with inflated
    norm estimates, a safe upper bound for the true constant
    ``||sum w T'T||``.
    """
    S, u0, c0, ops = _assemble_quadratic({"terms": terms}, dim)
    lipschitz = 0.0
    for op, _r, w in ops:
        lipschitz += w * operator_norm(op).upper_bound ** 2
    quad = make_function("quadratic_fidelity", {"terms": terms}, dim)

    def gradient(x):
        return S @ np.asarray(x, dtype=float) - u0

    return SmoothFunction(dim, quad.value, gradient, float(lipschitz),
                          quad.conjugate_value, tag="quadratic")


def smooth_gradient_defect(phi, trials=10, seed=2):
    """Largest relative central-difference defect of the gradient."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(phi.dim)
        grad = np.asarray(phi.gradient(x))
        fd = np.zeros(phi.dim)
        for j in range(phi.dim):
            h = FD_STEP * (1.0 + abs(x[j]))
            e = np.zeros(phi.dim)
            e[j] = h
            fd[j] = (phi.value(x + e) - phi.value(x - e)) / (2.0 * h)
        worst = max(worst, float(np.linalg.norm(fd - grad))
                    / (1.0 + float(np.linalg.norm(grad))))
    return worst


@dataclass(frozen=True)
class MinimizationSpec:
    """Problem data for the structured convex objective.

    ``f`` has one :class:`~monosplit.prox.ConvexFunction` per primal block,
    ``g``/``ell`` one per k-block (on Y_k and X_k), and the linear maps and
    offsets match the system layout.
    """

    layout: SpaceLayout
    f: list
    phi: SmoothFunction
    g: list
    ell: list
    M: list
    N: list
    L: list
    z: list
    r: list

    def __post_init__(self):
        object.__setattr__(self, "z",
                           [np.asarray(v, dtype=float) for v in self.z])
        object.__setattr__(self, "r",
                           [np.asarray(v, dtype=float) for v in self.r])


def build_system(min_spec):
    """Map the minimization data to a solvable inclusion system.

    Primal operators are subdifferentials of the f_i, the coupling is the
    gradient of phi, and the k-block operators are subdifferentials of g_k
    and ell_k; the resolvents are then proximity operators.
    """
    ms = min_spec
    layout = ms.layout
    total = sum(layout.h_dims)
    if ms.phi.dim != total:
        raise SpecificationError(
            f"phi acts on dim {ms.phi.dim}, layout total is {total}"
        )
    for i, fi in enumerate(ms.f):
        if fi.dim != layout.h_dims[i]:
            raise SpecificationError(f"f[{i}]: dim {fi.dim} != {layout.h_dims[i]}")
    for k in range(layout.s):
        if ms.g[k].dim != layout.y_dims[k]:
            raise SpecificationError(
                f"g[{k}]: dim {ms.g[k].dim} != Y dim {layout.y_dims[k]}"
            )
        if ms.ell[k].dim != layout.x_dims[k]:
            raise SpecificationError(
                f"ell[{k}]: dim {ms.ell[k].dim} != X dim {layout.x_dims[k]}"
            )
    coupling = gradient_coupling(ms.phi.gradient, ms.phi.lipschitz,
                                 layout.h_dims, tag=f"grad_{ms.phi.tag}")
    return SystemSpec(
        layout=layout,
        z=ms.z,
        r=ms.r,
        A=[fi.operator for fi in ms.f],
        C=coupling,
        B=[gk.operator for gk in ms.g],
        D=[lk.operator for lk in ms.ell],
        M=list(ms.M),
        N=list(ms.N),
        L=[list(row) for row in ms.L],
    )


def primal_surrogate(min_spec, x, y):
    """Objective value at primal points ``x`` with explicit splits ``y``.

    ``y`` holds one splitting vector per k-block (in G_k).  The returned
    value upper-bounds the true objective for every split and equals it at
    the optimal split; indicators may make it ``inf``.
    """
    ms = min_spec
    total = 0.0
    for i in range(ms.layout.m):
        total += ms.f[i].value(x[i]) - float(np.dot(x[i], ms.z[i]))
    total += ms.phi.value(np.concatenate(x))
    for k in range(ms.layout.s):
        lx = ms.L[k][0].apply(x[0])
        for i in range(1, ms.layout.m):
            lx = lx + ms.L[k][i].apply(x[i])
        inner = lx - ms.r[k] - np.asarray(y[k], dtype=float)
        total += ms.ell[k].value(ms.N[k].apply(inner))
        total += ms.g[k].value(ms.M[k].apply(y[k]))
        if total == np.inf:
            return np.inf
    return float(total)


def dual_surrogate(min_spec, v, w):
    """Certified lower bound from dual points ``v`` and conjugate split ``w``.

    ``v`` holds one multiplier per k-block (in G_k) and ``w`` one split
    vector per primal block.  The dual objective's infimal convolution is
    upper-bounded through ``w`` and the composed conjugates are resolved
    through the catalog; the result is negated so that weak duality reads
    ``primal_surrogate(x, y) >= dual_surrogate(v, w)``, with equality at an
    optimal quadruple.

    Raises :class:`NotComputableError` when a required conjugate is not
    catalog-expressible (e.g. a composition with a non-orthogonal map).
    """
    ms = min_spec
    if ms.phi.conjugate_value is None:
        raise NotComputableError("conjugate of the smooth part is unavailable")
    total = ms.phi.conjugate_value(np.concatenate(w))
    for i in range(ms.layout.m):
        if ms.f[i].conjugate_value is None:
            raise NotComputableError(f"conjugate of f[{i}] is unavailable")
        u_i = ms.z[i].copy()
        for k in range(ms.layout.s):
            u_i = u_i - ms.L[k][i].adjoint_apply(np.asarray(v[k], dtype=float))
        total += ms.f[i].conjugate_value(u_i - np.asarray(w[i], dtype=float))
        if total == np.inf:
            return -np.inf
    for k in range(ms.layout.s):
        vk = np.asarray(v[k], dtype=float)
        total += _composed_conjugate(ms.ell[k], ms.N[k], vk)
        total += _composed_conjugate(ms.g[k], ms.M[k], vk)
        total += float(np.dot(vk, ms.r[k]))
        if total == np.inf:
            return -np.inf
    return float(-total)


def _composed_conjugate(fn, op, v):
    """Value of ``(fn o op)*`` at v, for identity or orthogonal op."""
    if fn.conjugate_value is None:
        raise NotComputableError(f"conjugate of '{fn.tag}' is unavailable")
    kind = _map_kind(op)
    if kind == "identity":
        return fn.conjugate_value(v)
    if kind == "orthogonal":
        # (fn o Q)* = fn* o Q for orthogonal Q
        return fn.conjugate_value(op.apply(v))
    raise NotComputableError(
        f"conjugate of composition with '{op.tag}' is not catalog-expressible"
    )


def _map_kind(op, probes=3, tol=1e-9):
    """Classify a map as 'identity', 'orthogonal' or 'general' by probing."""
    if op.in_dim != op.out_dim:
        return "general"
    rng = np.random.default_rng(17)
    identity = True
    orthogonal = True
    for _ in range(probes):
        x = rng.standard_normal(op.in_dim)
        nx = np.linalg.norm(x)
        ax = np.asarray(op.apply(x))
        if np.linalg.norm(ax - x) > tol * nx:
            identity = False
        if np.linalg.norm(np.asarray(op.adjoint_apply(ax)) - x) > tol * nx:
            orthogonal = False
        if np.linalg.norm(np.asarray(op.apply(op.adjoint_apply(x))) - x) \
                > tol * nx:
            orthogonal = False
        if not identity and not orthogonal:
            return "general"
    return "identity" if identity else "orthogonal"
