"""Resolvents, proximity operators and the smooth-coupling wrapper.

Maximally monotone operators enter the solver only through their resolvents
``(gamma, x) -> J_{gamma A}(x)``.  For subdifferentials the resolvent is the
proximity operator, and this module ships a catalog of exact proxes together
with function values and (where known) conjugate values, so the same objects
serve the solver, the objective surrogates and the brute-force checks.

Resolvents of *inverse* operators, which the iteration needs for its dual
blocks, come from the inverse-resolvent identity (:func:`resolvent_of_inverse`)
rather than being separate catalog objects.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigurationError, SpecificationError
from .linops import LinOp, dense_op

# Conjugate-side set membership (dual balls, ranges) tolerates only
# floating-point noise: loosening it would report lower bounds that are not.
FEASIBILITY_SLACK = 1e-9
# Primal indicator *values* are evaluated at solver iterates, which sit
# within stopping-tolerance distance of the set; membership uses this slack.
INDICATOR_VALUE_SLACK = 1e-5
# Range membership for conjugates computed through pseudo-inverses.
CONJUGATE_RANGE_TOL = 1e-6

CATALOG_NAMES = (
    "l1",
    "group_l12",
    "indicator_box",
    "indicator_zero",
    "indicator_affine",
    "quadratic_fidelity",
    "zero_function",
    "scaled_translated",
)


@dataclass(frozen=True)
class ResolventOp:
    """A maximally monotone operator given by its resolvent map.

    ``resolve(gamma, x)`` must equal ``(Id + gamma A)^{-1} x`` for the
    represented operator A; exactness is the supplier's obligation for
    user-provided callables.
    """

    dim: int
    resolve: Callable[[float, np.ndarray], np.ndarray]
    tag: str = ""


@dataclass(frozen=True)
class ConvexFunction:
    """A proper convex function bundled with its prox and optional conjugate.

    ``value`` may return ``inf`` (indicators).  ``conjugate_value`` is None
    when the conjugate is not catalog-expressible.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    operator: ResolventOp
    conjugate_value: Optional[Callable[[np.ndarray], float]] = None
    tag: str = ""


@dataclass(frozen=True)
class LipschitzCoupling:
    """A monotone, Lipschitz coupling acting across all primal blocks.

    ``apply`` maps the concatenation of the primal blocks to a vector of the
    same total length; ``block_dims`` records how to slice per-block
    components out of it.  ``nu0`` is the asserted Lipschitz constant.
    """

    total_dim: int
    block_dims: tuple
    apply: Callable[[np.ndarray], np.ndarray]
    nu0: float
    tag: str = ""

    def __post_init__(self):
        if sum(self.block_dims) != self.total_dim:
            raise SpecificationError(
                f"coupling '{self.tag}': block dims {self.block_dims} do not "
                f"sum to total_dim {self.total_dim}"
            )
        if not np.isfinite(self.nu0) or self.nu0 < 0:
            raise SpecificationError(
                f"coupling '{self.tag}': nu0 must be finite and >= 0"
            )


def zero_coupling(block_dims):
    """The zero coupling (nu0 = 0)."""
    total = int(sum(block_dims))
    return LipschitzCoupling(total, tuple(int(d) for d in block_dims),
                             lambda x: np.zeros(total), 0.0, tag="zero")


def gradient_coupling(phi_grad, nu0, block_dims, tag="grad"):
    """Wrap the gradient of a smooth convex function as a coupling.

    The wrapped map is monotone because the function is convex; ``nu0`` is
    the caller-supplied Lipschitz constant of the gradient.
    """
    if nu0 < 0:
        raise SpecificationError("nu0 must be >= 0")
    total = int(sum(block_dims))

    def apply(x):
        x = np.asarray(x, dtype=float)
        if x.shape != (total,):
            raise SpecificationError(
                f"coupling '{tag}': expected vector of length {total}, "
                f"got shape {x.shape}"
            )
        return np.asarray(phi_grad(x), dtype=float)

    return LipschitzCoupling(total, tuple(int(d) for d in block_dims),
                             apply, float(nu0), tag=tag)


def resolvent_of_inverse(op, gamma, x):
    """Resolvent of the inverse operator, ``J_{gamma A^{-1}}(x)``.

    Uses the inverse-resolvent identity
    ``J_{gamma A^{-1}}(x) = x - gamma * J_{A/gamma ...}`` evaluated as
    ``x - gamma * op.resolve(1/gamma, x/gamma)``.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    x = np.asarray(x, dtype=float)
    return x - gamma * np.asarray(op.resolve(1.0 / gamma, x / gamma))


def soft_threshold(x, t):
    """Componentwise shrinkage by t >= 0."""
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def firm_nonexpansiveness_defect(op, trials=50, seed=7):
    """Worst violation of ||Jx-Jy||^2 <= <Jx-Jy, x-y> over random probes."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        gamma = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
        x = rng.standard_normal(op.dim)
        y = rng.standard_normal(op.dim)
        jx = np.asarray(op.resolve(gamma, x))
        jy = np.asarray(op.resolve(gamma, y))
        diff = jx - jy
        worst = max(worst, float(np.dot(diff, diff) - np.dot(diff, x - y)))
    return worst


def coupling_defects(coupling, trials=50, seed=11):
    """Worst Lipschitz and monotonicity violations over random probes.

    Returns ``(lipschitz_defect, monotonicity_defect)`` where the first is
    ``max ||Cx-Cy|| - nu0 ||x-y||`` and the second ``max -( <Cx-Cy, x-y> )``.
    """
    rng = np.random.default_rng(seed)
    lip = 0.0
    mono = 0.0
    for _ in range(trials):
        x = rng.standard_normal(coupling.total_dim)
        y = rng.standard_normal(coupling.total_dim)
        cx = np.asarray(coupling.apply(x))
        cy = np.asarray(coupling.apply(y))
        lip = max(lip, float(np.linalg.norm(cx - cy)
                             - coupling.nu0 * np.linalg.norm(x - y)))
        mono = max(mono, float(-np.dot(cx - cy, x - y)))
    return lip, mono


# ---------------------------------------------------------------------------
# catalog


def prox_catalog(name, params, dim):
    """Build the exact proximity operator for a named convex function.

    See :func:`make_function` for the supported names and parameters; this
    returns only the resolvent part.
    """
    return make_function(name, params, dim).operator


def make_function(name, params, dim):
    """Build a :class:`ConvexFunction` from the catalog.

    Supported names: ``l1``, ``group_l12``, ``indicator_box``,
    ``indicator_zero``, ``indicator_affine``, ``quadratic_fidelity``,
    ``zero_function``, ``scaled_translated``.
    """
    params = dict(params or {})
    if name == "l1":
        return _make_l1(params, dim)
    if name == "group_l12":
        return _make_group_l12(params, dim)
    if name == "indicator_box":
        return _make_indicator_box(params, dim)
    if name == "indicator_zero":
        return _make_indicator_zero(dim)
    if name == "indicator_affine":
        return _make_indicator_affine(params, dim)
    if name == "quadratic_fidelity":
        return _make_quadratic_fidelity(params, dim)
    if name == "zero_function":
        return _make_zero_function(dim)
    if name == "scaled_translated":
        return _make_scaled_translated(params, dim)
    raise ConfigurationError(
        f"unknown prox '{name}'; supported: {', '.join(CATALOG_NAMES)}"
    )


def _weights(params, dim, default=1.0):
    w = np.broadcast_to(np.asarray(params.get("weight", default), dtype=float),
                        (dim,)).copy()
    if np.any(w < 0):
        raise ConfigurationError("weights must be >= 0")
    return w


def _make_l1(params, dim):
    w = _weights(params, dim)

    def value(x):
        return float(np.sum(w * np.abs(x)))

    def resolve(gamma, x):
        return soft_threshold(np.asarray(x, dtype=float), gamma * w)

    def conjugate_value(u):
        slack = FEASIBILITY_SLACK * (1.0 + float(np.max(w, initial=0.0)))
        return 0.0 if np.all(np.abs(u) <= w + slack) else np.inf

    return ConvexFunction(dim, value, ResolventOp(dim, resolve, "l1"),
                          conjugate_value, tag="l1")


def _block_index(params, dim):
    blocks = params.get("blocks")
    if blocks is None:
        raise ConfigurationError("group_l12 requires params['blocks']")
    index = [np.asarray(b, dtype=int) for b in blocks]
    seen = np.zeros(dim, dtype=bool)
    for b in index:
        if b.size == 0:
            raise ConfigurationError("group_l12: empty block")
        if np.any(b < 0) or np.any(b >= dim):
            raise ConfigurationError("group_l12: block index out of range")
        if np.any(seen[b]):
            raise ConfigurationError("group_l12: blocks must be disjoint")
        seen[b] = True
    return index, seen


def _make_group_l12(params, dim):
    index, covered = _block_index(params, dim)
    w = float(params.get("weight", 1.0))
    if w < 0:
        raise ConfigurationError("weights must be >= 0")
    uniform = len({b.size for b in index}) == 1
    idx_mat = np.stack(index) if uniform else None
    # channel layout (block p = [p, nb + p, 2 nb + p, ...] covering all of
    # x) admits a reshape-based path with no gather/scatter
    strided = False
    if uniform and idx_mat.size == dim:
        nb, bs = idx_mat.shape
        pattern = np.arange(nb)[:, None] + nb * np.arange(bs)[None, :]
        strided = bool(np.array_equal(idx_mat, pattern))

    def _block_norms(x):
        if strided:
            xb = x.reshape(idx_mat.shape[1], idx_mat.shape[0])
            return np.sqrt(np.sum(xb * xb, axis=0))
        xb = x[idx_mat]
        return np.sqrt(np.sum(xb * xb, axis=1))

    def value(x):
        x = np.asarray(x, dtype=float)
        if uniform:
            return float(w * np.sum(_block_norms(x)))
        return float(w * sum(np.linalg.norm(x[b]) for b in index))

    def resolve(gamma, x):
        # block shrinkage max(0, 1 - gamma*w/||x_b||) x_b, with the
        # continuous extension 0 at ||x_b|| = 0
        x = np.asarray(x, dtype=float)
        t = gamma * w
        if strided:
            xb = x.reshape(idx_mat.shape[1], idx_mat.shape[0])
            norms = np.sqrt(np.sum(xb * xb, axis=0))
            scale = np.zeros_like(norms)
            nz = norms > 0.0
            scale[nz] = np.maximum(0.0, 1.0 - t / norms[nz])
            return (xb * scale[None, :]).ravel()
        out = x.copy()
        if uniform:
            xb = x[idx_mat]
            norms = np.sqrt(np.sum(xb * xb, axis=1))
            scale = np.zeros_like(norms)
            nz = norms > 0.0
            scale[nz] = np.maximum(0.0, 1.0 - t / norms[nz])
            out[idx_mat] = xb * scale[:, None]
        else:
            for b in index:
                nb = np.linalg.norm(x[b])
                out[b] = 0.0 if nb == 0.0 else max(0.0, 1.0 - t / nb) * x[b]
        return out

    def conjugate_value(u):
        u = np.asarray(u, dtype=float)
        slack = FEASIBILITY_SLACK * (1.0 + w)
        if np.any(np.abs(u[~covered]) > slack):
            return np.inf
        if uniform:
            ok = np.all(_block_norms(u) <= w + slack)
        else:
            ok = all(np.linalg.norm(u[b]) <= w + slack for b in index)
        return 0.0 if ok else np.inf

    return ConvexFunction(dim, value, ResolventOp(dim, resolve, "group_l12"),
                          conjugate_value, tag="group_l12")


def _make_indicator_box(params, dim):
    lo = np.broadcast_to(np.asarray(params.get("lo", 0.0), dtype=float), (dim,)).copy()
    hi = np.broadcast_to(np.asarray(params.get("hi", 1.0), dtype=float), (dim,)).copy()
    if np.any(lo > hi):
        raise ConfigurationError("indicator_box: lo > hi")
    slack = INDICATOR_VALUE_SLACK * (1.0 + float(np.max(np.abs(np.stack([lo, hi])))))

    def value(x):
        x = np.asarray(x, dtype=float)
        inside = np.all(x >= lo - slack) and np.all(x <= hi + slack)
        return 0.0 if inside else np.inf

    def resolve(gamma, x):
        # projection; gamma plays no role for indicators
        return np.clip(np.asarray(x, dtype=float), lo, hi)

    def conjugate_value(u):
        u = np.asarray(u, dtype=float)
        return float(np.sum(np.maximum(lo * u, hi * u)))

    return ConvexFunction(dim, value, ResolventOp(dim, resolve, "box"),
                          conjugate_value, tag="indicator_box")


def _make_indicator_zero(dim):
    def value(x):
        return 0.0 if np.all(np.abs(x) <= INDICATOR_VALUE_SLACK) else np.inf

    def resolve(gamma, x):
        return np.zeros(dim)

    return ConvexFunction(dim, value, ResolventOp(dim, resolve, "ind0"),
                          lambda u: 0.0, tag="indicator_zero")


def _make_indicator_affine(params, dim):
    E = np.asarray(params.get("matrix"), dtype=float)
    if E.ndim != 2 or E.shape[1] != dim:
        raise ConfigurationError(
            f"indicator_affine: matrix must be (p, {dim})"
        )
    d = np.asarray(params.get("offset", np.zeros(E.shape[0])), dtype=float)
    if d.shape != (E.shape[0],):
        raise ConfigurationError("indicator_affine: offset length mismatch")
    pinv = np.linalg.pinv(E)
    x0 = pinv @ d
    if np.linalg.norm(E @ x0 - d) > 1e-8 * (1.0 + np.linalg.norm(d)):
        raise ConfigurationError("indicator_affine: system Ex = d is infeasible")
    row_proj = pinv @ E  # orthogonal projector onto range(E^T)
    slack = INDICATOR_VALUE_SLACK * (1.0 + float(np.linalg.norm(d)))

    def value(x):
        x = np.asarray(x, dtype=float)
        return 0.0 if np.linalg.norm(E @ x - d) <= slack else np.inf

    def resolve(gamma, x):
        x = np.asarray(x, dtype=float)
        return x - row_proj @ x + x0

    def conjugate_value(u):
        # support function: <x0, u> on range(E^T), +inf elsewhere
        u = np.asarray(u, dtype=float)
        off = np.linalg.norm(u - row_proj @ u)
        if off > CONJUGATE_RANGE_TOL * (1.0 + np.linalg.norm(u)):
            return np.inf
        return float(np.dot(x0, u))

    return ConvexFunction(dim, value, ResolventOp(dim, resolve, "affine"),
                          conjugate_value, tag="indicator_affine")


def _assemble_quadratic(params, dim):
    """Shared assembly for 0.5 * sum w_k ||T_k x - r_k||^2.

    Returns (S, u0, c0, terms) with S = sum w T'T, u0 = sum w T'r and
    c0 = 0.5 sum w ||r||^2, so the function is 0.5 x'Sx - <u0, x> + c0.
    """
    terms = []
    for entry in params.get("terms", []):
        if "op" in entry:
            op = entry["op"]
            if not isinstance(op, LinOp):
                raise ConfigurationError("quadratic term 'op' must be a LinOp")
        else:
            op = dense_op(entry["matrix"], tag="T")
        if op.in_dim != dim:
            raise ConfigurationError(
                f"quadratic term: operator in_dim {op.in_dim} != {dim}"
            )
        r = np.asarray(entry.get("offset", np.zeros(op.out_dim)), dtype=float)
        if r.shape != (op.out_dim,):
            raise ConfigurationError("quadratic term: offset length mismatch")
        w = float(entry.get("weight", 1.0))
        if w < 0:
            raise ConfigurationError("quadratic term: weight must be >= 0")
        terms.append((op, r, w))
    S = np.zeros((dim, dim))
    u0 = np.zeros(dim)
    c0 = 0.0
    eye = np.eye(dim)
    for op, r, w in terms:
        T = np.stack([np.asarray(op.apply(eye[j])) for j in range(dim)], axis=1)
        S += w * (T.T @ T)
        u0 += w * (T.T @ r)
        c0 += 0.5 * w * float(np.dot(r, r))
    S = 0.5 * (S + S.T)
    return S, u0, c0, terms


def _make_quadratic_fidelity(params, dim):
    S, u0, c0, terms = _assemble_quadratic(params, dim)
    factor_cache = {}

    def value(x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ S @ x - np.dot(u0, x) + c0)

    def resolve(gamma, x):
        x = np.asarray(x, dtype=float)
        key = float(gamma)
        fac = factor_cache.get(key)
        if fac is None:
            system = np.eye(dim) + key * S
            try:
                fac = cho_factor(system)
            except np.linalg.LinAlgError as exc:  # cannot occur for w >= 0
                raise ConfigurationError(
                    f"quadratic_fidelity: system not positive definite: {exc}"
                ) from exc
            factor_cache[key] = fac
        return cho_solve(fac, x + key * u0)

    S_pinv = np.linalg.pinv(S, rcond=1e-12)
    range_proj = S @ S_pinv

    def conjugate_value(u):
        y = np.asarray(u, dtype=float) + u0
        off = np.linalg.norm(y - range_proj @ y)
        if off > CONJUGATE_RANGE_TOL * (1.0 + np.linalg.norm(y)):
            return np.inf
        return float(0.5 * y @ S_pinv @ y - c0)

    return ConvexFunction(dim, value, ResolventOp(dim, resolve, "quad"),
                          conjugate_value, tag="quadratic_fidelity")


def _make_zero_function(dim):
    def conjugate_value(u):
        return 0.0 if np.all(np.abs(u) <= FEASIBILITY_SLACK) else np.inf

    return ConvexFunction(
        dim,
        lambda x: 0.0,
        ResolventOp(dim, lambda gamma, x: np.asarray(x, dtype=float), "zero"),
        conjugate_value,
        tag="zero_function",
    )


def _make_scaled_translated(params, dim):
    inner = params.get("inner")
    if isinstance(inner, ConvexFunction):
        base = inner
    elif isinstance(inner, dict):
        base = make_function(inner.get("prox"), inner.get("params"), dim)
    else:
        raise ConfigurationError(
            "scaled_translated: 'inner' must be a ConvexFunction or prox spec"
        )
    shift = np.broadcast_to(
        np.asarray(params.get("shift", 0.0), dtype=float), (dim,)
    ).copy()
    scale = float(params.get("scale", 1.0))
    if scale < 0:
        raise ConfigurationError("scaled_translated: scale must be >= 0")
    if scale == 0.0:
        return _make_zero_function(dim)

    def value(x):
        return scale * base.value(np.asarray(x, dtype=float) - shift)

    def resolve(gamma, x):
        # prox_{gamma a f(.-b)}(x) = b + prox_{(gamma a) f}(x - b)
        x = np.asarray(x, dtype=float)
        return shift + np.asarray(base.operator.resolve(gamma * scale, x - shift))

    conjugate_value = None
    if base.conjugate_value is not None:
        def conjugate_value(u):
            u = np.asarray(u, dtype=float)
            return scale * base.conjugate_value(u / scale) + float(np.dot(shift, u))

    return ConvexFunction(dim, value, ResolventOp(dim, resolve, "shifted"),
                          conjugate_value, tag="scaled_translated")
