"""Image-recovery instance builder: operators, regularizers, observations.

Implements the desk-scale multi-observation recovery model

    minimize over x in [lo, hi]^K :
        sum_k w_k/2 ||r_k - T_k x||^2 + gamma ||W x||_1
        + (alpha ||.||_{1,2} o grad) [inf-conv] (beta ||.||_{1,2} o grad2)(x)

with first/second-order forward differences under replicate (Neumann)
boundary, a single-level orthonormal Haar analysis operator, and dense blur
matrices.  The ||.||_{1,2} norm groups the derivative channels per pixel.

Boundary handling is replicate everywhere, which keeps the classical
``||grad|| <= sqrt(8)`` bound; blur operators are materialized as dense
matrices so adjoints are exact transposes (desk scale only).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SpecificationError
from .linops import LinOp, compose, dense_op, identity_op, scaled_identity_op
from .minimization import MinimizationSpec, quadratic_smooth
from .prox import make_function
from .system import SpaceLayout

GRAD_NORM_BOUND = np.sqrt(8.0)


@dataclass(frozen=True)
class ImageGrid:
    """A grayscale image as a flat vector (row-major)."""

    height: int
    width: int
    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels",
                           np.asarray(self.pixels, dtype=float).ravel())
        if self.pixels.size != self.height * self.width:
            raise SpecificationError(
                f"pixel count {self.pixels.size} != "
                f"{self.height}x{self.width}"
            )

    def as_array(self):
        return self.pixels.reshape(self.height, self.width)


@dataclass(frozen=True)
class ObservationSet:
    """Degraded observations r_i = T_i x + noise with positive weights."""

    observations: list
    blur_ops: list
    weights: list

    def __post_init__(self):
        if not (len(self.observations) == len(self.blur_ops)
                == len(self.weights)):
            raise SpecificationError("observation entries must align")
        for r, op, w in zip(self.observations, self.blur_ops, self.weights):
            if np.asarray(r).size != op.out_dim:
                raise SpecificationError(
                    f"observation length {np.asarray(r).size} != "
                    f"operator out_dim {op.out_dim}"
                )
            if w <= 0:
                raise SpecificationError("weights must be > 0")


def _grad_fwd(img):
    """Forward differences of a 2-D array: (vertical, horizontal)."""
    vert = np.zeros(img.shape)
    horz = np.zeros(img.shape)
    vert[:-1, :] = img[1:, :] - img[:-1, :]
    horz[:, :-1] = img[:, 1:] - img[:, :-1]
    return vert, horz


def _grad_adj(vert, horz):
    """Adjoint of :func:`_grad_fwd` (negative divergence), 2-D in/out."""
    out = np.zeros(vert.shape)
    out[1:, :] += vert[:-1, :]
    out[:-1, :] -= vert[:-1, :]
    out[:, 1:] += horz[:, :-1]
    out[:, :-1] -= horz[:, :-1]
    return out


def gradient_op(height, width):
    """First-order forward differences with replicate boundary.

    Output stacks the vertical then the horizontal differences
    (2*height*width values); the adjoint is the matching negative
    divergence.
    """
    if height < 2 or width < 2:
        raise ConfigurationError("gradient_op needs height, width >= 2")
    hw = height * width

    def apply(x):
        img = np.asarray(x, dtype=float).reshape(height, width)
        vert, horz = _grad_fwd(img)
        return np.concatenate([vert.ravel(), horz.ravel()])

    def adjoint_apply(y):
        y = np.asarray(y, dtype=float).reshape(2, height, width)
        return _grad_adj(y[0], y[1]).ravel()

    return LinOp(hw, 2 * hw, apply, adjoint_apply, tag=f"grad{height}x{width}")


def second_gradient_op(height, width):
    """Second-order differences: the gradient applied to each channel again.

    Yields four channels (xx, xy, yx, yy) of length height*width each, with
    the same replicate boundary; the adjoint follows by composition.
    """
    if height < 3 or width < 3:
        raise ConfigurationError("second_gradient_op needs height, width >= 3")
    hw = height * width

    def apply(x):
        img = np.asarray(x, dtype=float).reshape(height, width)
        vert, horz = _grad_fwd(img)
        xx, xy = _grad_fwd(vert)
        yx, yy = _grad_fwd(horz)
        return np.concatenate([xx.ravel(), xy.ravel(), yx.ravel(), yy.ravel()])

    def adjoint_apply(y):
        y = np.asarray(y, dtype=float).reshape(4, height, width)
        return _grad_adj(_grad_adj(y[0], y[1]), _grad_adj(y[2], y[3])).ravel()

    return LinOp(hw, 4 * hw, apply, adjoint_apply,
                 tag=f"grad2_{height}x{width}")


def haar_analysis_op(height, width):
    """Single-level orthonormal 2-D Haar analysis.

    Requires even dimensions.  Output stacks the four subbands (LL, LH, HL,
    HH), each of size (height/2)*(width/2); the adjoint is the inverse
    transform.
    """
    if height % 2 or width % 2:
        raise ConfigurationError("haar_analysis_op needs even height and width")
    hw = height * width
    q = hw // 4

    def apply(x):
        img = np.asarray(x, dtype=float).reshape(height, width)
        a = img[0::2, 0::2]
        b = img[0::2, 1::2]
        c = img[1::2, 0::2]
        d = img[1::2, 1::2]
        ll = (a + b + c + d) / 2.0
        lh = (a - b + c - d) / 2.0
        hl = (a + b - c - d) / 2.0
        hh = (a - b - c + d) / 2.0
        return np.concatenate([ll.ravel(), lh.ravel(), hl.ravel(), hh.ravel()])

    def adjoint_apply(y):
        y = np.asarray(y, dtype=float)
        half = (height // 2, width // 2)
        ll = y[:q].reshape(half)
        lh = y[q:2 * q].reshape(half)
        hl = y[2 * q:3 * q].reshape(half)
        hh = y[3 * q:].reshape(half)
        img = np.zeros((height, width))
        img[0::2, 0::2] = (ll + lh + hl + hh) / 2.0
        img[0::2, 1::2] = (ll - lh + hl - hh) / 2.0
        img[1::2, 0::2] = (ll + lh - hl - hh) / 2.0
        img[1::2, 1::2] = (ll - lh - hl + hh) / 2.0
        return img.ravel()

    return LinOp(hw, hw, apply, adjoint_apply, tag=f"haar{height}x{width}")


def _stencil_matrix(height, width, kernel):
    """Dense matrix of a 2-D stencil with replicate boundary."""
    kernel = np.asarray(kernel, dtype=float)
    kh, kw = kernel.shape
    oh, ow = kh // 2, kw // 2
    hw = height * width
    mat = np.zeros((hw, hw))
    for i in range(height):
        for j in range(width):
            row = i * width + j
            for di in range(kh):
                for dj in range(kw):
                    src_i = min(max(i + di - oh, 0), height - 1)
                    src_j = min(max(j + dj - ow, 0), width - 1)
                    mat[row, src_i * width + src_j] += kernel[di, dj]
    return mat


def box_blur_op(height, width, size=3):
    """Dense size x size box blur with replicate boundary."""
    if size < 1 or size % 2 == 0:
        raise ConfigurationError("box blur size must be odd and >= 1")
    kernel = np.full((size, size), 1.0 / (size * size))
    return dense_op(_stencil_matrix(height, width, kernel),
                    tag=f"box{size}_{height}x{width}")


def gaussian_blur_op(height, width, sigma=1.0, radius=2):
    """Dense truncated-Gaussian blur with replicate boundary."""
    if sigma <= 0 or radius < 0:
        raise ConfigurationError("need sigma > 0 and radius >= 0")
    ax = np.arange(-radius, radius + 1, dtype=float)
    g = np.exp(-0.5 * (ax / sigma) ** 2)
    kernel = np.outer(g, g)
    kernel /= kernel.sum()
    return dense_op(_stencil_matrix(height, width, kernel),
                    tag=f"gauss{sigma}_{height}x{width}")


def make_observations(truth, blur_ops, weights, noise_sigma=0.0, seed=0):
    """Blur the truth and add seeded Gaussian noise per observation."""
    rng = np.random.default_rng(seed)
    observations = []
    for op in blur_ops:
        clean = np.asarray(op.apply(truth.pixels))
        noise = noise_sigma * rng.standard_normal(op.out_dim) \
            if noise_sigma > 0 else 0.0
        observations.append(clean + noise)
    return ObservationSet(observations, list(blur_ops), list(weights))


def pixel_groups(height, width, channels):
    """Index blocks grouping the derivative channels of each pixel."""
    hw = height * width
    base = np.arange(hw)
    return [list(base[p] + hw * np.arange(channels)) for p in range(hw)]


def build_app1_instance(truth, obs, alpha, beta, gamma, box=(0.0, 1.0),
                        equilibrate=False, dense_operators=False):
    """MinimizationSpec for the composite image-recovery objective.

    ``alpha`` weights the first-order and ``beta`` the second-order grouped
    derivative norms (combined through infimal convolution), ``gamma`` the
    analysis-l1 term; ``box`` is the pixel-range constraint set.

    ``equilibrate`` divides the derivative operators by their norm bounds
    and multiplies the matching regularizer weights by the same factor: the
    objective is unchanged (the grouped norms are positively homogeneous)
    but the coupling bound drops, admitting much larger steps.
    ``dense_operators`` materializes the derivative/analysis operators as
    dense matrices, trading memory for per-iteration speed at desk scale.
    """
    if min(alpha, beta, gamma) <= 0:
        raise ConfigurationError("alpha, beta, gamma must be > 0")
    h, w = truth.height, truth.width
    hw = h * w
    layout = SpaceLayout(
        h_dims=(hw,),
        g_dims=(hw, hw),
        y_dims=(2 * hw, hw),
        x_dims=(4 * hw, hw),
    )
    grad = gradient_op(h, w)
    grad2 = second_gradient_op(h, w)
    haar = haar_analysis_op(h, w)
    alpha_eff, beta_eff = float(alpha), float(beta)
    if equilibrate:
        s1 = 1.0 / GRAD_NORM_BOUND
        s2 = 1.0 / GRAD_NORM_BOUND**2
        grad = compose(scaled_identity_op(2 * hw, s1), grad)
        grad2 = compose(scaled_identity_op(4 * hw, s2), grad2)
        alpha_eff = alpha / s1
        beta_eff = beta / s2
    if dense_operators:
        from .linops import materialize

        grad = dense_op(materialize(grad), tag=grad.tag + "_dense")
        grad2 = dense_op(materialize(grad2), tag=grad2.tag + "_dense")
        haar = dense_op(materialize(haar), tag=haar.tag + "_dense")

    terms = [
        {"op": op, "offset": np.asarray(r, dtype=float), "weight": float(wt)}
        for r, op, wt in zip(obs.observations, obs.blur_ops, obs.weights)
    ]
    phi = quadratic_smooth(terms, hw)

    f1 = make_function("indicator_box", {"lo": box[0], "hi": box[1]}, hw)
    g1 = make_function(
        "group_l12",
        {"blocks": pixel_groups(h, w, 2), "weight": alpha_eff},
        2 * hw,
    )
    ell1 = make_function(
        "group_l12",
        {"blocks": pixel_groups(h, w, 4), "weight": beta_eff},
        4 * hw,
    )
    g2 = make_function("l1", {"weight": gamma}, hw)
    ell2 = make_function("indicator_zero", {}, hw)

    return MinimizationSpec(
        layout=layout,
        f=[f1],
        phi=phi,
        g=[g1, g2],
        ell=[ell1, ell2],
        M=[grad, haar],
        N=[grad2, identity_op(hw)],
        L=[[identity_op(hw)], [identity_op(hw)]],
        z=[np.zeros(hw)],
        r=[np.zeros(hw), np.zeros(hw)],
    )


def write_pgm(path, grid):
    """Write an image as binary 8-bit PGM, mapping [0, 1] to 0..255."""
    data = np.clip(grid.pixels, 0.0, 1.0)
    raw = np.round(data * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii"))
        fh.write(raw.tobytes())


def read_pgm(path):
    """Read a binary 8-bit PGM into an ImageGrid with values in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    parts = []
    pos = 0
    while len(parts) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        parts.append(data[start:pos])
    if parts[0] != b"P5":
        raise ConfigurationError("only binary PGM (P5) is supported")
    width, height, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ConfigurationError("only 8-bit PGM is supported")
    pos += 1  # single whitespace after maxval
    raw = np.frombuffer(data, dtype=np.uint8, count=height * width, offset=pos)
    return ImageGrid(height, width, raw.astype(float) / 255.0)
