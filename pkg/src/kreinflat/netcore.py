"""Feed-forward scalar-output networks: evaluation, training, serialization.

A network of depth d maps R^D -> R through layers q = 0..d-1,

    f(x) = sigma_{d-1}(W_{d-1} sigma_{d-2}(... sigma_0(W_0 x))),

with W_q of shape (H_q, H_{q-1}), H_{-1} = D and H_{d-1} = 1.  The regularized
empirical risk is mean loss plus lambda * reg_scale * sum_q ||W_q||_F^2 with
reg_scale defaulting to 1/depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import activations as act
from .errors import DivergenceError, DomainError

LOSSES = ("squared", "logistic")
_DIGITS = "%.17g"


@dataclass(frozen=True)
class Architecture:
    input_dim: int
    widths: Tuple[int, ...]
    activations: Tuple[act.ActivationSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(h) for h in self.widths))
        object.__setattr__(self, "activations", tuple(self.activations))
        if self.input_dim < 1:
            raise ValueError("input_dim must be at least 1")
        if not self.widths:
            raise ValueError("need at least one layer")
        if any(h < 1 for h in self.widths):
            raise ValueError("widths must be positive")
        if self.widths[-1] != 1:
            raise ValueError("last width must be 1 (scalar output)")
        if len(self.activations) != len(self.widths):
            raise ValueError("need one activation per layer")

    @property
    def depth(self):
        return len(self.widths)

    @property
    def fan_ins(self):
        """Input dimension of each layer: (D, H_0, ..., H_{d-2})."""
        return (self.input_dim,) + self.widths[:-1]

    def layer_shapes(self):
        return [(h, f) for h, f in zip(self.widths, self.fan_ins)]


@dataclass(frozen=True)
class WeightSet:
    matrices: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "matrices", tuple(np.array(w, dtype=float) for w in self.matrices)
        )

    def __iter__(self):
        return iter(self.matrices)

    def __getitem__(self, q):
        return self.matrices[q]

    def __len__(self):
        return len(self.matrices)

    def frobenius_sq(self):
        with np.errstate(over="ignore"):  # inf is meaningful to divergence checks
            return [float(np.sum(w * w)) for w in self.matrices]


def check_shapes(arch, weights):
    shapes = [w.shape for w in weights]
    if shapes != arch.layer_shapes():
        raise ValueError(f"weight shapes {shapes} do not match {arch.layer_shapes()}")


def init_weights(arch, seed):
    """Gaussian init, std 0.5/sqrt(fan_in) per layer, from one seeded stream."""
    rng = np.random.default_rng(seed)
    mats = [
        rng.normal(0.0, 0.5 / math.sqrt(f), size=(h, f)) for h, f in arch.layer_shapes()
    ]
    return WeightSet(tuple(mats))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _layers(arch, weights, x):
    """Pre- and post-activation vectors per layer for a single input."""
    check_shapes(arch, weights)
    z = np.asarray(x, dtype=float)
    if z.shape != (arch.input_dim,):
        raise ValueError(f"input shape {z.shape} != ({arch.input_dim},)")
    pres, posts = [], []
    for q, w in enumerate(weights):
        pre = w @ z
        z = act.evaluate_array(arch.activations[q], pre)
        pres.append(pre)
        posts.append(z)
    return pres, posts

def forward(arch, weights, x):
    """f(x) for one input, as a float."""
    _, posts = _layers(arch, weights, x)
    return float(posts[-1][0])


def forward_batch(arch, weights, xs):
    """f over the rows of an (N, D) array; returns shape (N,)."""
    check_shapes(arch, weights)
    xs = np.asarray(xs, dtype=float)
    z = xs.T
    for q, w in enumerate(weights):
        z = act.evaluate_array(arch.activations[q], w @ z)
    return z[0]


# ---------------------------------------------------------------------------
# losses and risk
# ---------------------------------------------------------------------------

def loss_value(loss, y, f):
    if loss == "squared":
        r = f - y
        return r * r if abs(r) < 1e154 else math.inf  # avoid float overflow raise
    if loss == "logistic":
        # log(1 + exp(-y f)), overflow-safe
        return float(np.logaddexp(0.0, -y * f))
    raise ValueError(f"unknown loss {loss!r}")


def _loss_deriv(loss, y, f):
    """d loss / d f."""
    if loss == "squared":
        return 2.0 * (f - y)
    if loss == "logistic":
        t = -y * f
        if t >= 0:
            s = 1.0 / (1.0 + math.exp(-t))
        else:
            e = math.exp(t)
            s = e / (1.0 + e)
        return -y * s
    raise ValueError(f"unknown loss {loss!r}")


def _as_dataset(dataset):
    pairs = [(np.asarray(x, dtype=float), float(y)) for x, y in dataset]
    if not pairs:
        raise ValueError("dataset is empty")
    return pairs


def objective(arch, weights, dataset, loss, lam, reg_scale=None):
    """Mean loss + lam * reg_scale * sum_q ||W_q||_F^2 (reg_scale default 1/depth)."""
    pairs = _as_dataset(dataset)
    scale = 1.0 / arch.depth if reg_scale is None else float(reg_scale)
    emp = sum(loss_value(loss, y, forward(arch, weights, x)) for x, y in pairs) / len(pairs)
    reg = lam * scale * sum(weights.frobenius_sq())
    return emp + reg


def gradient(arch, weights, dataset, loss, lam, reg_scale=None):
    """Exact gradient of objective() w.r.t. every weight matrix."""
    pairs = _as_dataset(dataset)
    scale = 1.0 / arch.depth if reg_scale is None else float(reg_scale)
    grads = [2.0 * lam * scale * w for w in weights]
    n = len(pairs)
    for x, y in pairs:
        pres, posts = _layers(arch, weights, x)
        f = float(posts[-1][0])
        delta = np.array([_loss_deriv(loss, y, f) / n])
        for q in range(arch.depth - 1, -1, -1):
            delta = delta * act.derivative_array(arch.activations[q], pres[q])
            below = posts[q - 1] if q > 0 else np.asarray(x, dtype=float)
            grads[q] += np.outer(delta, below)
            if q > 0:
                delta = weights[q].T @ delta
    return WeightSet(tuple(grads))


def train(arch, dataset, loss, lam, seed, steps, step_size, reg_scale=None):
    """Plain gradient descent from the seeded init.

    Returns the final iterate when it does not exceed the initial objective,
    otherwise the best iterate seen; raises DivergenceError on non-finite
    values.  Bit-deterministic for fixed inputs.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    weights = init_weights(arch, seed)
    init_obj = objective(arch, weights, dataset, loss, lam, reg_scale)
    if not math.isfinite(init_obj):
        raise DivergenceError("objective not finite at initialization")
    best, best_obj = weights, init_obj
    current, current_obj = weights, init_obj
    for _ in range(steps):
        g = gradient(arch, current, dataset, loss, lam, reg_scale)
        mats = tuple(w - step_size * gw for w, gw in zip(current, g))
        if any(not np.all(np.isfinite(m)) for m in mats):
            raise DivergenceError("weights became non-finite during descent")
        current = WeightSet(mats)
        current_obj = objective(arch, current, dataset, loss, lam, reg_scale)
        if not math.isfinite(current_obj):
            raise DivergenceError("objective became non-finite during descent")
        if current_obj < best_obj:
            best, best_obj = current, current_obj
    return current if current_obj <= init_obj else best


# ---------------------------------------------------------------------------
# geometric means
# ---------------------------------------------------------------------------

def _geomean(values):
    if any(v == 0.0 for v in values):
        return 0.0
    if any(math.isinf(v) for v in values):
        return math.inf
    return math.exp(sum(math.log(v) for v in values) / len(values))


def geometric_means(arch, intervals=None):
    """(width_gm, lipschitz_gm, lipschitz_assoc_gm) across all layers.

    The width mean includes the final width 1.  ``intervals`` gives the [0, m]
    range per layer for the Lipschitz suprema: None means m = inf everywhere,
    a scalar is shared, a sequence is per-layer.  A Lipschitz mean is None
    when some layer has no constant on its interval (only possible at
    m = inf); intervals beyond a convergence radius raise DomainError.
    """
    d = arch.depth
    if intervals is None:
        ms = [math.inf] * d
    elif np.isscalar(intervals):
        ms = [float(intervals)] * d
    else:
        ms = [float(m) for m in intervals]
        if len(ms) != d:
            raise ValueError("need one interval per layer")
    width_gm = _geomean([float(h) for h in arch.widths])

    def mean_of(specs):
        values = []
        for spec, m in zip(specs, ms):
            try:
                values.append(act.lipschitz_on(spec, m))
            except DomainError:
                raise
            except ValueError:
                return None
        return _geomean(values)

    lip = mean_of(arch.activations)
    lip_assoc = mean_of([act.associated(s) for s in arch.activations])
    return width_gm, lip, lip_assoc


# ---------------------------------------------------------------------------
# serialization: plain decimal text, exact float round trip
# ---------------------------------------------------------------------------

def save_weights(path, weights):
    lines = [str(len(weights.matrices))]
    for w in weights:
        lines.append(f"{w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(_DIGITS % v for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_weights(path):
    with open(path) as fh:
        tokens = fh.read().split("\n")
    rows = [t for t in tokens if t.strip()]
    depth = int(rows[0])
    mats = []
    pos = 1
    for _ in range(depth):
        h, f = (int(t) for t in rows[pos].split())
        pos += 1
        block = [[float(v) for v in rows[pos + r].split()] for r in range(h)]
        pos += h
        m = np.array(block, dtype=float)
        if m.shape != (h, f):
            raise ValueError(f"malformed weight block: got {m.shape}, header said {(h, f)}")
        mats.append(m)
    return WeightSet(tuple(mats))
