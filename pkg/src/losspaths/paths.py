"""Fourier-parametrized low-loss paths between two points of a landscape.

A path is a straight line between the endpoints plus a truncated sine series,

    omega(t) = t*omega_i + (1-t)*omega_j + sum_n b_n sin(n*pi*t),

so omega(0) = omega_j and omega(1) = omega_i no matter the coefficients. The
coefficients are tuned with Adam to minimize the total path loss

    L = sum_m <l(x, omega(t_m))> + lam * sum_m |omega(t_{m+1}) - omega(t_m)|^2

over an inclusive grid of M equally spaced t values. The height H of a path
is the maximum per-point loss over that grid; because Adam minimizes L rather
than H, the reported path is the iterate with the smallest H seen, which can
never be worse than the straight line it starts from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .optim import AdamState, adam_step


def _sinpi(x):
    """sin(pi * x), exactly zero at integral x (so endpoints stay fixed)."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x % 1.0 == 0.0, 0.0, np.sin(np.pi * x))


def sin_table(n_fourier, grid):
    """sin(n*pi*t) for n = 1..n_fourier over the grid, shaped (n_fourier, M)."""
    n = np.arange(1, n_fourier + 1)
    return _sinpi(np.outer(n, grid))


class FourierPath:
    """Endpoints, sine coefficients, and the discretization grid."""

    def __init__(self, endpoint_i, endpoint_j, n_fourier=10, n_points=50,
                 coefficients=None):
        self.endpoint_i = np.asarray(endpoint_i, dtype=np.float64)
        self.endpoint_j = np.asarray(endpoint_j, dtype=np.float64)
        if self.endpoint_i.shape != self.endpoint_j.shape or self.endpoint_i.ndim != 1:
            raise ValueError("endpoints must be 1-D vectors of equal length")
        dim = self.endpoint_i.size
        if coefficients is None:
            coefficients = np.zeros((n_fourier, dim))
        self.coefficients = np.asarray(coefficients, dtype=np.float64)
        if self.coefficients.shape != (n_fourier, dim):
            raise ValueError("coefficients must be (n_fourier, dim)")
        if n_points < 2:
            raise ValueError("need at least the two endpoint grid points")
        self.grid = np.linspace(0.0, 1.0, n_points)
        self._sins = sin_table(n_fourier, self.grid)

    @property
    def dim(self):
        return self.endpoint_i.size

    @property
    def n_fourier(self):
        return self.coefficients.shape[0]

    def path_point(self, t):
        """omega(t) for a single curve parameter t in [0, 1]."""
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"t = {t} outside [0, 1]")
        sins = _sinpi(np.arange(1, self.n_fourier + 1) * t)
        return (t * self.endpoint_i + (1.0 - t) * self.endpoint_j
                + sins @ self.coefficients)

    def points(self):
        """omega(t_m) for the full grid, shaped (M, dim)."""
        t = self.grid[:, None]
        return (t * self.endpoint_i + (1.0 - t) * self.endpoint_j
                + self._sins.T @ self.coefficients)


@dataclass
class PathLossConfig:
    """Path-loss weighting plus the shape and budget of the optimization."""

    lam: float = 1e-4
    n_fourier: int = 10
    n_points: int = 50
    iterations: int = 100
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.n_fourier < 1 or self.n_points < 2 or self.iterations < 0:
            raise ValueError("bad path optimization shape")

    def adam_state(self):
        return AdamState(learning_rate=self.learning_rate, beta1=self.beta1,
                         beta2=self.beta2, eps=self.eps)


def synthetic_path_config(lam, **overrides):
    """Defaults for the closed-form 2D landscape (M = 100, K = 200)."""
    kw = dict(lam=lam, n_points=100, iterations=200, learning_rate=0.05)
    kw.update(overrides)
    return PathLossConfig(**kw)


def nn_path_config(lam=1e-4, **overrides):
    """Defaults for NN landscapes (M = 50, K = 100)."""
    kw = dict(lam=lam, n_points=50, iterations=100, learning_rate=0.01)
    kw.update(overrides)
    return PathLossConfig(**kw)


@dataclass
class PathReport:
    """What a path looks like: the height, the profile, and the loss terms."""

    height: float
    point_losses: np.ndarray
    total_loss: float
    arc_penalty: float  # sum |delta omega|^2, before scaling by lam
    coefficient_norms: np.ndarray
    lam: float
    iteration: int = 0  # Adam iterate this report describes (0 = straight line)
    pair: tuple = None  # (i, j) indices when produced by a survey

    def to_json_dict(self):
        out = {
            "height": float(self.height),
            "point_losses": [float(v) for v in self.point_losses],
            "total_loss": float(self.total_loss),
            "arc_penalty": float(self.arc_penalty),
            "coefficient_norms": [float(v) for v in self.coefficient_norms],
            "lam": float(self.lam),
            "iteration": int(self.iteration),
        }
        if self.pair is not None:
            out["pair"] = [int(self.pair[0]), int(self.pair[1])]
        return out


def _report(losses, pts, coefficients, lam, iteration):
    dpts = np.diff(pts, axis=0)
    arc = float(np.sum(dpts ** 2))
    return PathReport(
        height=float(losses.max()),
        point_losses=np.asarray(losses, dtype=np.float64),
        total_loss=float(losses.sum() + lam * arc),
        arc_penalty=arc,
        coefficient_norms=np.linalg.norm(coefficients, axis=1),
        lam=lam,
        iteration=iteration,
    )


def path_loss(path, landscape, lam):
    """Evaluate the path on the landscape: per-point losses, H, and L."""
    if landscape.dim != path.dim:
        raise ValueError(f"landscape dim {landscape.dim} != path dim {path.dim}")
    pts = path.points()
    losses = np.asarray(landscape.values(pts), dtype=np.float64)
    bad = ~np.isfinite(losses)
    if bad.any():
        t_bad = path.grid[np.argmax(bad)]
        raise ValueError(f"non-finite landscape value on the path at t = {t_bad}")
    return _report(losses, pts, path.coefficients, lam, iteration=0)


def path_loss_grad(path, landscape, lam):
    """d(total path loss)/d(b_n) for every coefficient vector, (N_F, dim).

    This is the closed form: sum_m g_m sin(n pi t_m) plus the penalty part
    2 lam sum_m [omega(t_{m+1}) - omega(t_m)] [sin(n pi t_{m+1}) - sin(n pi t_m)].
    """
    if landscape.dim != path.dim:
        raise ValueError(f"landscape dim {landscape.dim} != path dim {path.dim}")
    pts = path.points()
    grads = np.asarray(landscape.gradients(pts), dtype=np.float64)
    return _grad_from_parts(path._sins, pts, grads, lam)


def _grad_from_parts(sins, pts, grads, lam):
    loss_term = sins @ grads
    dsin = np.diff(sins, axis=1)
    dpts = np.diff(pts, axis=0)
    return loss_term + 2.0 * lam * (dsin @ dpts)


def _values_and_gradients(landscape, pts):
    """Batched (losses, gradients) with a fused per-point path when available."""
    fused = getattr(landscape, "value_and_gradient", None)
    if fused is not None:
        pairs = [fused(p) for p in pts]
        losses = np.array([v for v, _ in pairs])
        grads = np.stack([g for _, g in pairs])
        return losses, grads
    return (np.asarray(landscape.values(pts), dtype=np.float64),
            landscape.gradients(pts))


def optimize_path(endpoint_i, endpoint_j, landscape, config):
    """Adam on the Fourier coefficients; returns the best-H iterate.

    The coefficients start at zero (the straight line). The trace records
    (L, H) for the initial path and after every Adam step; the returned path
    and report belong to the iterate with the smallest height seen. On a
    non-finite total loss the optimization aborts and returns the best
    iterate so far together with the partial trace.
    """
    path = FourierPath(endpoint_i, endpoint_j, n_fourier=config.n_fourier,
                       n_points=config.n_points)
    state = config.adam_state()
    sins = path._sins
    lam = config.lam

    b = path.coefficients
    trace = {"total_loss": [], "height": []}
    best = None  # (H, iteration, coefficients, losses, pts)
    aborted = False
    for k in range(config.iterations + 1):
        pts = path.points()
        if k < config.iterations:
            losses, grads = _values_and_gradients(landscape, pts)
        else:
            losses = np.asarray(landscape.values(pts), dtype=np.float64)
            grads = None
        dpts = np.diff(pts, axis=0)
        total = float(losses.sum() + lam * np.sum(dpts ** 2))
        height = float(losses.max())
        if not np.isfinite(total):
            aborted = True
            break
        trace["total_loss"].append(total)
        trace["height"].append(height)
        if best is None or height < best[0]:
            best = (height, k, b.copy(), losses.copy(), pts.copy())
        if k == config.iterations:
            break
        gb = _grad_from_parts(sins, pts, grads, lam)
        b = adam_step(state, b, gb)
        path.coefficients = b

    if best is None:
        raise RuntimeError("path loss non-finite already at the straight line")
    _, k_best, b_best, losses_best, pts_best = best
    path.coefficients = b_best
    report = _report(losses_best, pts_best, b_best, lam, iteration=k_best)
    if aborted:
        trace["aborted"] = True
    return path, report, trace


# ---------------------------------------------------------------------------
# pair surveys
# ---------------------------------------------------------------------------

_WORKER_STATE = {}


def _survey_init(landscape, config):
    _WORKER_STATE["landscape"] = landscape
    _WORKER_STATE["config"] = config


def _survey_one(task):
    (i, j), vec_i, vec_j = task
    _, report, _ = optimize_path(vec_i, vec_j, _WORKER_STATE["landscape"],
                                 _WORKER_STATE["config"])
    report.pair = (i, j)
    return report


def sample_pairs(n, n_pairs, seed):
    """Distinct unordered index pairs, sampled without replacement."""
    if n < 2:
        raise ValueError("need at least 2 members to form pairs")
    all_pairs = list(combinations(range(n), 2))
    take = min(n_pairs, len(all_pairs))
    rng = np.random.default_rng(np.random.SeedSequence((int(seed),)))
    chosen = rng.choice(len(all_pairs), size=take, replace=False)
    return [all_pairs[k] for k in sorted(chosen)]


def barrier_survey(vectors, landscape, n_pairs, seed, config, workers=1):
    """Optimize a path for each sampled pair; collect the height reports."""
    vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
    pairs = sample_pairs(len(vectors), n_pairs, seed)
    tasks = [((i, j), vectors[i], vectors[j]) for i, j in pairs]
    if workers <= 1:
        _survey_init(landscape, config)
        return [_survey_one(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=workers, initializer=_survey_init,
                             initargs=(landscape, config)) as pool:
        return list(pool.map(_survey_one, tasks))
