"""Parameter-update engines: mini-batch SGD, L-BFGS-GSS, and Adam.

The L-BFGS direction comes from the standard two-loop recursion over history
lists of (s, y) pairs; the step size along that direction is found by a
derivative-free Golden Section Search (GSS) on the full-batch loss. Adam is
here because the path optimizer uses it.

Both training runs (sgd_run, lbfgs_gss_run) produce a TrainingTrace holding
per-epoch/per-iteration full-set losses, the best-train and best-test
parameter snapshots, and the indices where those minima occurred (index 0 is
the initial point, before any update).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import nets
from .mnist import Dataset, full_batch, iter_batches

GOLDEN_INV = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi


# ---------------------------------------------------------------------------
# training trace
# ---------------------------------------------------------------------------

@dataclass
class TrainingTrace:
    """Loss bookkeeping of one training run.

    train_losses[0] / test_losses[0] are the losses of the initial
    parameters; entry k is the state after epoch/iteration k. The best_*
    indices point into those arrays (ties keep the earliest entry).
    """

    optimizer: str
    train_losses: np.ndarray
    test_losses: np.ndarray
    best_train_epoch: int
    best_test_epoch: int
    best_train_params: np.ndarray
    best_test_params: np.ndarray
    final_params: np.ndarray
    wall_time: float = 0.0
    warnings: list = field(default_factory=list)

    @property
    def best_train_loss(self):
        return float(self.train_losses[self.best_train_epoch])

    @property
    def best_test_loss(self):
        return float(self.test_losses[self.best_test_epoch])

    def to_json_dict(self, snapshot_refs=None):
        """Serializable summary; deterministic (timings are kept out on purpose)."""
        out = {
            "optimizer": self.optimizer,
            "train_losses": [float(v) for v in self.train_losses],
            "test_losses": [float(v) for v in self.test_losses],
            "best_train_epoch": int(self.best_train_epoch),
            "best_test_epoch": int(self.best_test_epoch),
            "best_train_loss": self.best_train_loss,
            "best_test_loss": self.best_test_loss,
            "warnings": list(self.warnings),
        }
        if snapshot_refs is not None:
            out["snapshots"] = dict(snapshot_refs)
        return out


class _TraceBuilder:
    """Accumulates per-epoch losses and keeps the running best snapshots."""

    def __init__(self, optimizer):
        self.optimizer = optimizer
        self.train_losses = []
        self.test_losses = []
        self.best_train = None  # (loss, epoch, params)
        self.best_test = None
        self.warnings = []
        self.t0 = time.perf_counter()

    def record(self, params, train_loss, test_loss):
        epoch = len(self.train_losses)
        self.train_losses.append(train_loss)
        self.test_losses.append(test_loss)
        if self.best_train is None or train_loss < self.best_train[0]:
            self.best_train = (train_loss, epoch, params.copy())
        if self.best_test is None or test_loss < self.best_test[0]:
            self.best_test = (test_loss, epoch, params.copy())

    def build(self, final_params):
        return TrainingTrace(
            optimizer=self.optimizer,
            train_losses=np.asarray(self.train_losses),
            test_losses=np.asarray(self.test_losses),
            best_train_epoch=self.best_train[1],
            best_test_epoch=self.best_test[1],
            best_train_params=self.best_train[2],
            best_test_params=self.best_test[2],
            final_params=final_params.copy(),
            wall_time=time.perf_counter() - self.t0,
            warnings=self.warnings,
        )


def _as_eval_batch(spec, data):
    """Accept a Dataset or a ready Batch for full-set loss evaluation."""
    if isinstance(data, Dataset):
        return full_batch(data, reconstruction=spec.loss_kind == "mean_squared_error")
    return data


# ---------------------------------------------------------------------------
# SGD
# ---------------------------------------------------------------------------

def sgd_run(spec, params0, dataset_train, dataset_test, lr=0.1, batch_size=64,
            epochs=30, seed=0):
    """Plain mini-batch SGD: omega <- omega - lr * g per batch.

    Full-train and full-test losses are recorded once per epoch (plus the
    initial point); the batch order of epoch e is a permutation seeded by
    (seed, e). lr = 0 is allowed and leaves the parameters untouched.
    """
    if lr < 0:
        raise ValueError("lr must be >= 0")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    train_eval = _as_eval_batch(spec, dataset_train)
    test_eval = _as_eval_batch(spec, dataset_test)

    w = np.array(params0, dtype=np.float64)
    tb = _TraceBuilder("sgd")
    tb.record(w, nets.loss(spec, w, train_eval), nets.loss(spec, w, test_eval))
    for epoch in range(1, epochs + 1):
        for batch in iter_batches(train_eval.inputs, train_eval.targets,
                                  batch_size, seed, epoch):
            value, g = nets.loss_and_grad(spec, w, batch)
            if not np.isfinite(value):
                raise RuntimeError(f"non-finite training loss in epoch {epoch}")
            w = w - lr * g
        tb.record(w, nets.loss(spec, w, train_eval), nets.loss(spec, w, test_eval))
    return tb.build(w)


# ---------------------------------------------------------------------------
# Golden Section Search
# ---------------------------------------------------------------------------

@dataclass
class GssConfig:
    bracket_growth: float = 2.0
    max_bracket_steps: int = 40
    tolerance: float = 1e-3  # relative to the initial bracket width
    max_iterations: int = 50
    initial_probe: float = 1.0

    def __post_init__(self):
        if self.bracket_growth <= 1.0:
            raise ValueError("bracket_growth must exceed 1")
        if min(self.max_bracket_steps, self.max_iterations) < 1:
            raise ValueError("iteration caps must be positive")
        if self.tolerance <= 0 or self.initial_probe <= 0:
            raise ValueError("tolerance and initial_probe must be positive")


@dataclass
class GssResult:
    u_star: float
    warning: bool
    n_evals: int
    bracket: tuple
    widths: list  # bracket width after each contraction


def golden_section_search(f, config=None):
    """Minimize f on [0, inf): bracket by doubling, then contract by 1/phi.

    Probes expand from u = 0 (initial_probe, then *bracket_growth each step)
    until the function strictly increases; the bracket handed to the
    contraction phase spans the probe before the last non-increasing one
    through the first increasing one. Each contraction shrinks the bracket by
    exactly 1/phi, reusing one interior evaluation, until the width drops
    under tolerance * initial_width. Returns the final bracket midpoint.

    If no increase shows up within max_bracket_steps, the largest probed u is
    returned with the warning flag set (the caller decides the fallback).
    Non-finite values are treated as +inf, i.e. as an increase.
    """
    config = config or GssConfig()

    evals = [0]

    def probe(u):
        evals[0] += 1
        v = f(u)
        return v if np.isfinite(v) else math.inf

    us = [0.0]
    fs = [probe(0.0)]
    u = config.initial_probe
    bracket = None
    for _ in range(config.max_bracket_steps):
        fu = probe(u)
        us.append(u)
        fs.append(fu)
        if fu > fs[-2]:
            a = us[-3] if len(us) >= 3 else 0.0
            bracket = (a, u)
            break
        u *= config.bracket_growth
    if bracket is None:
        return GssResult(us[-1], True, evals[0], (0.0, us[-1]), [])

    a, c = bracket
    tol_abs = config.tolerance * (c - a)
    x1 = c - (c - a) * GOLDEN_INV
    x2 = a + (c - a) * GOLDEN_INV
    f1, f2 = probe(x1), probe(x2)
    widths = []
    for _ in range(config.max_iterations):
        if (c - a) <= tol_abs:
            break
        if f1 < f2:
            c, x2, f2 = x2, x1, f1
            x1 = c - (c - a) * GOLDEN_INV
            f1 = probe(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + (c - a) * GOLDEN_INV
            f2 = probe(x2)
        widths.append(c - a)
    return GssResult((a + c) / 2.0, False, evals[0], bracket, widths)


# ---------------------------------------------------------------------------
# L-BFGS
# ---------------------------------------------------------------------------

@dataclass
class LbfgsHistory:
    """The m most recent (s, y) difference pairs, curvature-screened."""

    m: int = 10
    s_list: list = field(default_factory=list)
    y_list: list = field(default_factory=list)
    curvature_rtol: float = 1e-10

    def push(self, s, y):
        """Store the pair unless it fails the curvature safeguard.

        Pairs with s.y <= rtol*|s||y| would break positive definiteness of
        the implicit Hessian (GSS gives no Wolfe guarantee), so they are
        skipped. Returns True when stored.
        """
        sy = float(s @ y)
        bound = self.curvature_rtol * float(np.linalg.norm(s)) * float(np.linalg.norm(y))
        if not np.isfinite(sy) or sy <= bound:
            return False
        self.s_list.append(np.asarray(s, dtype=np.float64))
        self.y_list.append(np.asarray(y, dtype=np.float64))
        if len(self.s_list) > self.m:
            self.s_list.pop(0)
            self.y_list.pop(0)
        return True

    def __len__(self):
        return len(self.s_list)


def lbfgs_direction(grad, hist):
    """Two-loop recursion: the implicit inverse Hessian applied to grad.

    With empty history this is exactly the gradient (gamma = 1). The result p
    is meant for the update omega <- omega - u * p.
    """
    q = np.array(grad, dtype=np.float64)
    n_pairs = len(hist)
    if n_pairs == 0:
        return q
    alphas = np.empty(n_pairs)
    rhos = np.empty(n_pairs)
    for i in range(n_pairs - 1, -1, -1):
        s, y = hist.s_list[i], hist.y_list[i]
        rhos[i] = 1.0 / float(y @ s)
        alphas[i] = rhos[i] * float(s @ q)
        q -= alphas[i] * y
    s_last, y_last = hist.s_list[-1], hist.y_list[-1]
    gamma = float(s_last @ y_last) / float(y_last @ y_last)
    r = gamma * q
    for i in range(n_pairs):
        s, y = hist.s_list[i], hist.y_list[i]
        beta = rhos[i] * float(y @ r)
        r += s * (alphas[i] - beta)
    if not np.all(np.isfinite(r)):
        raise FloatingPointError("non-finite L-BFGS direction (corrupted history)")
    return r


def lbfgs_gss_minimize(value_and_grad, x0, iterations, memory=10, gss=None,
                       fallback_step=1e-4, value=None, on_iterate=None):
    """L-BFGS-GSS on an arbitrary smooth function.

    value_and_grad(x) -> (f, g); value(x) -> f is optional and used for the
    (gradient-free) line-search evaluations when given. on_iterate(k, x, f)
    fires at the initial point (k = 0) and after every accepted update.
    Returns (x, f_history, warnings).
    """
    if value is None:
        value = lambda x: value_and_grad(x)[0]
    gss = gss or GssConfig()

    x = np.array(x0, dtype=np.float64)
    f, g = value_and_grad(x)
    if not np.isfinite(f):
        raise RuntimeError("non-finite loss at the initial point")
    hist = LbfgsHistory(m=memory)
    f_history = [f]
    warnings = []
    if on_iterate is not None:
        on_iterate(0, x, f)
    for k in range(1, iterations + 1):
        p = lbfgs_direction(g, hist)
        res = golden_section_search(lambda u: value(x - u * p), gss)
        if res.warning:
            u = fallback_step
            warnings.append(
                f"iteration {k}: GSS found no bracket within "
                f"{gss.max_bracket_steps} expansions; fallback step {fallback_step:g}"
            )
        else:
            u = res.u_star
        x_new = x - u * p
        f_new, g_new = value_and_grad(x_new)
        if not np.isfinite(f_new):
            raise RuntimeError(f"non-finite loss at iteration {k}")
        hist.push(x_new - x, g_new - g)
        x, f, g = x_new, f_new, g_new
        f_history.append(f)
        if on_iterate is not None:
            on_iterate(k, x, f)
    return x, f_history, warnings


def lbfgs_gss_run(spec, params0, dataset_train, dataset_test, iterations=150,
                  memory=10, seed=None, gss=None, fallback_step=1e-4):
    """Full-batch L-BFGS-GSS training with the same trace bookkeeping as SGD.

    The method is deterministic (no mini-batches); seed is accepted for
    interface uniformity with sgd_run and ignored.
    """
    del seed
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    train_eval = _as_eval_batch(spec, dataset_train)
    test_eval = _as_eval_batch(spec, dataset_test)

    tb = _TraceBuilder("lbfgs_gss")

    def record(k, x, f):
        tb.record(x, f, nets.loss(spec, x, test_eval))

    x, _, warnings = lbfgs_gss_minimize(
        lambda w: nets.loss_and_grad(spec, w, train_eval),
        params0,
        iterations,
        memory=memory,
        gss=gss,
        fallback_step=fallback_step,
        value=lambda w: nets.loss(spec, w, train_eval),
        on_iterate=record,
    )
    tb.warnings.extend(warnings)
    return tb.build(x)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """Bias-corrected Adam moments for one optimized variable."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    first_moment: np.ndarray = None
    second_moment: np.ndarray = None
    step_count: int = 0


def adam_step(state, variable, grad):
    """One bias-corrected Adam update; returns the new variable value."""
    g = np.asarray(grad, dtype=np.float64)
    if state.first_moment is None:
        state.first_moment = np.zeros_like(g)
        state.second_moment = np.zeros_like(g)
    state.step_count += 1
    state.first_moment = state.beta1 * state.first_moment + (1 - state.beta1) * g
    state.second_moment = state.beta2 * state.second_moment + (1 - state.beta2) * g * g
    m_hat = state.first_moment / (1 - state.beta1 ** state.step_count)
    v_hat = state.second_moment / (1 - state.beta2 ** state.step_count)
    return variable - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
