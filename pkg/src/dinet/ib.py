"""Information-bottleneck training of one compression node.

A node observes discrete input symbols together with target labels and
learns a row-stochastic channel P(out|in) that trades compression against
relevance: it minimizes I(in;out) - beta * I(target;out).  The optimum is
the self-consistent fixed point

    P(out=j | in=i)  proportional to  P(out=j) * 2^(-beta * d(i, j))

where d(i,j) = KL( P(target|in=i) || P(target|out=j) ) and the output
marginal / posterior are recomputed from the channel itself.  The fixed
point is found by alternating (Blahut-Arimoto style) updates.

Base convention: divergences are measured in bits and the exponential
update uses base 2 accordingly, so beta is calibrated against base-2
quantities throughout.

Zero-mass inputs (symbols never seen when estimating the source) carry no
weight in any information quantity; their channel rows are pinned to the
output marginal, which keeps the update a no-op on them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .infotheory import (
    ConditionalMatrix,
    DiscreteDistribution,
    entropy_raw,
    joint_mi_raw,
    mutual_information_raw,
)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500


@dataclass(frozen=True)
class IBProblem:
    """One node's training input: source, per-symbol class posterior, knobs."""

    px: DiscreteDistribution
    py_given_x: ConditionalMatrix
    beta: float
    n_out: int

    def __post_init__(self):
        if not self.beta > 0:
            raise ValidationError(f"beta must be positive, got {self.beta}")
        if not 1 <= self.n_out:
            raise ValidationError(f"n_out must be >= 1, got {self.n_out}")
        if self.py_given_x.rows != len(self.px):
            raise ValidationError(
                f"py_given_x has {self.py_given_x.rows} rows for "
                f"{len(self.px)} input symbols"
            )

    @property
    def n_in(self) -> int:
        return len(self.px)

    @property
    def n_class(self) -> int:
        return self.py_given_x.cols


@dataclass(frozen=True)
class IBDiagnostics:
    iterations: int
    lagrangian_trace: tuple
    i_in_out: float
    i_y_out: float
    converged: bool


@dataclass(frozen=True)
class IBSolution:
    """Learned channel plus the marginal/posterior it induces."""

    channel: ConditionalMatrix
    p_out: DiscreteDistribution
    py_given_out: ConditionalMatrix
    diagnostics: IBDiagnostics


def estimate_empirical(x_symbols, y_labels, n_in: int, n_class: int):
    """Frequency estimates of P(X) and P(Y|X) from paired symbol vectors.

    Rows for symbols never observed fall back to the global class prior, so
    the returned conditional is always row-stochastic.
    """
    x = np.asarray(x_symbols, dtype=np.int64)
    y = np.asarray(y_labels, dtype=np.int64)
    if x.size == 0 or y.size == 0:
        raise ValidationError("empty training vectors")
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("x_symbols and y_labels must be equal-length vectors")
    if x.min() < 0 or x.max() >= n_in:
        raise ValidationError(f"input symbols outside [0, {n_in})")
    if y.min() < 0 or y.max() >= n_class:
        raise ValidationError(f"labels outside [0, {n_class})")
    counts_x = np.bincount(x, minlength=n_in).astype(np.float64)
    counts_xy = np.bincount(x * n_class + y, minlength=n_in * n_class)
    counts_xy = counts_xy.reshape(n_in, n_class).astype(np.float64)
    prior = np.bincount(y, minlength=n_class).astype(np.float64) / y.size
    py_x = np.where(counts_x[:, None] > 0,
                    counts_xy / np.maximum(counts_x[:, None], 1.0),
                    prior[None, :])
    return DiscreteDistribution(counts_x / x.size), ConditionalMatrix(py_x)


def _posteriors(px, py_x, channel):
    """Output marginal and class posterior induced by a channel.

    Outputs with zero marginal get the global class prior as posterior;
    the update gives them zero weight anyway.
    """
    p_out = px @ channel
    joint_out_in = (px[:, None] * channel).T        # p(out, in)
    prior = px @ py_x
    with np.errstate(invalid="ignore", divide="ignore"):
        py_out = (joint_out_in / p_out[:, None]) @ py_x
    py_out[p_out == 0] = prior
    return p_out, py_out


_NEG_HUGE = -1e300  # finite stand-in for log2(0): keeps 0*log terms at 0, not nan


def _distortions(py_x, py_out):
    """Pairwise KL(P(y|in=i) || P(y|out=j)) in bits; support gaps become huge."""
    log_q = np.where(py_out > 0, np.log2(np.where(py_out > 0, py_out, 1.0)), _NEG_HUGE)
    plogp = np.where(py_x > 0, py_x * np.log2(np.where(py_x > 0, py_x, 1.0)), 0.0)
    cross = py_x @ log_q.T
    return plogp.sum(axis=1)[:, None] - cross


def _ib_step_raw(px, py_x, beta, channel):
    p_out, py_out = _posteriors(px, py_x, channel)
    d = _distortions(py_x, py_out)
    with np.errstate(under="ignore"):
        # cap at 0: float error can push d a hair below zero
        new = p_out[None, :] * np.exp2(np.clip(-beta * d, _NEG_HUGE, 0.0))
    sums = new.sum(axis=1)
    dead = sums <= 0
    if np.any(dead):
        # whole row underflowed: hard-assign the least-distorted output
        new[dead] = 0.0
        new[dead, np.argmin(d[dead], axis=1)] = 1.0
        sums[dead] = 1.0
    new /= sums[:, None]
    new[px == 0] = p_out
    return new


def ib_step(problem: IBProblem, channel: ConditionalMatrix) -> ConditionalMatrix:
    """One full self-consistent update of the channel."""
    if channel.rows != problem.n_in or channel.cols != problem.n_out:
        raise ValidationError(
            f"channel is {channel.rows}x{channel.cols}, expected "
            f"{problem.n_in}x{problem.n_out}"
        )
    return ConditionalMatrix(
        _ib_step_raw(problem.px.probs, problem.py_given_x.p, problem.beta, channel.p)
    )


def _joint_out_y(px, py_x, channel):
    """Joint P(out, y) induced by source, class posterior and channel."""
    return (channel * px[:, None]).T @ py_x


def _lagrangian_raw(px, py_x, beta, channel):
    i_in_out = mutual_information_raw(px, channel)
    i_y_out = joint_mi_raw(_joint_out_y(px, py_x, channel))
    return i_in_out - beta * i_y_out


def lagrangian(problem: IBProblem, channel: ConditionalMatrix) -> float:
    """Training objective I(in;out) - beta * I(y;out), in bits."""
    if channel.rows != problem.n_in or channel.cols != problem.n_out:
        raise ValidationError(
            f"channel is {channel.rows}x{channel.cols}, expected "
            f"{problem.n_in}x{problem.n_out}"
        )
    return _lagrangian_raw(problem.px.probs, problem.py_given_x.p,
                           problem.beta, channel.p)


def _init_channel(n_in, n_out, rng):
    w = rng.random((n_in, n_out)) + 1e-12
    return w / w.sum(axis=1, keepdims=True)


def solve_ib(problem: IBProblem, tol: float = DEFAULT_TOL,
             max_iter: int = DEFAULT_MAX_ITER, seed: int = 0) -> IBSolution:
    """Iterate the self-consistent update from a seeded random channel.

    Stops when the max-abs channel change drops below ``tol`` or after
    ``max_iter`` sweeps; non-convergence is reported in the diagnostics,
    never raised.  Same (problem, tol, max_iter, seed) gives a bit-identical
    solution.
    """
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ValidationError(f"max_iter must be >= 1, got {max_iter}")
    px = problem.px.probs
    py_x = problem.py_given_x.p
    beta = problem.beta
    rng = np.random.default_rng(seed)
    channel = _init_channel(problem.n_in, problem.n_out, rng)

    trace = []
    converged = False
    iterations = 0
    for _ in range(max_iter):
        new = _ib_step_raw(px, py_x, beta, channel)
        iterations += 1
        trace.append(_lagrangian_raw(px, py_x, beta, new))
        delta = np.abs(new - channel).max()
        channel = new
        if delta < tol:
            converged = True
            break

    p_out, py_out = _posteriors(px, py_x, channel)
    diagnostics = IBDiagnostics(
        iterations=iterations,
        lagrangian_trace=tuple(trace),
        i_in_out=mutual_information_raw(px, channel),
        i_y_out=joint_mi_raw(_joint_out_y(px, py_x, channel)),
        converged=converged,
    )
    return IBSolution(
        channel=ConditionalMatrix(channel),
        p_out=DiscreteDistribution(p_out),
        py_given_out=ConditionalMatrix(py_out),
        diagnostics=diagnostics,
    )
