"""Binary-weight recurrent network over Z_p and its unrolled linear maps.

The state recurrence is ``S_{t+1} = f(W @ (A_t * S_t) + theta)`` with ``f``
the mod-p reduction, ``W`` a binarized weight matrix (entries 1 or p-1) and
``A_t`` a per-step attention vector with entries in [1, p-1].  Because every
step is affine mod p, running the recurrence for rho steps equals a single
affine map ``S_rho = f(w_x @ S_0 + w_theta @ theta)`` whose factors this
module computes exactly; that closed form is what the signature scheme
inverts.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field as dc_field
from typing import Optional, Tuple

from .errors import DimensionMismatch, ParameterError, SingularWeightsError
from .field import Field, active_counter
from .matrix import MatrixZp, det, identity, mat_add, mat_inv, mat_mul, mat_vec, vec_add, vec_sub

# How many fresh draws sample_weights makes before giving up on a nonsingular
# binarization.  Singular draws are common at tiny n (half of all 2x2 sign
# matrices), vanishing by n ~ 8, so a deep retry budget costs nothing.
WEIGHT_RETRY_CAP = 64


@dataclass(frozen=True)
class NetworkConfig:
    """Shape, modulus, depth, and seed material for building a network."""

    n: int
    field: Field
    rho: int
    seed: bytes = b""

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ParameterError(f"need at least 2 neurons, got n={self.n}")
        if self.rho < 1:
            raise ParameterError(f"need at least 1 recurrence step, got rho={self.rho}")
        if not isinstance(self.seed, bytes):
            raise ParameterError("seed must be bytes")


@dataclass(frozen=True)
class SynapticWeights:
    """Binarized weight matrix; every entry is 1 or p-1."""

    w: MatrixZp
    real_source: Optional[tuple] = dc_field(default=None, compare=False, repr=False)

    @property
    def n(self) -> int:
        return self.w.n_rows


@dataclass(frozen=True)
class AttentionSchedule:
    """One attention vector per recurrence step, entries in [1, p-1]."""

    vectors: tuple

    @property
    def rho(self) -> int:
        return len(self.vectors)


@dataclass(frozen=True)
class UnrolledMaps:
    """Closed-form factors of the unrolled recurrence."""

    w_x: MatrixZp
    w_theta: MatrixZp


def sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-z))


def quantize_unit(a: float, p: int) -> int:
    """Map a real in (0, 1) to a nonzero field element: 1 + floor(a*(p-1)), clamped."""
    return min(1 + math.floor(a * (p - 1)), p - 1)


def binarize(real_rows, field: Field) -> SynapticWeights:
    """Sign-binarize a real matrix: entry >= 0 becomes 1, entry < 0 becomes p-1.

    Raises SingularWeightsError when the binarized matrix is singular mod p;
    the caller is expected to resample.
    """
    p = field.p
    rows = tuple(tuple(1 if x >= 0 else p - 1 for x in row) for row in real_rows)
    if rows and any(len(r) != len(rows[0]) for r in rows):
        raise DimensionMismatch("ragged weight rows")
    w = MatrixZp(field, rows)
    if w.n_rows != w.n_cols:
        raise DimensionMismatch("weight matrix must be square")
    if det(w) == 0:
        raise SingularWeightsError("binarized weights are singular mod p")
    return SynapticWeights(w=w, real_source=tuple(tuple(float(x) for x in row) for row in real_rows))


def sample_weights(n: int, field: Field, rng, max_tries: int = WEIGHT_RETRY_CAP) -> SynapticWeights:
    """Draw standard-normal entries and binarize, retrying singular draws."""
    last = None
    for _ in range(max_tries):
        reals = [[rng.gauss(0.0, 1.0) for _ in range(n)] for _ in range(n)]
        try:
            return binarize(reals, field)
        except SingularWeightsError as exc:
            last = exc
    raise SingularWeightsError(f"no invertible binarization in {max_tries} draws") from last


def _sub_rng(seed: bytes, tag: bytes) -> random.Random:
    digest = hashlib.sha256(seed + b":" + tag).digest()
    return random.Random(int.from_bytes(digest, "big"))


def generate_attention(config: NetworkConfig, initial_state) -> AttentionSchedule:
    """Deterministic attention schedule from the config seed.

    Each step applies a sigmoid to (state surrogate + uniform noise) and
    quantizes into [1, p-1]; the surrogate entering the next step is the
    previous quantized value scaled back into [0, 1) by dividing by p.
    """
    if len(initial_state) != config.n:
        raise DimensionMismatch("initial state length does not match n")
    p = config.field.p
    rng = _sub_rng(config.seed, b"attention")
    surrogate = [s / p for s in initial_state]
    steps = []
    for _ in range(config.rho):
        vec = []
        for i in range(config.n):
            a_real = sigmoid(surrogate[i] + rng.random())
            q = quantize_unit(a_real, p)
            vec.append(q)
            surrogate[i] = q / p
        steps.append(tuple(vec))
    return AttentionSchedule(tuple(steps))


def build_network(config: NetworkConfig) -> Tuple[SynapticWeights, AttentionSchedule]:
    """Weights plus schedule, both a pure function of config.seed."""
    weights = sample_weights(config.n, config.field, _sub_rng(config.seed, b"weights"))
    s0 = config.field.sample_vector(_sub_rng(config.seed, b"state"), config.n)
    return weights, generate_attention(config, s0)


def step_matrix(weights: SynapticWeights, attention_vec) -> MatrixZp:
    """W with column j scaled by the j-th attention entry (W @ diag(A))."""
    w = weights.w
    if len(attention_vec) != w.n_cols:
        raise DimensionMismatch("attention vector length does not match n")
    p = w.field.p
    out = tuple(tuple(x * a % p for x, a in zip(row, attention_vec)) for row in w.rows)
    c = active_counter()
    if c is not None:
        c.muls += w.n_rows * w.n_cols
    return MatrixZp(w.field, out)


def evolve_iterative(weights: SynapticWeights, schedule: AttentionSchedule, s0, theta) -> tuple:
    """Run the recurrence step by step (the reference path for the closed form)."""
    w = weights.w
    n = w.n_rows
    if len(s0) != n or len(theta) != n:
        raise DimensionMismatch("state/bias length does not match n")
    field = w.field
    p = field.p
    state = tuple(x % p for x in s0)
    c = active_counter()
    for att in schedule.vectors:
        if len(att) != n:
            raise DimensionMismatch("attention vector length does not match n")
        gated = tuple(a * s % p for a, s in zip(att, state))
        if c is not None:
            c.muls += n
        state = vec_add(field, mat_vec(w, gated), theta)
    return state


def unroll(weights: SynapticWeights, schedule: AttentionSchedule) -> UnrolledMaps:
    """Collapse rho recurrence steps into (w_x, w_theta).

    With step matrices M_j = W @ diag(A_j), applied oldest first:
    w_x = M_{rho-1} @ ... @ M_0 and w_theta sums the suffix products
    M_{rho-1} @ ... @ M_{k+1} for each step k (empty product = identity).
    """
    if schedule.rho < 1:
        raise ParameterError("schedule must have at least one step")
    field = weights.w.field
    n = weights.n
    steps = [step_matrix(weights, att) for att in schedule.vectors]
    suffix = identity(field, n)
    w_theta = suffix
    for k in range(len(steps) - 2, -1, -1):
        suffix = mat_mul(suffix, steps[k + 1])
        w_theta = mat_add(w_theta, suffix)
    w_x = mat_mul(suffix, steps[0])
    return UnrolledMaps(w_x=w_x, w_theta=w_theta)


def forward(maps: UnrolledMaps, x, theta) -> tuple:
    """Evaluate the closed form f(w_x @ x + w_theta @ theta)."""
    return vec_add(maps.w_x.field, mat_vec(maps.w_x, x), mat_vec(maps.w_theta, theta))


def invert(maps: UnrolledMaps, y, theta) -> tuple:
    """Recover x with f(w_x^{-1} @ (y - f(w_theta @ theta)))."""
    field = maps.w_x.field
    bias = mat_vec(maps.w_theta, theta)
    return mat_vec(mat_inv(maps.w_x), vec_sub(field, y, bias))
