"""Synthetic-world verification lab for the pipeline's entropy-reduction claims.

A SyntheticWorld is a fully specified discrete generative model over
(X, I, S, S*, C, Y) with the Markov chain X -> I -> S -> S* built in.  On such
worlds the conditioning contraction chain, the data-processing ordering, the
min-vs-mean selection bound, and the strict-reduction iff-condition are
theorems about the true joint distribution, so exact enumeration is the
primary verification path; Monte Carlo estimation exists only to exercise the
plug-in estimators, gated at 3 sigma.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from . import infomath
from .core import AnswerPosterior
from .errors import InvalidWorld

#: slack absorbing float roundoff in exact-mode comparisons
EXACT_EPS = 1e-12
#: exact enumeration is available up to this joint table size
EXACT_STATE_LIMIT = 10**6
#: sample sizes below this operate outside the estimator's design point
RECOMMENDED_MIN_SAMPLES = 10_000

# joint table axis order
_AX_X, _AX_I, _AX_S, _AX_T, _AX_C, _AX_Y = range(6)


def _check_rows(name: str, table: np.ndarray) -> None:
    if np.any(table < -1e-12):
        raise InvalidWorld(f"{name}: negative entries")
    sums = table.sum(axis=-1)
    if not np.allclose(sums, 1.0, atol=1e-9):
        raise InvalidWorld(f"{name}: rows must sum to 1, worst {np.abs(sums - 1).max():.3e}")


@dataclass(frozen=True)
class SyntheticWorld:
    """Discrete generative model with the chain X -> I -> S -> S* by construction.

    ``p_y_given_xisc`` has shape (|X|, |I|, |S|, |C|, |Y|): the answer depends
    on the input, the intent, the strategy, and the conditioning, while the
    observable selected strategy S* is a pure channel off S.
    """

    seed: int
    px: np.ndarray
    pc: np.ndarray
    p_i_given_x: np.ndarray
    p_s_given_i: np.ndarray
    p_t_given_s: np.ndarray
    p_y_given_xisc: np.ndarray

    def __post_init__(self) -> None:
        nx, ni = self.p_i_given_x.shape
        ni2, ns = self.p_s_given_i.shape
        ns2, nt = self.p_t_given_s.shape
        if self.px.shape != (nx,) or ni2 != ni or ns2 != ns:
            raise InvalidWorld("conditional table shapes are inconsistent")
        nc = self.pc.shape[0]
        if self.p_y_given_xisc.shape[:4] != (nx, ni, ns, nc):
            raise InvalidWorld(
                f"p(Y|X,I,S,C) leading shape {self.p_y_given_xisc.shape[:4]}"
                f" != {(nx, ni, ns, nc)}"
            )
        _check_rows("p(X)", self.px[None, :])
        _check_rows("p(C)", self.pc[None, :])
        _check_rows("p(I|X)", self.p_i_given_x)
        _check_rows("p(S|I)", self.p_s_given_i)
        _check_rows("p(S*|S)", self.p_t_given_s)
        _check_rows("p(Y|X,I,S,C)", self.p_y_given_xisc)

    @property
    def cardinalities(self) -> tuple[int, int, int, int, int, int]:
        """(|X|, |I|, |S|, |S*|, |C|, |Y|)."""
        nx, ni = self.p_i_given_x.shape
        ns, nt = self.p_t_given_s.shape
        return nx, ni, self.p_s_given_i.shape[1], nt, self.pc.shape[0], self.p_y_given_xisc.shape[-1]

    @property
    def joint_size(self) -> int:
        return int(np.prod(self.cardinalities))

    @property
    def exact_available(self) -> bool:
        return self.joint_size <= EXACT_STATE_LIMIT

    def joint(self) -> np.ndarray:
        """Exact joint p(x, i, s, s*, c, y) as a 6-axis table."""
        if not self.exact_available:
            raise InvalidWorld(f"joint table of {self.joint_size} states exceeds exact limit")
        return np.einsum(
            "x,xi,is,st,c,xiscy->xistcy",
            self.px,
            self.p_i_given_x,
            self.p_s_given_i,
            self.p_t_given_s,
            self.pc,
            self.p_y_given_xisc,
            optimize=True,
        )

    @classmethod
    def random(
        cls,
        seed: int,
        *,
        card_x: int = 3,
        card_i: int = 3,
        card_s: int = 3,
        card_y: int = 3,
        card_c: int = 2,
        concentration: float = 1.0,
    ) -> "SyntheticWorld":
        """Random world with Dirichlet rows; |S*| = |S|."""
        rng = np.random.default_rng(seed)

        def rows(*shape: int) -> np.ndarray:
            alpha = np.full(shape[-1], concentration)
            return rng.dirichlet(alpha, size=shape[:-1])

        return cls(
            seed=seed,
            px=rng.dirichlet(np.full(card_x, concentration)),
            pc=rng.dirichlet(np.full(card_c, concentration)),
            p_i_given_x=rows(card_x, card_i),
            p_s_given_i=rows(card_i, card_s),
            p_t_given_s=rows(card_s, card_s),
            p_y_given_xisc=rows(card_x, card_i, card_s, card_c, card_y),
        )

    @classmethod
    def y_independent_of_context(cls, seed: int, **kwargs: Any) -> "SyntheticWorld":
        """World where Y depends on X only: every added condition is inert."""
        base = cls.random(seed, **kwargs)
        nx, ni, ns, _, nc, ny = base.cardinalities
        rng = np.random.default_rng(seed + 1)
        per_x = rng.dirichlet(np.ones(ny), size=nx)
        table = np.broadcast_to(per_x[:, None, None, None, :], (nx, ni, ns, nc, ny)).copy()
        return cls(
            seed=seed,
            px=base.px,
            pc=base.pc,
            p_i_given_x=base.p_i_given_x,
            p_s_given_i=base.p_s_given_i,
            p_t_given_s=base.p_t_given_s,
            p_y_given_xisc=table,
        )

    @classmethod
    def deterministic_answer(cls, seed: int, **kwargs: Any) -> "SyntheticWorld":
        """World whose answer table is one-hot: H(Y|X,I,S,C) = 0."""
        base = cls.random(seed, **kwargs)
        table = np.zeros_like(base.p_y_given_xisc)
        argmax = base.p_y_given_xisc.argmax(axis=-1)
        np.put_along_axis(table, argmax[..., None], 1.0, axis=-1)
        return cls(
            seed=seed,
            px=base.px,
            pc=base.pc,
            p_i_given_x=base.p_i_given_x,
            p_s_given_i=base.p_s_given_i,
            p_t_given_s=base.p_t_given_s,
            p_y_given_xisc=table,
        )


# -- exact quantities -----------------------------------------------------------

def _entropy_table(p: np.ndarray) -> float:
    """-sum p log p over all cells, in nats."""
    flat = p.reshape(-1)
    nz = flat[flat > 0]
    return float(-(nz * np.log(nz)).sum())


def _marginal(joint: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    drop = tuple(sorted(set(range(joint.ndim)) - set(axes)))
    out = joint.sum(axis=drop)
    order = np.argsort(np.argsort(axes))
    return np.transpose(out, order) if out.ndim > 1 else out


def conditional_entropy(joint: np.ndarray, target: int, given: Sequence[int]) -> float:
    """H(target | given) = H(given, target) - H(given), from the exact joint."""
    h_joint = _entropy_table(_marginal(joint, (*given, target)))
    h_given = _entropy_table(_marginal(joint, tuple(given))) if given else 0.0
    return h_joint - h_given


def mutual_information(joint: np.ndarray, a: Sequence[int], b: Sequence[int]) -> float:
    """I(A; B) = H(A) + H(B) - H(A, B), from the exact joint."""
    return (
        _entropy_table(_marginal(joint, tuple(a)))
        + _entropy_table(_marginal(joint, tuple(b)))
        - _entropy_table(_marginal(joint, (*a, *b)))
    )


# -- sampling ----------------------------------------------------------------------

def _sample_rows(rng: np.random.Generator, table: np.ndarray, index: np.ndarray) -> np.ndarray:
    """Vectorized categorical draw, one row of ``table`` per index entry."""
    rows = table[index]
    u = rng.random(len(index))[:, None]
    return (rows.cumsum(axis=1) < u).sum(axis=1)


def sample_world(w: SyntheticWorld, n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    x = (np.cumsum(w.px) < rng.random(n)[:, None]).sum(axis=1)
    i = _sample_rows(rng, w.p_i_given_x, x)
    s = _sample_rows(rng, w.p_s_given_i, i)
    t = _sample_rows(rng, w.p_t_given_s, s)
    c = (np.cumsum(w.pc) < rng.random(n)[:, None]).sum(axis=1)
    y_rows = w.p_y_given_xisc[x, i, s, c]
    u = rng.random(n)[:, None]
    y = (y_rows.cumsum(axis=1) < u).sum(axis=1)
    return {"x": x, "i": i, "s": s, "t": t, "c": c, "y": y}


def _plugin_conditional_entropy(
    cond: Sequence[np.ndarray], y: np.ndarray, card_y: int
) -> tuple[float, float]:
    """Plug-in estimate of H(Y | cond) and its standard error.

    The estimate is the empirical mean of the per-sample surprisal
    -log p_hat(y_k | z_k); the standard error is its sample std over sqrt(n).
    """
    n = len(y)
    z = np.zeros(n, dtype=np.int64)
    for col in cond:
        z = z * (int(col.max()) + 1) + col
    _, z = np.unique(z, return_inverse=True)
    nz = int(z.max()) + 1
    counts = np.zeros((nz, card_y))
    np.add.at(counts, (z, y), 1.0)
    p_y_given_z = counts / counts.sum(axis=1, keepdims=True)
    surprisal = -np.log(p_y_given_z[z, y])
    return float(surprisal.mean()), float(surprisal.std(ddof=1) / math.sqrt(n))


# -- checks ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContractionResult:
    """Chain H(Y|X) >= H(Y|X,I) >= H(Y|X,I,S) >= H(Y|X,I,S,C)."""

    exact: tuple[float, float, float, float] | None
    sampled: tuple[float, float, float, float] | None
    sigmas: tuple[float, float, float, float] | None
    n_samples: int
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "check": "contraction",
            "quantities": {
                "exact": None if self.exact is None else list(self.exact),
                "sampled": None if self.sampled is None else list(self.sampled),
                "sigmas": None if self.sigmas is None else list(self.sigmas),
                "n_samples": self.n_samples,
            },
            "pass": self.passed,
        }


def contraction_check(
    w: SyntheticWorld, n_samples: int = 0, *, rng: np.random.Generator | None = None
) -> ContractionResult:
    """Verify the monotone contraction chain, exactly and/or by sampling.

    Exact mode (state space permitting) demands the ordering with zero
    tolerance beyond float roundoff.  Sampled mode estimates the four
    conditional entropies by plug-in and accepts each step up to a 3-sigma
    estimator allowance; sample sizes under 10k warn about wide sigma.
    """
    exact = None
    if w.exact_available:
        joint = w.joint()
        exact = (
            conditional_entropy(joint, _AX_Y, (_AX_X,)),
            conditional_entropy(joint, _AX_Y, (_AX_X, _AX_I)),
            conditional_entropy(joint, _AX_Y, (_AX_X, _AX_I, _AX_S)),
            conditional_entropy(joint, _AX_Y, (_AX_X, _AX_I, _AX_S, _AX_C)),
        )
    sampled = None
    sigmas = None
    if n_samples > 0:
        if n_samples < RECOMMENDED_MIN_SAMPLES:
            warnings.warn(
                f"n_samples={n_samples} below the {RECOMMENDED_MIN_SAMPLES} design point;"
                " sigma will be wide",
                stacklevel=2,
            )
        rng = rng or np.random.default_rng(w.seed)
        draws = sample_world(w, n_samples, rng)
        card_y = w.cardinalities[-1]
        conds = (
            (draws["x"],),
            (draws["x"], draws["i"]),
            (draws["x"], draws["i"], draws["s"]),
            (draws["x"], draws["i"], draws["s"], draws["c"]),
        )
        pairs = [_plugin_conditional_entropy(cond, draws["y"], card_y) for cond in conds]
        sampled = tuple(p[0] for p in pairs)
        sigmas = tuple(p[1] for p in pairs)
    if exact is None and sampled is None:
        raise InvalidWorld("contraction_check needs exact mode or n_samples > 0")

    passed = True
    if exact is not None:
        passed &= all(exact[k + 1] <= exact[k] + EXACT_EPS for k in range(3))
    if sampled is not None:
        for k in range(3):
            allowance = 3.0 * math.hypot(sigmas[k], sigmas[k + 1])
            passed &= sampled[k + 1] <= sampled[k] + allowance
    return ContractionResult(
        exact=exact, sampled=sampled, sigmas=sigmas, n_samples=n_samples, passed=bool(passed)
    )


@dataclass(frozen=True)
class DpiResult:
    """Ordering I(X;S*) <= I(X;S) <= I(X;I) along the Markov chain."""

    mi_x_i: float
    mi_x_s: float
    mi_x_t: float
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "check": "dpi",
            "quantities": {
                "mi_x_intent": self.mi_x_i,
                "mi_x_strategy": self.mi_x_s,
                "mi_x_selected": self.mi_x_t,
            },
            "pass": self.passed,
        }


def dpi_check(w: SyntheticWorld) -> DpiResult:
    """Exact data-processing ordering of mutual informations along the chain."""
    joint = w.joint()
    mi_x_i = mutual_information(joint, (_AX_X,), (_AX_I,))
    mi_x_s = mutual_information(joint, (_AX_X,), (_AX_S,))
    mi_x_t = mutual_information(joint, (_AX_X,), (_AX_T,))
    passed = mi_x_t <= mi_x_s + EXACT_EPS and mi_x_s <= mi_x_i + EXACT_EPS
    return DpiResult(mi_x_i=mi_x_i, mi_x_s=mi_x_s, mi_x_t=mi_x_t, passed=bool(passed))


@dataclass(frozen=True)
class MinMeanResult:
    min_entropy: float
    mean_entropy: float
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "check": "min_vs_mean",
            "quantities": {"min": self.min_entropy, "mean": self.mean_entropy},
            "pass": self.passed,
        }


def min_vs_mean_check(
    posteriors: Sequence[AnswerPosterior | Sequence[float]],
) -> MinMeanResult:
    """The selected (minimum) entropy never exceeds the candidate mean."""
    entropies = [infomath.entropy(p) for p in posteriors]
    lo = min(entropies)
    mean = math.fsum(entropies) / len(entropies)
    return MinMeanResult(min_entropy=lo, mean_entropy=mean, passed=lo <= mean + EXACT_EPS)


@dataclass(frozen=True)
class StrictReductionResult:
    """H(Y|X) vs H(Y|X,S*): strict drop iff I(Y;S*|X) > 0."""

    h_y_given_x: float
    h_y_given_x_t: float
    mi_y_t_given_x: float
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "check": "strict_reduction",
            "quantities": {
                "h_y_given_x": self.h_y_given_x,
                "h_y_given_x_selected": self.h_y_given_x_t,
                "mi_y_selected_given_x": self.mi_y_t_given_x,
            },
            "pass": self.passed,
        }


def strict_reduction_demo(w: SyntheticWorld) -> StrictReductionResult:
    """Exact check that conditioning on S* strictly helps iff it carries
    side information about Y beyond X.

    The conditional mutual information is computed along an independent
    summation path (joint-marginal entropies), so the iff-condition and the
    identity H(Y|X) - H(Y|X,S*) = I(Y;S*|X) are exercised rather than assumed.
    """
    joint = w.joint()
    h_x = conditional_entropy(joint, _AX_Y, (_AX_X,))
    h_xt = conditional_entropy(joint, _AX_Y, (_AX_X, _AX_T))
    mi = (
        _entropy_table(_marginal(joint, (_AX_X, _AX_Y)))
        + _entropy_table(_marginal(joint, (_AX_X, _AX_T)))
        - _entropy_table(_marginal(joint, (_AX_X, _AX_T, _AX_Y)))
        - _entropy_table(_marginal(joint, (_AX_X,)))
    )
    drop = h_x - h_xt > EXACT_EPS
    informative = mi > EXACT_EPS
    passed = (
        h_xt <= h_x + EXACT_EPS
        and abs((h_x - h_xt) - mi) <= EXACT_EPS
        and drop == informative
    )
    return StrictReductionResult(
        h_y_given_x=h_x, h_y_given_x_t=h_xt, mi_y_t_given_x=mi, passed=bool(passed)
    )


@dataclass(frozen=True)
class IntentGainResult:
    """MI(S;(Q,Z)) - MI(S;Q) >= 0 when X factors into coordinates (Q, Z)."""

    mi_strategy_qz: float
    mi_strategy_q: float
    gain: float
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "check": "intent_gain",
            "quantities": {
                "mi_strategy_qz": self.mi_strategy_qz,
                "mi_strategy_q": self.mi_strategy_q,
                "gain": self.gain,
            },
            "pass": self.passed,
        }


def intent_gain_check(
    seed: int, *, card_q: int = 3, card_z: int = 3, card_s: int = 3
) -> IntentGainResult:
    """Exact nonnegativity of the intent conditioning gain on a factored input.

    Builds a random joint p(q, z) with a strategy channel p(s | q, z) and
    computes both mutual informations by exhaustive summation.
    """
    rng = np.random.default_rng(seed)
    p_qz = rng.dirichlet(np.ones(card_q * card_z)).reshape(card_q, card_z)
    p_s_given_qz = rng.dirichlet(np.ones(card_s), size=(card_q, card_z))
    joint = p_qz[:, :, None] * p_s_given_qz  # (Q, Z, S)
    mi_qz = mutual_information(joint, (0, 1), (2,))
    mi_q = mutual_information(joint, (0,), (2,))
    gain = mi_qz - mi_q
    return IntentGainResult(
        mi_strategy_qz=mi_qz, mi_strategy_q=mi_q, gain=gain, passed=gain >= -EXACT_EPS
    )


def fano_diagnostic(w: SyntheticWorld) -> dict[str, float]:
    """Report-only comparison of the Fano error lower bound with the exact
    Bayes risk under full conditioning; nothing is asserted."""
    joint = w.joint()
    card_y = w.cardinalities[-1]
    h_cond = conditional_entropy(joint, _AX_Y, (_AX_X, _AX_I, _AX_S, _AX_C))
    weights = joint.sum(axis=(_AX_T, _AX_Y))  # p(x, i, s, c)
    risk = float((weights * (1.0 - w.p_y_given_xisc.max(axis=-1))).sum())
    bound = _fano_lower_bound(h_cond, card_y)
    return {"h_conditional": h_cond, "fano_error_lower_bound": bound, "bayes_risk": risk}


def _binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


def _fano_lower_bound(h_cond: float, card_y: int) -> float:
    """Smallest error rate consistent with Fano's inequality, by bisection."""
    if card_y < 2 or h_cond <= 0.0:
        return 0.0
    hi_cap = 1.0 - 1.0 / card_y

    def fano_rhs(pe: float) -> float:
        return _binary_entropy(pe) + pe * math.log(card_y - 1)

    if fano_rhs(hi_cap) < h_cond:
        return hi_cap
    lo, hi = 0.0, hi_cap
    for _ in range(80):
        mid = (lo + hi) / 2
        if fano_rhs(mid) >= h_cond:
            hi = mid
        else:
            lo = mid
    return hi
