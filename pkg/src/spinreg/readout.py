"""Markov-chain model of nuclear quantum non-demolition readout.

One readout of a nucleus consists of N shots. Each shot drives the
electron conditionally on the nucleus being down, reads the electron,
then drives conditionally on the nucleus being up and reads again. Blip
counters for the two halves give fractions f_down and f_up; the readout
classifies the spin from the sign of ``delta_f = f_up - f_down`` and a
certainty threshold on ``|delta_f|`` postselects confident outcomes. The
nucleus may flip during a shot, which is what the threshold is designed
to reject.

The model is three numbers per nucleus: p_corr (blip probability when
driving the peak matching the true state), p_err (blip when driving the
opposite peak) and p_flip (flip probability per shot, split evenly
between the two inter-drive gaps).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize


@dataclass(frozen=True)
class MarkovReadoutModel:
    p_corr: float
    p_err: float
    p_flip: float

    def __post_init__(self):
        for name in ("p_corr", "p_err", "p_flip"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if self.p_corr <= self.p_err:
            raise ValueError("p_corr must exceed p_err for an informative readout")


@dataclass(frozen=True)
class ReadoutPolicy:
    """Shot counts, certainty thresholds and measurement orders for the three nuclei."""

    shots: tuple[int, int, int] = (24, 18, 24)
    thresholds: tuple[float, float, float] = (0.12, 0.24, 0.16)
    end_order: tuple[int, int, int] = (2, 3, 1)
    start_order: tuple[int, int, int] = (1, 3, 2)

    def __post_init__(self):
        if any(n < 1 for n in self.shots):
            raise ValueError("shot counts must be >= 1")
        if any(not 0.0 <= t < 1.0 for t in self.thresholds):
            raise ValueError("thresholds must lie in [0, 1)")
        for order in (self.end_order, self.start_order):
            if sorted(order) != [1, 2, 3]:
                raise ValueError(f"measurement order {order} must permute (1, 2, 3)")


@dataclass(frozen=True)
class ReadoutOutcome:
    delta_f: float
    classified: int          # 0 = down, 1 = up
    accepted: bool
    post_state: int


def classify(delta_f: float) -> int:
    """Up for positive delta_f, down otherwise."""
    return 1 if delta_f > 0 else 0


def simulate_readout(model: MarkovReadoutModel, true_state: int, shots: int, rng,
                     threshold: float = 0.0) -> ReadoutOutcome:
    """Sample one N-shot readout of a single nucleus."""
    df, post = simulate_readout_batch(model, np.array([true_state]), shots, rng)
    d = float(df[0])
    return ReadoutOutcome(d, classify(d), bool(abs(d) >= threshold - 1e-12), int(post[0]))


def simulate_readout_batch(model: MarkovReadoutModel, true_states: np.ndarray, shots: int, rng):
    """Vectorized readout chains. Returns (delta_f, post_state) arrays."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    s = np.asarray(true_states).astype(np.int8).copy()
    m = s.size
    n_down = np.zeros(m, dtype=np.int32)
    n_up = np.zeros(m, dtype=np.int32)
    half_flip = model.p_flip / 2.0
    for _ in range(shots):
        p_blip = np.where(s == 0, model.p_corr, model.p_err)
        n_down += rng.random(m) < p_blip
        s ^= rng.random(m) < half_flip
        p_blip = np.where(s == 1, model.p_corr, model.p_err)
        n_up += rng.random(m) < p_blip
        s ^= rng.random(m) < half_flip
    return (n_up - n_down) / shots, s


@lru_cache(maxsize=128)
def chain_distribution(model: MarkovReadoutModel, shots: int) -> np.ndarray:
    """Exact joint law of the readout chain.

    Returns P[s0, s_final, n_down, n_up], shape (2, 2, shots+1, shots+1),
    for both initial spin states.
    """
    out = np.zeros((2, 2, shots + 1, shots + 1))
    half_flip = model.p_flip / 2.0
    for s0 in (0, 1):
        p = np.zeros((2, shots + 1, shots + 1))
        p[s0, 0, 0] = 1.0
        for _ in range(shots):
            q = np.zeros_like(p)
            for s in (0, 1):
                pa = model.p_corr if s == 0 else model.p_err
                for blip_a in (0, 1):
                    w_a = pa if blip_a else 1.0 - pa
                    if w_a == 0.0:
                        continue
                    for f1 in (0, 1):
                        w_1 = half_flip if f1 else 1.0 - half_flip
                        if w_1 == 0.0:
                            continue
                        s1 = s ^ f1
                        pb = model.p_corr if s1 == 1 else model.p_err
                        for blip_b in (0, 1):
                            w_b = pb if blip_b else 1.0 - pb
                            if w_b == 0.0:
                                continue
                            for f2 in (0, 1):
                                w_2 = half_flip if f2 else 1.0 - half_flip
                                if w_2 == 0.0:
                                    continue
                                w = w_a * w_1 * w_b * w_2
                                s2 = s1 ^ f2
                                if blip_a and blip_b:
                                    q[s2, 1:, 1:] += w * p[s, :-1, :-1]
                                elif blip_a:
                                    q[s2, 1:, :] += w * p[s, :-1, :]
                                elif blip_b:
                                    q[s2, :, 1:] += w * p[s, :, :-1]
                                else:
                                    q[s2] += w * p[s]
            p = q
        out[s0] = p
    out.flags.writeable = False
    return out


def _masks(shots: int, threshold: float):
    nd = np.arange(shots + 1)[:, None]
    nu = np.arange(shots + 1)[None, :]
    df = (nu - nd) / shots
    return df > 0, np.abs(df) >= threshold - 1e-12


def exact_readout_fidelity(model: MarkovReadoutModel, shots: int,
                           threshold: float = 0.0) -> tuple[float, float]:
    """Classification fidelity and retained fraction by exact enumeration.

    Fidelity is the probability that the thresholded classification matches
    the initial spin, uniform prior over the two spin states.
    """
    dist = chain_distribution(model, shots)
    up, acc = _masks(shots, threshold)
    fid = 0.0
    ret = 0.0
    for s0 in (0, 1):
        marg = dist[s0].sum(axis=0)
        correct = up if s0 == 1 else ~up
        ret += 0.5 * marg[acc].sum()
        fid += 0.5 * marg[acc & correct].sum()
    return (fid / ret if ret > 0 else 0.0), ret


def exact_fidelity_curve(model: MarkovReadoutModel, max_shots: int,
                         threshold: float = 0.0):
    """(fidelity, retention) arrays indexed by shot count 1..max_shots (index 0 unused)."""
    fids = np.zeros(max_shots + 1)
    rets = np.zeros(max_shots + 1)
    for n in range(1, max_shots + 1):
        fids[n], rets[n] = exact_readout_fidelity(model, n, threshold)
    return fids, rets


def exact_double_readout(model: MarkovReadoutModel, shots: int,
                         threshold: float) -> tuple[float, float]:
    """Agreement probability of two consecutive readouts, both postselected.

    The second readout starts from the (possibly flipped) post-state of the
    first; the wait between readouts contributes no flips in this model.
    """
    dist = chain_distribution(model, shots)
    up, acc = _masks(shots, threshold)
    # P(classified c & accepted | start state s) for the second readout
    p2 = np.zeros((2, 2))
    for s in (0, 1):
        marg = dist[s].sum(axis=0)
        p2[s, 1] = marg[acc & up].sum()
        p2[s, 0] = marg[acc & ~up].sum()
    agree = 0.0
    both = 0.0
    for s0 in (0, 1):
        for s_final in (0, 1):
            joint = dist[s0, s_final]
            for c1 in (0, 1):
                sel = acc & (up if c1 == 1 else ~up)
                w = 0.5 * joint[sel].sum()
                both += w * (p2[s_final, 0] + p2[s_final, 1])
                agree += w * p2[s_final, c1]
    return (agree / both if both > 0 else 0.0), both


def exact_delta_f_distribution(model: MarkovReadoutModel, shots: int, prior: float = 0.5):
    """Exact law of delta_f. Returns (values, probabilities), values ascending."""
    dist = chain_distribution(model, shots)
    marg = (1.0 - prior) * dist[0].sum(axis=0) + prior * dist[1].sum(axis=0)
    probs = np.zeros(2 * shots + 1)
    for nd in range(shots + 1):
        for nu in range(shots + 1):
            probs[nu - nd + shots] += marg[nd, nu]
    values = np.arange(-shots, shots + 1) / shots
    return values, probs


def optimize_shot_counts(models, max_shots: int = 50, thresholds=(0.0, 0.0, 0.0),
                         plateau_tol: float = 0.0):
    """Shot counts maximizing the combined fidelity F1*F2*F3.

    The combined fidelity factorizes, so each nucleus is scanned separately
    over 1..max_shots. With ``plateau_tol > 0`` the earliest count whose
    fidelity is within the tolerance of that nucleus' maximum is chosen,
    which mirrors picking the saturation point of a flat curve; exact ties
    always resolve toward fewer shots.
    """
    best = []
    total = 1.0
    for model, th in zip(models, thresholds):
        fids, _ = exact_fidelity_curve(model, max_shots, th)
        top = fids[1:].max()
        n = int(np.argmax(fids[1:] >= top - plateau_tol)) + 1
        best.append(n)
        total *= fids[n]
    return tuple(best), total


def uncertainty_sigma_f(f: float, n: int) -> float:
    """Binomial-style one-sigma band for an observed fidelity from n retained counts."""
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"fidelity {f} outside [0, 1]")
    if n < 0:
        raise ValueError("count must be nonnegative")
    return np.sqrt(1.0 + 4.0 * f * (1.0 - f) * n) / (2.0 * (n + 1.0))


@dataclass(frozen=True)
class ReadoutExperimentResult:
    fidelity: tuple[float, float, float]
    sigma: tuple[float, float, float]
    retention: tuple[float, float, float]
    combined_retention: float
    combined_fidelity: float
    repetitions: int


def readout_fidelity_experiment(models, policy: ReadoutPolicy, repetitions: int,
                                rng) -> ReadoutExperimentResult:
    """Double-readout agreement experiment, sampled.

    Each repetition reads all three nuclei, waits, and reads them again;
    the per-nucleus fidelity is the agreement rate between the two
    classifications over repetitions where both were accepted.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    fidelities = []
    sigmas = []
    retentions = []
    for model, shots, th in zip(models, policy.shots, policy.thresholds):
        start = rng.integers(0, 2, size=repetitions)
        df1, post = simulate_readout_batch(model, start, shots, rng)
        df2, _ = simulate_readout_batch(model, post, shots, rng)
        acc1 = np.abs(df1) >= th - 1e-12
        acc2 = np.abs(df2) >= th - 1e-12
        both = acc1 & acc2
        n_both = int(both.sum())
        agree = ((df1 > 0) == (df2 > 0)) & both
        fid = agree.sum() / n_both if n_both else 0.0
        fidelities.append(float(fid))
        sigmas.append(float(uncertainty_sigma_f(fid, n_both)))
        retentions.append(float(acc1.mean()))
    combined_ret = float(np.prod(retentions))
    combined_fid = float(np.prod(fidelities))
    return ReadoutExperimentResult(tuple(fidelities), tuple(sigmas), tuple(retentions),
                                   combined_ret, combined_fid, repetitions)


def fit_markov_model(delta_f_counts: np.ndarray, shots: int, prior: float = 0.5,
                     start=None) -> MarkovReadoutModel:
    """Maximum-likelihood Markov parameters from a delta_f histogram.

    `delta_f_counts` holds counts for the 2*shots+1 possible delta_f values
    in ascending order, as produced by histogramming `simulate_readout_batch`
    output against `exact_delta_f_distribution` values.
    """
    counts = np.asarray(delta_f_counts, dtype=float)
    if counts.size != 2 * shots + 1:
        raise ValueError(f"expected {2 * shots + 1} histogram bins, got {counts.size}")

    def nll(x):
        pc = 1.0 / (1.0 + np.exp(-x[0]))
        pe = 1.0 / (1.0 + np.exp(-x[1]))
        pf = np.exp(x[2])
        if pe >= pc or pf > 0.5:
            return 1e9
        try:
            model = MarkovReadoutModel(pc, pe, pf)
        except ValueError:
            return 1e9
        _, probs = exact_delta_f_distribution(model, shots, prior)
        return -np.sum(counts * np.log(np.clip(probs, 1e-300, None)))

    if start is None:
        start = (0.8, 0.4, 1e-3)
    x0 = [np.log(start[0] / (1 - start[0])), np.log(start[1] / (1 - start[1])), np.log(start[2])]
    res = minimize(nll, x0, method="Nelder-Mead",
                   options=dict(maxiter=2000, xatol=1e-6, fatol=1e-8))
    pc = 1.0 / (1.0 + np.exp(-res.x[0]))
    pe = 1.0 / (1.0 + np.exp(-res.x[1]))
    return MarkovReadoutModel(pc, pe, float(np.exp(res.x[2])))
