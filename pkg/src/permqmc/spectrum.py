"""Eigenvalue spectrum of the embedding operator on the invariant space.

The univariate spectrum consists of the constant-mode mass beta0 and the
oscillatory masses beta1/R(m)^(2*alpha), each of multiplicity two.  The
multivariate eigenvalues are products of univariate ones over index tuples
whose entries on the exchangeable coordinates are non-decreasing; they are
enumerated best-first through a max-heap.  Tail sums, decay constants, and
the bootstrap rate constants live here as well.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .kernels import KernelSpec, permutation_power_sum, symmetrized_mass
from .symmetry import normalize_to_nabla
from .weights import Enclosure, SpectralWeight, tail_sum

__all__ = [
    "univariate_eigenvalues",
    "EigenSpectrum",
    "multivariate_spectrum",
    "TailConstants",
    "spectrum_tail_constants",
    "RateConstants",
    "rate_constants",
    "c_prime",
]


def univariate_eigenvalues(w: SpectralWeight, count: int) -> np.ndarray:
    """Largest ``count`` univariate eigenvalues, non-increasing."""
    return np.array([lam for lam, _ in univariate_labeled(w, count)])


def univariate_labeled(w: SpectralWeight, count: int) -> list[tuple[float, int]]:
    """(eigenvalue, frequency) pairs sorted by descending eigenvalue.

    Order is deterministic: ties resolve by |frequency|, positive first.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    m_max = count + len(getattr(w.generator, "table", ())) + 8
    ms = np.arange(1, m_max + 1)
    osc = w.oscillatory_weight_inv(ms)
    entries = [(w.beta0, 0)]
    for m, lam in zip(ms, osc):
        entries.append((float(lam), int(m)))
        entries.append((float(lam), -int(m)))
    entries.sort(key=lambda e: (-e[0], abs(e[1]), 0 if e[1] >= 0 else 1))
    return entries[:count]


class EigenSpectrum:
    """Lazily enumerated multivariate eigenvalues with canonical labels.

    Labels are frequency vectors in the sorted fundamental domain of the
    exchange group.  The stream is non-increasing; ties break on the index
    tuple, so the order is reproducible.
    """

    def __init__(self, spec: KernelSpec):
        self.spec = spec
        self._univ: list[tuple[float, int]] = univariate_labeled(spec.weight, 64)
        d = spec.d
        inv0 = {int(i) - 1 for i in spec.perm.invariant}
        self._inv_positions = sorted(inv0)
        start = tuple([0] * d)
        self._heap: list[tuple[float, tuple[int, ...]]] = [(-self._value(start), start)]
        self._seen = {start}
        self._values: list[float] = []
        self._labels: list[tuple[int, ...]] = []
        self._canon: list[tuple[int, ...]] = []
        self._trace: Enclosure | None = None

    def _univ_value(self, idx: int) -> float:
        while idx >= len(self._univ):
            self._univ = univariate_labeled(self.spec.weight, 2 * len(self._univ))
        return self._univ[idx][0]

    def _value(self, label: tuple[int, ...]) -> float:
        out = 1.0
        for idx in label:
            out *= self._univ_value(idx)
        return out

    def _valid(self, label: tuple[int, ...]) -> bool:
        pos = self._inv_positions
        return all(label[pos[i]] <= label[pos[i + 1]] for i in range(len(pos) - 1))

    def ensure(self, m: int) -> None:
        while len(self._values) < m:
            if not self._heap:
                raise RuntimeError("eigenvalue stream exhausted")
            neg, label = heapq.heappop(self._heap)
            self._values.append(-neg)
            self._labels.append(label)
            for j in range(self.spec.d):
                succ = list(label)
                succ[j] += 1
                succ_t = tuple(succ)
                if succ_t in self._seen or not self._valid(succ_t):
                    continue
                self._seen.add(succ_t)
                heapq.heappush(self._heap, (-self._value(succ_t), succ_t))

    def values(self, m: int) -> np.ndarray:
        self.ensure(m)
        return np.asarray(self._values[:m])

    def entry(self, i: int) -> tuple[float, tuple[int, ...]]:
        """i-th (zero-based) eigenvalue with its canonical frequency label."""
        self.ensure(i + 1)
        while len(self._canon) <= i:
            lab = self._labels[len(self._canon)]
            freq = tuple(self._univ[idx][1] for idx in lab)
            self._canon.append(normalize_to_nabla(freq, self.spec.perm))
        return self._values[i], self._canon[i]

    def labels(self, m: int) -> list[tuple[int, ...]]:
        """Canonical frequency vectors of the first m modes."""
        if m:
            self.entry(m - 1)
        return list(self._canon[:m])

    @property
    def trace(self) -> Enclosure:
        """Total spectral mass; equals the diagonal kernel integral."""
        if self._trace is None:
            self._trace = symmetrized_mass(self.spec)
        return self._trace

    def partial_sum(self, m: int) -> float:
        self.ensure(m)
        return float(np.sum(self._values[:m]))

    def tail_after(self, m: int) -> Enclosure:
        """Enclosure of the spectral mass beyond the first m modes."""
        p = self.partial_sum(m)
        t = self.trace
        return Enclosure(max(t.lo - p, 0.0), max(t.hi - p, 0.0))


def multivariate_spectrum(es: EigenSpectrum, m: int) -> list[tuple[float, tuple[int, ...]]]:
    """Top-m (eigenvalue, canonical label) pairs."""
    return list(zip(es.values(m).tolist(), es.labels(m)))


@dataclass(frozen=True)
class TailConstants:
    """Decay data for the spectral tail at a given exponent tau."""

    tau: float
    p_d: float
    C_d: Enclosure
    power_sum: Enclosure
    U_star: int
    rho_star: Enclosure


def _power_sum_enclosure(spec: KernelSpec, tau: float) -> Enclosure:
    """Enclosure of sum_j lambda_j^(1/tau) over the whole multivariate spectrum.

    Splits into the tensor factor over free coordinates and the sorted-tuple
    sum over the exchangeable block; the latter is the permutation fixed-point
    recurrence applied to the power sums of the univariate sequence."""
    w = spec.weight
    s = spec.perm.size
    d_free = spec.d - s

    def p_c(c: int) -> Enclosure:
        return (Enclosure.exact(w.beta0 ** (c / tau))
                + tail_sum(w, exponent=w.alpha * c / tau).scale(2.0 * w.beta1 ** (c / tau)))

    if s:
        los = [p_c(c).lo for c in range(1, s + 1)]
        his = [p_c(c).hi for c in range(1, s + 1)]
        fact = math.factorial(s)
        block = Enclosure(permutation_power_sum(los) / fact,
                          permutation_power_sum(his) / fact)
    else:
        block = Enclosure(1.0, 1.0)
    if d_free:
        block = block * p_c(1).power(d_free)
    return block


def rho_tail(spec: KernelSpec, tau: float, U: int) -> Enclosure:
    """Relative tail mass 2*(beta1/beta0)^(1/tau) * sum_{m > U} R(m)^(-2*alpha/tau)."""
    w = spec.weight
    return tail_sum(w, exponent=w.alpha / tau, start=U + 1).scale(
        2.0 * (w.beta1 / w.beta0) ** (1.0 / tau)
    )


def spectrum_tail_constants(spec: KernelSpec, tau: float,
                            U: int | None = None,
                            u_max: int = 100_000) -> TailConstants:
    """Decay constants: tail of the ordered spectrum past m modes is at most
    C_d / (m+1)^(p_d) with p_d = tau - 1 and C_d = 2^(tau-1)/(tau-1) * (sum lambda^(1/tau))^tau.
    """
    w = spec.weight
    if not (1.0 < tau < 2.0 * w.alpha):
        raise ValueError(f"tau must lie in (1, 2*alpha) = (1, {2 * w.alpha})")
    power_sum = _power_sum_enclosure(spec, tau)
    scale = 2.0 ** (tau - 1.0) / (tau - 1.0)
    C_d = power_sum.power(tau).scale(scale)
    if U is None:
        U = 0
        while rho_tail(spec, tau, U).hi >= 1.0:
            U += 1
            if U > u_max:
                raise RuntimeError("no admissible tail offset found")
    rho = rho_tail(spec, tau, U)
    return TailConstants(tau=tau, p_d=tau - 1.0, C_d=C_d,
                         power_sum=power_sum, U_star=U, rho_star=rho)


@dataclass(frozen=True)
class RateConstants:
    """Constants of the sample-doubling approximation scheme at rate p."""

    p: float
    y_p: float
    omega_y: float
    K_p: int
    c_p: float


def rate_constants(p: float) -> RateConstants:
    if p <= 0:
        raise ValueError("p must be positive")
    y = p ** (1.0 / (p + 1.0))
    omega = y + y ** (-p)
    threshold = 2.0 ** (p + 1.0) * omega ** (1.0 + 1.0 / p)
    K = int(math.floor(math.log2(threshold) + 1e-12))
    while 2.0 ** (K + 1) <= threshold:
        K += 1
    while 2.0 ** K > threshold:
        K -= 1
    c_p = 2.0 ** (p * (p + 1.0)) * (1.0 + p) * (1.0 + 1.0 / p) ** p
    return RateConstants(p=p, y_p=y, omega_y=omega, K_p=K, c_p=c_p)


def c_prime(tau: float) -> float:
    """Leading constant of the assembled-rule bound expressed through tau."""
    if tau <= 1.0:
        raise ValueError("tau must exceed 1")
    return 2.0 ** (tau * (tau ** 2 - 1.0)) * (tau / (tau - 1.0)) ** tau
