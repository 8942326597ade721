import math
from itertools import permutations, product

import numpy as np
import pytest

from permqmc.kernels import (
    KernelSpec,
    kernel_perminv,
    kernel_perminv_gram,
    kernel_shift_invariant,
    kernel_univariate,
    partition_sum_masked,
    permutation_power_sum,
    power_kernel,
    power_kernel_table,
    shift_invariant_profile,
    symmetrized_mass,
    validate_closed_form,
)
from permqmc.symmetry import PermStructure, multiplicity
from permqmc.weights import GeneratorSpec, SpectralWeight, r_weight_inv_factors


def box_kernel_perminv(x, y, spec, H):
    """Complex frequency-box oracle for the exchange-invariant kernel."""
    ps = spec.perm
    w = spec.weight
    inv = ps.invariant
    total = 0.0 + 0.0j
    for h in product(range(-H, H + 1), repeat=spec.d):
        fac = np.prod(r_weight_inv_factors(np.array([h]), w))
        for perm in permutations(range(len(inv))):
            px = list(x)
            for slot, src in zip(inv, perm):
                px[slot - 1] = x[inv[src] - 1]
            total += fac / ps.group_order * np.exp(
                2j * math.pi * np.dot(h, np.asarray(px) - np.asarray(y))
            )
    return total


def box_kernel_shinv(diff, spec, H):
    """Complex multiplicity-weighted box oracle for the shift-averaged kernel."""
    ps = spec.perm
    w = spec.weight
    total = 0.0 + 0.0j
    for h in product(range(-H, H + 1), repeat=spec.d):
        fac = np.prod(r_weight_inv_factors(np.array([h]), w))
        m = multiplicity(h, ps)
        total += m / ps.group_order * fac * np.exp(2j * math.pi * np.dot(h, diff))
    return total


class TestClosedForm:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_validation_thousand_points(self, n):
        # the closed form must agree with the certified series before use
        scale = 2.0 if n == 1 else 1.1
        assert validate_closed_form(n, samples=1000) < 1e-8 * scale

    def test_univariate_diagonal(self, sobolev):
        assert kernel_univariate(0.42, 0.42, sobolev) == pytest.approx(1 + 1 / 12, abs=1e-12)

    def test_constant_kernel(self):
        w = SpectralWeight(beta0=0.7, beta1=1e-14)
        assert kernel_univariate(0.1, 0.9, w) == pytest.approx(0.7, abs=1e-11)

    def test_closed_vs_spectral_alpha2(self):
        w = SpectralWeight(alpha=2.0)
        a = kernel_univariate(0.3, 0.7, w, mode="closed")
        b = kernel_univariate(0.3, 0.7, w, mode="spectral", tol=1e-12)
        assert a == pytest.approx(b, abs=1e-10)

    def test_power_kernel_vs_direct_series(self, sobolev):
        t = np.array([0.13, 0.48, 0.77])
        vals, cert = power_kernel(sobolev, 2, t)
        m = np.arange(1, 200_001, dtype=float)
        direct = 1.0 + 2.0 * np.array(
            [np.sum(np.cos(2 * math.pi * m * tt) * (2 * math.pi * m) ** -4.0) for tt in t]
        )
        assert np.max(np.abs(vals - direct)) < 1e-12
        assert cert < 1e-10

    def test_spectral_certificate_shrinks(self):
        w = SpectralWeight(generator=GeneratorSpec.plain())
        _, cert_loose = power_kernel(w, 1, np.array([0.3]), mode="spectral", tol=1e-6)
        _, cert_tight = power_kernel(w, 1, np.array([0.3]), mode="spectral", tol=1e-10)
        assert cert_tight < cert_loose
        v1, c1 = power_kernel(w, 1, np.array([0.3]), mode="spectral", tol=1e-6)
        v2, c2 = power_kernel(w, 1, np.array([0.3]), mode="spectral", tol=1e-12)
        assert abs(float(v1[0] - v2[0])) <= c1 + c2


class TestPerminvKernel:
    def test_tensor_product_when_no_invariance(self, sobolev):
        spec = KernelSpec(sobolev, PermStructure.empty(3))
        x = np.array([0.1, 0.5, 0.8])
        y = np.array([0.3, 0.2, 0.9])
        expect = np.prod([kernel_univariate(a, b, sobolev) for a, b in zip(x, y)])
        assert kernel_perminv(x, y, spec) == pytest.approx(expect, rel=1e-12)

    def test_brute_force_average(self, spec_d3_full, rng):
        x = rng.uniform(size=3)
        y = rng.uniform(size=3)
        w = spec_d3_full.weight
        brute = np.mean([
            np.prod([kernel_univariate(x[p[i]], y[i], w) for i in range(3)])
            for p in permutations(range(3))
        ])
        assert kernel_perminv(x, y, spec_d3_full) == pytest.approx(brute, rel=1e-12)

    def test_swap_invariance(self, spec_d2_full, rng):
        x = rng.uniform(size=2)
        y = rng.uniform(size=2)
        assert kernel_perminv(x, y, spec_d2_full) == pytest.approx(
            kernel_perminv(x[::-1], y, spec_d2_full), rel=1e-12
        )

    def test_complex_box_oracle(self, rng):
        w = SpectralWeight(alpha=2.0)
        spec = KernelSpec(w, PermStructure(3, (1, 3)))
        x = rng.uniform(size=3)
        y = rng.uniform(size=3)
        oracle = box_kernel_perminv(x, y, spec, H=30)
        assert abs(oracle.imag) <= 1e-12
        assert kernel_perminv(x, y, spec) == pytest.approx(oracle.real, abs=5e-7)

    def test_hermitian_and_psd(self, spec_d2_full, rng):
        pts = rng.uniform(size=(12, 2))
        gram, cert = kernel_perminv_gram(pts, pts, spec_d2_full)
        assert np.max(np.abs(gram - gram.T)) < 1e-12
        eigs = np.linalg.eigvalsh(gram)
        assert eigs.min() >= -1e-10
        assert cert < 1e-9


class TestShiftInvariantKernel:
    def test_diagonal_constant(self, spec_d2_full, rng):
        vals = [
            kernel_shift_invariant(x, x, spec_d2_full)
            for x in rng.uniform(size=(4, 2))
        ]
        assert np.ptp(vals) < 1e-12

    def test_brute_force_two_exchanges(self, rng):
        w = SpectralWeight(alpha=2.0)
        spec = KernelSpec(w, PermStructure.full(2))
        x = rng.uniform(size=2)
        y = rng.uniform(size=2)
        oracle = box_kernel_shinv(x - y, spec, H=60)
        assert abs(oracle.imag) <= 1e-12
        assert kernel_shift_invariant(x, y, spec) == pytest.approx(oracle.real, abs=1e-7)

    def test_partial_invariance_oracle(self, rng):
        w = SpectralWeight(alpha=2.0, beta0=0.9, beta1=1.2)
        spec = KernelSpec(w, PermStructure(3, (2, 3)))
        x = rng.uniform(size=3)
        y = rng.uniform(size=3)
        oracle = box_kernel_shinv(x - y, spec, H=25)
        assert kernel_shift_invariant(x, y, spec) == pytest.approx(oracle.real, abs=5e-6)

    def test_spectral_mode_agrees(self, rng):
        w = SpectralWeight(alpha=1.0)
        diff = rng.uniform(size=(5, 2))
        closed = KernelSpec(w, PermStructure.full(2), mode="closed")
        series = KernelSpec(w, PermStructure.full(2), mode="spectral", tol=1e-9)
        a, ca = shift_invariant_profile(diff, closed)
        b, cb = shift_invariant_profile(diff, series)
        assert np.max(np.abs(a - b)) <= ca + cb


class TestMass:
    def test_diagonal_integral_full_invariance(self, sobolev):
        # 1-d reduction: the diagonal of the d=2 fully invariant kernel
        # averages the squared univariate kernel along the difference
        spec = KernelSpec(sobolev, PermStructure.full(2))
        n = 1 << 18
        t = np.arange(n) / n
        k1, _ = power_kernel(sobolev, 1, t)
        quad = 0.5 * (1 + 1 / 12) ** 2 + 0.5 * np.mean(k1 ** 2)
        enc = symmetrized_mass(spec)
        assert abs(quad - enc.mid) < 1e-6

    def test_diagonal_integral_partial(self, sobolev):
        spec = KernelSpec(sobolev, PermStructure(2, (1,)))
        enc = symmetrized_mass(spec)
        assert enc.mid == pytest.approx((1 + 1 / 12) ** 2, rel=1e-12)

    def test_trace_equals_nabla_sum(self, sobolev):
        # brute-force sum of reciprocal weights over the sorted domain;
        # the box misses at most the per-coordinate union-bound tail
        from permqmc.weights import tail_sum

        spec = KernelSpec(sobolev, PermStructure.full(2))
        total = 0.0
        for h in product(range(-60, 61), repeat=2):
            if h[0] > h[1]:
                continue
            total += np.prod(r_weight_inv_factors(np.array([h]), sobolev))
        enc = symmetrized_mass(spec)
        assert total < enc.hi
        tail_bound = 2 * (2 * tail_sum(sobolev, start=61).hi) * enc.hi
        assert enc.mid - total < tail_bound


class TestKernelIntegrals:
    @pytest.mark.parametrize("beta0", [1.0, 0.8])
    def test_single_argument_integral_is_constant_mass(self, beta0, rng):
        # integrating one kernel argument kills every oscillatory frequency:
        # the result equals beta0^d for any anchor point, which also gives
        # the double integral by averaging over the anchor
        w = SpectralWeight(beta0=beta0)
        spec = KernelSpec(w, PermStructure(2, (1, 2)))
        g = np.arange(1024) / 1024.0
        grid = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
        for t in rng.uniform(size=(2, 2)):
            gram, _ = kernel_perminv_gram(grid, t[None, :], spec)
            assert float(np.mean(gram)) == pytest.approx(beta0 ** 2, abs=1e-6)


class TestPartitionEngines:
    def test_masked_vs_permutation_brute(self, rng):
        s = 4
        vals = {mask: rng.normal() for mask in range(1, 1 << s)}
        got = partition_sum_masked(vals, s)
        brute = 0.0
        for perm in permutations(range(s)):
            prod = 1.0
            seen = set()
            for start in range(s):
                if start in seen:
                    continue
                mask = 0
                cur = start
                while cur not in seen:
                    seen.add(cur)
                    mask |= 1 << cur
                    cur = perm[cur]
                prod *= vals[mask]
            brute += prod
        assert got == pytest.approx(brute, rel=1e-12)

    def test_power_sum_vs_brute(self):
        p = [1.7, 0.6, 0.25, 0.1]
        s = 4
        brute = 0.0
        for perm in permutations(range(s)):
            prod = 1.0
            seen = set()
            for start in range(s):
                if start in seen:
                    continue
                size = 0
                cur = start
                while cur not in seen:
                    seen.add(cur)
                    size += 1
                    cur = perm[cur]
                prod *= p[size - 1]
            brute += prod
        assert permutation_power_sum(p) == pytest.approx(brute, rel=1e-12)

    def test_table_grid(self, sobolev):
        table, certs = power_kernel_table(sobolev, 8, 2)
        vals, _ = power_kernel(sobolev, 1, np.arange(8) / 8, include_constant=False)
        assert np.allclose(table[0], vals)
        assert np.all(certs >= 0)
