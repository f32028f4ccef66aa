"""Transforms, masks, and zero-filled reconstruction against independent oracles."""

import numpy as np
import pytest

from kdiag.kspace import (
    CartesianMask,
    UndersampledKSpace,
    add_line,
    apply_mask,
    dft2,
    idft2,
    init_random_mask,
    zero_fill_magnitude,
)


def naive_dft2(x, sign=-1):
    """O(n^4) orthonormal DFT evaluated directly from the defining double sum."""
    x = np.asarray(x, dtype=complex)
    r, c = x.shape
    out = np.zeros((r, c), dtype=complex)
    for k in range(r):
        for l in range(c):
            acc = 0.0 + 0.0j
            for m in range(r):
                for n in range(c):
                    acc += x[m, n] * np.exp(sign * 2j * np.pi * (k * m / r + l * n / c))
            out[k, l] = acc
    return out / np.sqrt(r * c)


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestTransforms:
    def test_constant_image_has_only_dc(self):
        k = dft2(np.ones((4, 4), dtype=complex))
        assert k[0, 0] == pytest.approx(4.0)
        assert abs(k[0, 0].imag) < 1e-15
        rest = k.copy()
        rest[0, 0] = 0
        assert np.abs(rest).max() < 1e-12

    def test_dc_only_kspace_inverts_to_constant(self):
        k = np.zeros((4, 4), dtype=complex)
        k[0, 0] = 4.0
        img = idft2(k)
        assert np.abs(img - 1.0).max() < 1e-12

    def test_round_trips(self, rng):
        x = random_complex(rng, (8, 8))
        assert np.abs(idft2(dft2(x)) - x).max() < 1e-10
        y = random_complex(rng, (8, 8))
        assert np.abs(dft2(idft2(y)) - y).max() < 1e-10

    def test_idft2_of_zero_is_zero(self):
        assert np.abs(idft2(np.zeros((5, 6), dtype=complex))).max() == 0.0

    def test_parseval_by_direct_summation(self, rng):
        for _ in range(10):
            x = random_complex(rng, (8, 8))
            lhs = np.sum(np.abs(dft2(x)) ** 2)
            rhs = np.sum(np.abs(x) ** 2)
            assert abs(lhs - rhs) < 1e-10 * rhs

    def test_matches_naive_dft_oracle(self, rng):
        x = random_complex(rng, (6, 5))
        assert np.abs(dft2(x) - naive_dft2(x, sign=-1)).max() < 1e-10
        assert np.abs(idft2(x) - naive_dft2(x, sign=+1)).max() < 1e-10

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValueError):
            dft2(np.zeros((0, 4), dtype=complex))
        bad = np.ones((3, 3), dtype=complex)
        bad[1, 1] = np.nan
        with pytest.raises(ValueError):
            idft2(bad)


class TestMasks:
    def test_full_mask_is_identity(self, rng):
        x = random_complex(rng, (8, 8))
        out = apply_mask(x, CartesianMask.full(8))
        assert np.array_equal(out.kspace, x)

    def test_empty_mask_zeroes_everything(self, rng):
        x = random_complex(rng, (8, 8))
        out = apply_mask(x, CartesianMask.empty(8))
        assert np.abs(out.kspace).max() == 0.0

    def test_apply_mask_idempotent(self, rng):
        x = random_complex(rng, (8, 8))
        m = CartesianMask.from_indices(8, [1, 4, 6])
        once = apply_mask(x, m)
        twice = apply_mask(once.kspace, m)
        assert np.array_equal(once.kspace, twice.kspace)

    def test_apply_mask_commutes_with_intersection(self, rng):
        x = random_complex(rng, (8, 8))
        m1 = CartesianMask.from_indices(8, [0, 1, 4, 6])
        m2 = CartesianMask.from_indices(8, [1, 2, 6, 7])
        inter = CartesianMask(8, m1.selected & m2.selected)
        nested = apply_mask(apply_mask(x, m1).kspace, m2)
        assert np.array_equal(nested.kspace, apply_mask(x, inter).kspace)

    def test_dimension_mismatch_rejected(self, rng):
        with pytest.raises(ValueError):
            apply_mask(random_complex(rng, (8, 8)), CartesianMask.empty(7))

    def test_mask_validates_binary(self):
        with pytest.raises(ValueError):
            CartesianMask(4, np.array([0, 1, 2, 0]))

    def test_state_rejects_nonzero_unselected(self, rng):
        x = random_complex(rng, (4, 4))
        with pytest.raises(ValueError):
            UndersampledKSpace(x, CartesianMask.empty(4))


class TestAddLine:
    def test_add_line_by_construction(self, rng):
        x = random_complex(rng, (8, 8))
        state = apply_mask(x, CartesianMask.empty(8))
        out = add_line(state, x, 3)
        assert out.mask.sampled_indices().tolist() == [3]
        assert np.array_equal(out.kspace[:, 3], x[:, 3])
        assert np.abs(np.delete(out.kspace, 3, axis=1)).max() == 0.0
        assert out.mask.line_count == state.mask.line_count + 1

    def test_adding_all_lines_equals_full_mask(self, rng):
        x = random_complex(rng, (6, 6))
        state = apply_mask(x, CartesianMask.empty(6))
        for i in range(6):
            state = add_line(state, x, i)
        assert np.array_equal(state.kspace, apply_mask(x, CartesianMask.full(6)).kspace)

    def test_double_add_is_an_error(self, rng):
        x = random_complex(rng, (4, 4))
        state = add_line(apply_mask(x, CartesianMask.empty(4)), x, 3)
        with pytest.raises(ValueError):
            add_line(state, x, 3)

    def test_out_of_range_rejected(self, rng):
        x = random_complex(rng, (4, 4))
        state = apply_mask(x, CartesianMask.empty(4))
        with pytest.raises(ValueError):
            add_line(state, x, 4)


class TestZeroFill:
    def test_full_mask_recovers_magnitude(self, rng):
        img = random_complex(rng, (8, 8))
        state = apply_mask(dft2(img), CartesianMask.full(8))
        assert np.abs(zero_fill_magnitude(state) - np.abs(img)).max() < 1e-10

    def test_empty_mask_gives_zero(self, rng):
        state = apply_mask(random_complex(rng, (8, 8)), CartesianMask.empty(8))
        assert zero_fill_magnitude(state).max() == 0.0

    def test_half_mask_matches_naive_oracle(self, rng):
        x = random_complex(rng, (8, 8))
        state = apply_mask(x, CartesianMask.from_indices(8, [0, 2, 3, 7]))
        expected = np.abs(naive_dft2(state.kspace, sign=+1))
        assert np.abs(zero_fill_magnitude(state) - expected).max() < 1e-8

    def test_nonnegative_everywhere(self, rng):
        for _ in range(5):
            x = random_complex(rng, (8, 8))
            sel = (rng.random(8) < 0.5).astype(int)
            state = apply_mask(x, CartesianMask(8, sel))
            assert (zero_fill_magnitude(state) >= 0).all()


class TestInitRandomMask:
    def test_cardinality_without_center(self):
        m = init_random_mask(32, 3, 0.0, seed=0)
        assert m.line_count == 3

    def test_center_block_placement(self):
        m = init_random_mask(32, 0, 0.125, seed=0)
        assert m.sampled_indices().tolist() == [14, 15, 16, 17]

    def test_odd_center_block_symmetric(self):
        m = init_random_mask(32, 0, 3 / 32, seed=0)
        assert m.sampled_indices().tolist() == [15, 16, 17]

    def test_determinism(self):
        a = init_random_mask(32, 5, 0.1, seed=42)
        b = init_random_mask(32, 5, 0.1, seed=42)
        assert np.array_equal(a.selected, b.selected)

    def test_infeasible_counts_rejected(self):
        with pytest.raises(ValueError):
            init_random_mask(8, 8, 0.25, seed=0)

    def test_random_lines_avoid_center_block(self):
        for seed in range(20):
            m = init_random_mask(32, 28, 0.125, seed=seed)
            assert m.line_count == 32
        m = init_random_mask(32, 10, 0.125, seed=7)
        assert set([14, 15, 16, 17]) <= set(m.sampled_indices().tolist())
        assert m.line_count == 14
