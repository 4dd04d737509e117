import itertools

import numpy as np
import pytest

from shapbound import (
    Activation,
    Affine,
    AttributionProblem,
    DimensionError,
    Network,
    PreconditionError,
    contribution,
    forward,
    mask_apply,
    mask_insert,
    value,
)
from shapbound.valuefn import value_batch

from helpers import make_net


def two_feature_problem(kind="baseline"):
    # f(x) = 2 x1 - x2, single affine
    net = Network((Affine(np.array([[2.0, -1.0]]), np.zeros(1)),), 2, 1)
    x = np.array([1.0, 1.0])
    z = np.zeros((1, 2))
    return AttributionProblem(net, x, z, kind=kind, target_output=0)


class TestMaskApply:
    def test_basic(self):
        prob = two_feature_problem()
        out = mask_apply(prob, [1, 0], np.array([5.0, 5.0]), np.array([0.0, 0.0]))
        assert np.array_equal(out, [5.0, 0.0])

    def test_all_ones_returns_x(self):
        prob = two_feature_problem()
        x = np.array([3.0, -4.0])
        out = mask_apply(prob, [1, 1], x, np.array([9.0, 9.0]))
        assert np.array_equal(out, x)

    def test_group_expansion(self):
        net = Network((Affine(np.ones((1, 3)), np.zeros(1)),), 3, 1)
        prob = AttributionProblem(
            net, np.array([1.0, 2.0, 3.0]), np.zeros((1, 3)),
            kind="baseline", groups=((0, 1), (2,)),
        )
        out = mask_apply(prob, [1, 0], np.array([1.0, 2.0, 3.0]),
                         np.array([9.0, 9.0, 9.0]))
        assert np.array_equal(out, [1.0, 2.0, 9.0])

    def test_length_mismatch(self):
        prob = two_feature_problem()
        with pytest.raises(DimensionError):
            mask_apply(prob, [1, 0], np.ones(3), np.zeros(3))


class TestMaskInsert:
    def test_sets_bit(self):
        assert np.array_equal(mask_insert([0, 1, 0], 0), [1, 1, 0])

    def test_idempotent_when_set(self):
        assert np.array_equal(mask_insert([1, 1], 1), [1, 1])

    def test_last_bit(self):
        assert np.array_equal(mask_insert([0, 0, 0, 0], 3), [0, 0, 0, 1])

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            mask_insert([0, 1], 2)


class TestValue:
    def test_all_ones_is_explicand_output(self):
        rng = np.random.default_rng(2)
        net = make_net(rng, 4, [6])
        x = rng.normal(size=4)
        prob = AttributionProblem(net, x, rng.normal(size=(3, 4)))
        assert value(prob, [1, 1, 1, 1]) == pytest.approx(
            forward(net, x)[0], abs=1e-12
        )

    def test_all_zeros_baseline_is_baseline_output(self):
        rng = np.random.default_rng(3)
        net = make_net(rng, 3, [5])
        prob = AttributionProblem(net, rng.normal(size=3), np.zeros((1, 3)),
                                  kind="baseline")
        assert value(prob, [0, 0, 0]) == pytest.approx(
            forward(net, np.zeros(3))[0], abs=1e-12
        )

    def test_hand_evaluated_affine(self):
        prob = two_feature_problem()
        # mask (1, 0): input (1, 0) -> 2*1 - 0 = 2
        assert value(prob, [1, 0]) == pytest.approx(2.0, abs=0)

    def test_marginal_is_mean_of_per_row_baselines(self):
        rng = np.random.default_rng(4)
        net = make_net(rng, 5, [7])
        x = rng.normal(size=5)
        background = rng.normal(size=(6, 5))
        marg = AttributionProblem(net, x, background, kind="marginal")
        for _ in range(10):
            mask = (rng.random(5) < 0.5).astype(int)
            rows = [
                value(AttributionProblem(net, x, z[None, :], kind="baseline"), mask)
                for z in background
            ]
            assert value(marg, mask) == pytest.approx(np.mean(rows), abs=1e-12)

    def test_baseline_requires_single_row(self):
        net = Network((Affine(np.eye(2), np.zeros(2)),), 2, 2)
        with pytest.raises(ValueError):
            AttributionProblem(net, np.zeros(2), np.zeros((2, 2)), kind="baseline")

    def test_groups_must_partition(self):
        net = Network((Affine(np.eye(3), np.zeros(3)),), 3, 3)
        with pytest.raises(ValueError):
            AttributionProblem(net, np.zeros(3), np.zeros((1, 3)), kind="baseline",
                               groups=((0, 1), (1, 2)))


class TestContribution:
    def test_linear_contribution_constant_over_masks(self):
        rng = np.random.default_rng(5)
        w = rng.normal(size=(1, 4))
        net = Network((Affine(w, np.array([0.7])),), 4, 1)
        x = rng.normal(size=4)
        z = rng.normal(size=(1, 4))
        prob = AttributionProblem(net, x, z, kind="baseline")
        for i in range(4):
            expected = w[0, i] * (x[i] - z[0, i])
            for bits in itertools.product((0, 1), repeat=4):
                if bits[i]:
                    continue
                got = contribution(prob, i, np.array(bits))
                assert got == pytest.approx(expected, abs=1e-12)

    def test_explicand_equals_baseline_gives_zero(self):
        rng = np.random.default_rng(6)
        net = make_net(rng, 3, [4])
        x = rng.normal(size=3)
        prob = AttributionProblem(net, x, x[None, :], kind="baseline")
        for i in range(3):
            for bits in itertools.product((0, 1), repeat=3):
                if bits[i]:
                    continue
                assert contribution(prob, i, np.array(bits)) == pytest.approx(
                    0.0, abs=1e-12
                )

    def test_relu_net_against_forward_differences(self):
        rng = np.random.default_rng(7)
        net = make_net(rng, 2, [3])
        x = rng.normal(size=2)
        z = rng.normal(size=(1, 2))
        prob = AttributionProblem(net, x, z, kind="baseline")
        for i in range(2):
            for bits in itertools.product((0, 1), repeat=2):
                if bits[i]:
                    continue
                mask = np.array(bits, dtype=float)
                with_i = mask.copy()
                with_i[i] = 1.0
                direct = (
                    forward(net, with_i * x + (1 - with_i) * z[0])[0]
                    - forward(net, mask * x + (1 - mask) * z[0])[0]
                )
                assert contribution(prob, i, np.array(bits)) == pytest.approx(
                    direct, abs=1e-12
                )

    def test_bit_already_set_rejected(self):
        prob = two_feature_problem()
        with pytest.raises(PreconditionError):
            contribution(prob, 0, [1, 0])


class TestGroups:
    def test_group_value_matches_expanded_mask(self):
        rng = np.random.default_rng(8)
        net = make_net(rng, 6, [5])
        x = rng.normal(size=6)
        bg = rng.normal(size=(4, 6))
        groups = ((0, 3), (1,), (2, 4, 5))
        grouped = AttributionProblem(net, x, bg, groups=groups)
        plain = AttributionProblem(net, x, bg)
        for bits in itertools.product((0, 1), repeat=3):
            expanded = grouped.expand_mask(np.array(bits))
            assert value(grouped, np.array(bits)) == pytest.approx(
                value(plain, expanded), abs=1e-12
            )

    def test_value_batch_matches_value(self):
        rng = np.random.default_rng(9)
        net = make_net(rng, 4, [6])
        prob = AttributionProblem(net, rng.normal(size=4), rng.normal(size=(3, 4)))
        masks = (rng.random((8, 4)) < 0.5).astype(int)
        batched = value_batch(prob, masks)
        for i in range(8):
            assert batched[i] == pytest.approx(value(prob, masks[i]), abs=1e-12)
