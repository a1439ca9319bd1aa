import math

import numpy as np
import pytest

from app.core_math import make_rng
from app.errors import ZeroProbabilityError
from app.joint import build_lattice
from app.lattice import alignment_grid, backward_pass, diagonal_log_sums, forward_pass, loss_and_grads
from app.oracle import brute_force_log_prob
from app.tests.conftest import random_logits


def random_instance(seed, T, U, K, scale=1.0):
    rng = make_rng(seed)
    f = rng.normal(0.0, scale, size=(T, K + 1))
    g = rng.normal(0.0, scale, size=(U + 1, K + 1))
    targets = [int(k) for k in rng.integers(0, K, size=U)]
    return f, g, targets


def uniform_lattice():
    return build_lattice(np.zeros((2, 2)), np.zeros((2, 2)), [0])


def test_single_node_probability_is_terminal_null():
    lattice = build_lattice(random_logits(1, 1, 3), random_logits(2, 1, 3), [])
    _, log_prob = forward_pass(lattice)
    assert log_prob == pytest.approx(lattice.log_null[0, 0], abs=1e-15)


def test_uniform_instance_has_probability_one_quarter():
    _, log_prob = forward_pass(uniform_lattice())
    assert log_prob == pytest.approx(math.log(0.25), abs=1e-14)


def test_forward_matches_brute_force():
    f, g, targets = random_instance(21, 4, 3, 3)
    lattice = build_lattice(f, g, targets)
    _, log_prob = forward_pass(lattice)
    assert log_prob == pytest.approx(brute_force_log_prob(lattice), rel=1e-10)


def test_forward_matches_brute_force_on_many_instances():
    rng = make_rng(100)
    for seed in range(100):
        T, U, K = int(rng.integers(1, 6)), int(rng.integers(0, 5)), int(rng.integers(1, 4))
        lattice = build_lattice(*random_instance(seed, T, U, K))
        grid = alignment_grid(lattice)
        assert grid.log_prob == pytest.approx(brute_force_log_prob(lattice), rel=1e-10)
        np.testing.assert_allclose(diagonal_log_sums(grid), grid.log_prob, rtol=0, atol=1e-8)


def test_terminal_backward_variable_is_terminal_null():
    lattice = build_lattice(*random_instance(3, 4, 3, 3))
    log_beta = backward_pass(lattice)
    assert log_beta[-1, -1] == lattice.log_null[-1, -1]


def test_first_backward_variable_is_sequence_probability():
    lattice = build_lattice(*random_instance(4, 4, 3, 3))
    _, log_prob = forward_pass(lattice)
    assert backward_pass(lattice)[0, 0] == pytest.approx(log_prob, abs=1e-10)


def test_alpha_starts_at_one():
    grid = alignment_grid(build_lattice(*random_instance(5, 3, 2, 2)))
    assert grid.log_alpha[0, 0] == 0.0


def test_diagonal_identity():
    grid = alignment_grid(build_lattice(*random_instance(21, 4, 3, 3)))
    sums = diagonal_log_sums(grid)
    assert len(sums) == 4 + 3
    np.testing.assert_allclose(sums, grid.log_prob, rtol=0, atol=1e-8)


def test_gradients_sum_to_zero():
    for seed in range(20):
        lattice = build_lattice(*random_instance(seed, 5, 4, 3))
        _, d_f, d_g = loss_and_grads(lattice, alignment_grid(lattice))
        np.testing.assert_allclose(d_f.sum(axis=1), 0.0, atol=1e-10)
        np.testing.assert_allclose(d_g.sum(axis=1), 0.0, atol=1e-10)


def test_uniform_instance_loss_and_label_occupancy():
    lattice = uniform_lattice()
    grid = alignment_grid(lattice)
    loss, _, _ = loss_and_grads(lattice, grid)
    assert loss == pytest.approx(math.log(4), abs=1e-14)
    # dL/dPr(y_1|1,0) = -alpha(1,0) beta(1,1) / Pr
    assert -math.exp(grid.log_alpha[0, 0] + grid.log_beta[0, 1] - grid.log_prob) == pytest.approx(-1.0, abs=1e-14)


def test_logit_gradients_match_finite_differences():
    f, g, targets = random_instance(17, 3, 2, 2)

    def loss(f, g):
        return -forward_pass(build_lattice(f, g, targets))[1]

    lattice = build_lattice(f, g, targets)
    _, d_f, d_g = loss_and_grads(lattice, alignment_grid(lattice))
    eps = 1e-6
    for array, analytic in ((f, d_f), (g, d_g)):
        for index in np.ndindex(array.shape):
            original = array[index]
            array[index] = original + eps
            plus = loss(f, g)
            array[index] = original - eps
            minus = loss(f, g)
            array[index] = original
            assert (plus - minus) / (2 * eps) == pytest.approx(analytic[index], abs=1e-7)


def test_saturated_forced_path_has_vanishing_gradients():
    # T=2, U=1, target (0): force label at (1,0), null at (1,1) and (2,1)
    K = 2
    f = np.zeros((2, K + 1))
    g = np.full((2, K + 1), -40.0)
    g[0, 0] = 40.0
    g[1, K] = 40.0
    lattice = build_lattice(f, g, [0])
    _, d_f, d_g = loss_and_grads(lattice, alignment_grid(lattice))
    np.testing.assert_allclose(d_f, 0.0, atol=1e-12)
    np.testing.assert_allclose(d_g, 0.0, atol=1e-12)


def test_zero_probability_target_names_blocked_cell():
    K = 2
    f = np.zeros((3, K + 1))
    f[:, 0] = -2000.0
    lattice = build_lattice(f, np.zeros((2, K + 1)), [0])
    grid = alignment_grid(lattice)
    with pytest.raises(ZeroProbabilityError) as excinfo:
        loss_and_grads(lattice, grid)
    assert excinfo.value.cell == (1, 1)
    assert 't=1, u=1' in str(excinfo.value)


@pytest.mark.parametrize('blocked_row', [0, 1, 2])
def test_blocked_cell_follows_the_blocked_label_transition(blocked_row):
    # target (0, 1, 0): the label leaving row u is unreachable at every t
    targets = [0, 1, 0]
    g = np.zeros((4, 3))
    g[blocked_row, targets[blocked_row]] = -2000.0
    lattice = build_lattice(np.zeros((3, 3)), g, targets)
    with pytest.raises(ZeroProbabilityError) as excinfo:
        loss_and_grads(lattice, alignment_grid(lattice))
    assert excinfo.value.cell == (1, blocked_row + 1)


def test_blocked_final_null_names_terminal_cell():
    g = np.zeros((2, 3))
    g[1, 2] = -2000.0
    f = np.zeros((2, 3))
    lattice = build_lattice(f, g, [1])
    with pytest.raises(ZeroProbabilityError) as excinfo:
        loss_and_grads(lattice, alignment_grid(lattice))
    assert excinfo.value.cell == (2, 1)


def test_forward_is_bit_reproducible():
    lattice = build_lattice(*random_instance(8, 6, 4, 3))
    first, second = forward_pass(lattice), forward_pass(lattice)
    np.testing.assert_array_equal(first[0], second[0])
    assert first[1] == second[1]
