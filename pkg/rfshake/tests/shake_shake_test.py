import numpy as np
import pytest

from rfshake.errors import ArgumentError, ContractError, DimensionError
from rfshake.shake_shake import EVAL_ALPHA, ShakeCoefficients, block_streams, sample_coefficients, shake_combine
from rfshake.tensor_engine import Mode, Tensor, gradcheck, mul


def coefficient_moments_test() -> None:
    coeffs = sample_coefficients(100_000, np.random.default_rng(0))
    assert abs(coeffs.alpha_forward.mean() - 0.5) < 0.01
    assert abs(coeffs.beta_backward.mean() - 0.5) < 0.01
    assert coeffs.alpha_forward.min() >= 0.0 and coeffs.alpha_forward.max() <= 1.0
    # forward and backward draws are independent
    assert abs(np.corrcoef(coeffs.alpha_forward, coeffs.beta_backward)[0, 1]) < 0.02


def backward_ratio_follows_beta_test() -> None:
    rng = np.random.default_rng(3)
    for _ in range(20):
        coeffs = sample_coefficients(1, rng)
        alpha, beta = coeffs.alpha_forward[0], coeffs.beta_backward[0]
        x = Tensor(np.zeros((1, 1)), requires_grad=True, dtype=np.float64)
        b1 = Tensor(np.full((1, 1), 2.0), requires_grad=True, dtype=np.float64)
        b2 = Tensor(np.full((1, 1), -1.0), requires_grad=True, dtype=np.float64)

        out = shake_combine(x, b1, b2, coeffs)
        assert out.item() == pytest.approx(alpha * 2.0 - (1 - alpha))
        out.sum().backward()
        assert b1.grad[0, 0] / b2.grad[0, 0] == pytest.approx(beta / (1 - beta))
        assert x.grad[0, 0] == 1.0


def forward_expectation_is_branch_average_test() -> None:
    n = 10_000
    rng = np.random.default_rng(11)
    x = Tensor(np.zeros((n, 1)), dtype=np.float64)
    b1 = Tensor(np.full((n, 1), 2.0), dtype=np.float64)
    b2 = Tensor(np.full((n, 1), -1.0), dtype=np.float64)
    coeffs = sample_coefficients(n, rng)
    out = shake_combine(x, b1, b2, coeffs).data[:, 0]

    # out = 3α - 1, so its spread is 3·sqrt(1/12)
    assert abs(out.mean() - 0.5 * (2.0 - 1.0)) < 5 * 3 * np.sqrt(1 / 12 / n)
    # Var of a sample variance of Uniform[0, 1] is (1/80 - 1/144) / n
    assert abs(coeffs.alpha_forward.var() - 1 / 12) < 5 * np.sqrt((1 / 80 - 1 / 144) / n)


def backward_scale_has_mean_one_half_test() -> None:
    n = 10_000
    rng = np.random.default_rng(12)
    x, b1, b2 = (Tensor(np.ones((n, 1)), requires_grad=True, dtype=np.float64) for _ in range(3))
    shake_combine(x, b1, b2, sample_coefficients(n, rng)).sum().backward()

    tolerance = 5 * np.sqrt(1 / 12 / n)
    assert abs(b1.grad.mean() - 0.5) < tolerance
    assert abs(b2.grad.mean() - 0.5) < tolerance
    np.testing.assert_allclose(b1.grad + b2.grad, 1.0)
    np.testing.assert_array_equal(x.grad, 1.0)


def tied_coefficients_give_true_gradient_test() -> None:
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x, b1, b2 = (Tensor(rng.normal(size=(3, 2, 2, 2)), requires_grad=True, dtype=np.float64) for _ in range(3))
        alpha = rng.uniform(size=3)
        coeffs = ShakeCoefficients(alpha_forward=alpha, beta_backward=alpha.copy())
        r = rng.normal(size=x.shape)
        assert gradcheck(lambda: mul(shake_combine(x, b1, b2, coeffs), r).sum(), [x, b1, b2]) < 1e-4


def eval_is_deterministic_test() -> None:
    rng = np.random.default_rng(0)
    x, b1, b2 = (Tensor(rng.normal(size=(4, 3, 2, 2)), dtype=np.float64) for _ in range(3))
    first = shake_combine(x, b1, b2, sample_coefficients(4, mode=Mode.EVAL)).data
    second = shake_combine(x, b1, b2, sample_coefficients(4, rng, mode=Mode.EVAL)).data
    np.testing.assert_array_equal(first, second)
    np.testing.assert_array_equal(first, x.data + (0.5 * b1.data + 0.5 * b2.data))

    # equal branches collapse to a plain residual sum, bit for bit
    tied = shake_combine(x, b1, b1, ShakeCoefficients.for_eval(4)).data
    np.testing.assert_array_equal(tied, x.data + b1.data)


def eval_rejects_random_alpha_test() -> None:
    x = Tensor(np.zeros((2, 1)))
    bad = ShakeCoefficients(alpha_forward=np.array([0.3, 0.5]), beta_backward=np.full(2, EVAL_ALPHA), mode=Mode.EVAL)
    with pytest.raises(ContractError):
        shake_combine(x, x, x, bad)


def sampling_errors_test() -> None:
    with pytest.raises(ArgumentError):
        sample_coefficients(0, np.random.default_rng(0))
    with pytest.raises(ArgumentError):
        sample_coefficients(3)
    with pytest.raises(DimensionError):
        shake_combine(Tensor(np.zeros((2, 1))), Tensor(np.zeros((2, 2))), Tensor(np.zeros((2, 1))),
                      ShakeCoefficients.for_eval(2))
    with pytest.raises(DimensionError):
        shake_combine(Tensor(np.zeros((2, 1))), Tensor(np.zeros((2, 1))), Tensor(np.zeros((2, 1))),
                      ShakeCoefficients.for_eval(3))


def block_streams_are_reproducible_and_distinct_test() -> None:
    first = [g.uniform(size=4) for g in block_streams(7, 3)]
    again = [g.uniform(size=4) for g in block_streams(7, 3)]
    for a, b in zip(first, again):
        np.testing.assert_array_equal(a, b)
    assert not np.array_equal(first[0], first[1])


if __name__ == '__main__':
    run_test = lambda test_no: [
        coefficient_moments_test,
        backward_ratio_follows_beta_test,
        eval_is_deterministic_test,
    ][test_no - 1].__call__()

    run_test(test_no=2)
