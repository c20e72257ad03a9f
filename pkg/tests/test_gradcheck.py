import pytest
import torch

from camofuse.errors import NumericError
from camofuse.gradcheck import (central_difference_error, check_block,
                                module_leaves, require_all_pass)


class TestCentralDifference:
    def test_quadratic_has_tiny_error(self):
        x = torch.randn(5, dtype=torch.float64, requires_grad=True)
        err = central_difference_error(lambda: (x ** 2).sum(), [x])
        assert err < 1e-10

    def test_coordinate_subsampling(self):
        x = torch.randn(50, dtype=torch.float64, requires_grad=True)
        err = central_difference_error(lambda: (x ** 3).sum(), [x], max_coords=5)
        assert err < 1e-8


class BadSquare(torch.autograd.Function):
    """Deliberately wrong backward: reports 3x instead of 2x."""

    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return (x ** 2).sum()

    @staticmethod
    def backward(ctx, grad):
        (x,) = ctx.saved_tensors
        return grad * 3.0 * x


class TestHarnessSelfTest:
    def test_corrupted_gradient_is_reported_by_name(self):
        x = torch.randn(4, dtype=torch.float64, requires_grad=True)
        res = check_block("corrupted_block", lambda: BadSquare.apply(x), [x], 1e-4)
        assert not res.passed
        assert res.name == "corrupted_block"
        assert "FAIL" in res.line() and "corrupted_block" in res.line()

    def test_require_all_pass_names_failures(self):
        x = torch.randn(4, dtype=torch.float64, requires_grad=True)
        good = check_block("fine", lambda: (x ** 2).sum(), [x], 1e-4)
        bad = check_block("broken", lambda: BadSquare.apply(x), [x], 1e-4)
        require_all_pass([good])
        with pytest.raises(NumericError, match="broken"):
            require_all_pass([good, bad])

    def test_module_leaves_rejects_float32(self):
        lin = torch.nn.Linear(2, 2)  # float32
        with pytest.raises(NumericError):
            module_leaves(lin)
