"""Finite-difference verification of autograd gradients.

Central differences at a fixed step in float64 are compared against
autograd for every checked block. The reported number is the worst
guarded relative error across all checked tensors.
"""

from dataclasses import dataclass

import torch

from .errors import NumericError


def central_difference_error(fn, tensors, eps=1e-4, max_coords=None, seed=0):
    """Worst relative error between autograd and central differences.

    fn is a closure returning a scalar tensor computed from `tensors`
    (float64 leaves with requires_grad=True). Every coordinate of every
    tensor is perturbed by +/-eps unless max_coords limits the per-tensor
    sample (coordinates are then chosen by a seeded draw). The error for
    a tensor is max|g_ad - g_fd| / max(max|g_ad|, max|g_fd|, 1e-6).
    """
    out = fn()
    grads = torch.autograd.grad(out, tensors, allow_unused=True)
    rng = torch.Generator().manual_seed(seed)
    worst = 0.0
    for t, g in zip(tensors, grads):
        flat = t.detach().reshape(-1)
        n = flat.numel()
        if max_coords is not None and n > max_coords:
            coords = torch.randperm(n, generator=rng)[:max_coords].tolist()
        else:
            coords = range(n)
        g_flat = (
            torch.zeros(n, dtype=t.dtype) if g is None else g.detach().reshape(-1)
        )
        fd = {}
        with torch.no_grad():
            for i in coords:
                orig = flat[i].item()
                flat[i] = orig + eps
                plus = float(fn())
                flat[i] = orig - eps
                minus = float(fn())
                flat[i] = orig
                fd[i] = (plus - minus) / (2.0 * eps)
        ad_vals = torch.tensor([g_flat[i].item() for i in coords], dtype=torch.float64)
        fd_vals = torch.tensor([fd[i] for i in coords], dtype=torch.float64)
        scale = max(ad_vals.abs().max().item(), fd_vals.abs().max().item(), 1e-6)
        err = (ad_vals - fd_vals).abs().max().item() / scale
        worst = max(worst, err)
    return worst


@dataclass
class BlockResult:
    name: str
    worst_error: float
    tolerance: float

    @property
    def passed(self):
        return self.worst_error <= self.tolerance

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}  {self.name:<24s} worst rel err "
            f"{self.worst_error:.3e} (tol {self.tolerance:.0e})"
        )


def check_block(name, fn, tensors, tolerance, eps=1e-4, max_coords=None, seed=0):
    worst = central_difference_error(fn, tensors, eps=eps, max_coords=max_coords, seed=seed)
    return BlockResult(name=name, worst_error=worst, tolerance=tolerance)


def module_leaves(module, inputs=()):
    """All float64 leaf tensors to perturb: explicit inputs plus parameters."""
    leaves = list(inputs) + [p for p in module.parameters() if p.requires_grad]
    for t in leaves:
        if t.dtype != torch.float64:
            raise NumericError("finite-difference checks require float64 tensors")
    return leaves


def run_block_checks(config=None, max_coords=8, seed=0):
    """Run the finite-difference suite over every differentiable block.

    Returns a list of BlockResult in a stable order. `config` narrows the
    miniature sizes; defaults keep the whole suite under a couple of
    minutes on a laptop CPU.
    """
    # Imported lazily to avoid import cycles.
    from . import blocks_under_test

    return blocks_under_test.all_checks(config=config, max_coords=max_coords, seed=seed)


def require_all_pass(results):
    failed = [r for r in results if not r.passed]
    if failed:
        names = ", ".join(r.name for r in failed)
        raise NumericError(f"gradient check failed for: {names}")
