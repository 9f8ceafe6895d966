"""Shared test utilities: central finite-difference gradient oracle."""

import numpy as np
import torch

torch.set_num_threads(1)


def rel_err(a, b, floor=1e-4):
    """Relative error with an absolute floor so near-zero pairs compare sanely."""
    return abs(a - b) / max(abs(a), abs(b), floor)


def finite_difference_check(fn, tensors, rng, n_probes=8, eps=1e-5, floor=1e-4):
    """Max relative error between autograd and central differences.

    `fn(*tensors)` must return a scalar tensor; `tensors` are contiguous
    double-precision leaves with requires_grad=True. A random subset of
    coordinates of each tensor is probed.
    """
    out = fn(*tensors)
    grads = torch.autograd.grad(out, tensors, allow_unused=True)
    worst = 0.0
    for t, g in zip(tensors, grads):
        if g is None:
            continue
        flat = t.data.view(-1)
        gflat = g.reshape(-1)
        for _ in range(n_probes):
            i = int(rng.integers(0, flat.numel()))
            orig = flat[i].item()
            with torch.no_grad():
                flat[i] = orig + eps
            hi = fn(*tensors).item()
            with torch.no_grad():
                flat[i] = orig - eps
            lo = fn(*tensors).item()
            with torch.no_grad():
                flat[i] = orig
            numeric = (hi - lo) / (2.0 * eps)
            analytic = gflat[i].item()
            worst = max(worst, rel_err(numeric, analytic, floor))
    return worst


def module_grad_check(module, inputs, rng, n_probes=6, eps=1e-5, param_probes=6):
    """Finite-difference check of a module's scalar-summed output against both
    its inputs and its parameters."""
    params = [p for p in module.parameters() if p.requires_grad]

    def fn(*tensors):
        ins = tensors[:len(inputs)]
        return module(*ins).sum()

    leaves = [t.detach().clone().requires_grad_(True) for t in inputs]
    worst = finite_difference_check(fn, leaves, rng, n_probes=n_probes, eps=eps)

    if params:
        def param_fn(*ins):
            return module(*ins).sum()

        out = param_fn(*leaves)
        grads = torch.autograd.grad(out, params, allow_unused=True)
        for p, g in zip(params, grads):
            if g is None:
                continue
            flat = p.data.view(-1)
            gflat = g.reshape(-1)
            for _ in range(param_probes):
                i = int(rng.integers(0, flat.numel()))
                orig = flat[i].item()
                with torch.no_grad():
                    flat[i] = orig + eps
                hi = param_fn(*leaves).item()
                with torch.no_grad():
                    flat[i] = orig - eps
                lo = param_fn(*leaves).item()
                with torch.no_grad():
                    flat[i] = orig
                numeric = (hi - lo) / (2.0 * eps)
                worst = max(worst, rel_err(numeric, gflat[i].item()))
    return worst


def rand_image(rng, shape, dtype=torch.float64):
    """Uniform [-1, 1] tensor of the given shape from a numpy rng."""
    return torch.as_tensor(rng.uniform(-1.0, 1.0, size=shape), dtype=dtype)
