"""Central finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from .errors import GradCheckError
from .tensor import Parameter


def grad_check(loss_fn, params, epsilon=1e-5, floor=1.0, require_f64=True):
    """Compare reverse-mode gradients against central finite differences.

    ``loss_fn`` must rebuild the forward graph from the current parameter
    values and return a deterministic 1x1 tensor. Every coordinate of every
    parameter in ``params`` is perturbed by +/- ``epsilon``.

    Per-coordinate error is ``|g_ad - g_fd| / max(|g_ad|, |g_fd|, floor)``;
    the floor keeps finite-difference roundoff on near-zero gradients from
    registering as huge relative errors. Returns the maximum over all
    coordinates.
    """
    params = list(params)
    if require_f64:
        for p in params:
            if p.data.dtype != np.float64:
                raise GradCheckError(
                    f"parameter {p.name!r} is {p.data.dtype}; finite differences "
                    "need f64 headroom (pass require_f64=False to override)"
                )

    probe_a = loss_fn().item()
    probe_b = loss_fn().item()
    if probe_a != probe_b:
        raise GradCheckError(
            f"loss is not deterministic ({probe_a!r} != {probe_b!r}); "
            "disable dropout or any other randomness before checking"
        )

    for p in params:
        p.zero_grad()
    loss_fn().backward()
    analytic = [
        p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params
    ]
    for p in params:
        p.zero_grad()

    worst = 0.0
    for p, g_ad in zip(params, analytic):
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + epsilon
            f_plus = loss_fn().item()
            flat[i] = saved - epsilon
            f_minus = loss_fn().item()
            flat[i] = saved
            g_fd = (f_plus - f_minus) / (2.0 * epsilon)
            g = g_ad.reshape(-1)[i]
            err = abs(g - g_fd) / max(abs(g), abs(g_fd), floor)
            if err > worst:
                worst = err
    return worst


def collect_parameters(obj):
    """Gather Parameter attributes of a module-like object, in slot order."""
    found = []
    names = getattr(obj, "__slots__", None) or vars(obj).keys()
    for attr in names:
        value = getattr(obj, attr, None)
        if isinstance(value, Parameter):
            found.append(value)
    return found
