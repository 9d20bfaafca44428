"""Central finite-difference verification of analytic gradients.

A check evaluates a scalar loss closure twice per probed parameter entry
(at +eps and -eps, float64) and compares the difference quotient with the
autograd value. Probes that fail at the base eps are retried once at
eps / 10: discretization artifacts near ReLU kinks shrink with eps, while a
genuinely wrong gradient does not.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .seeding import rng_for

DEFAULT_EPS = 1e-5
DEFAULT_RTOL = 1e-4


@dataclass(frozen=True)
class GradProbe:
    param: str
    index: int
    analytic: float
    numeric: float
    rel_err: float
    eps: float

    @property
    def ok(self) -> bool:
        return self.rel_err < DEFAULT_RTOL


def _rel_err(numeric: float, analytic: float) -> float:
    return abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-6)


def check_gradients(
    make_loss,
    named_params,
    n_checks: int = 20,
    eps: float = DEFAULT_EPS,
    rtol: float = DEFAULT_RTOL,
    seed: int = 0,
) -> list[GradProbe]:
    """Probe ``n_checks`` random parameter entries of a scalar loss.

    make_loss: () -> torch scalar, re-running the forward pass.
    named_params: iterable of (name, tensor); tensors must require grad.
    Raises AssertionError listing every probe whose final relative error
    exceeds rtol.
    """
    named_params = [(n, p) for n, p in named_params]
    if not named_params:
        raise ValueError("no parameters to check")
    params = [p for _, p in named_params]

    loss = make_loss()
    grads = torch.autograd.grad(loss, params, allow_unused=True)

    rng = rng_for(seed, "gradcheck")
    sizes = np.array([p.numel() for p in params])
    weights = sizes / sizes.sum()

    probes: list[GradProbe] = []
    for _ in range(n_checks):
        pi = int(rng.choice(len(params), p=weights))
        j = int(rng.integers(sizes[pi]))
        name, param = named_params[pi]
        g = grads[pi]
        analytic = 0.0 if g is None else float(g.reshape(-1)[j])

        probe = _probe_entry(make_loss, param, j, analytic, eps, name)
        if not probe.rel_err < rtol:
            probe = _probe_entry(make_loss, param, j, analytic, eps / 10.0, name)
        probes.append(probe)

    failures = [p for p in probes if not p.rel_err < rtol]
    if failures:
        lines = "\n".join(
            f"  {p.param}[{p.index}]: analytic={p.analytic:.3e} "
            f"numeric={p.numeric:.3e} rel_err={p.rel_err:.3e} (eps={p.eps:g})"
            for p in failures
        )
        raise AssertionError(f"{len(failures)} gradient probes failed:\n{lines}")
    return probes


def _probe_entry(make_loss, param, j, analytic, eps, name) -> GradProbe:
    flat = param.data.reshape(-1)
    original = float(flat[j])
    with torch.no_grad():
        flat[j] = original + eps
    f_plus = float(make_loss().detach())
    with torch.no_grad():
        flat[j] = original - eps
    f_minus = float(make_loss().detach())
    with torch.no_grad():
        flat[j] = original
    numeric = (f_plus - f_minus) / (2.0 * eps)
    return GradProbe(
        param=name,
        index=j,
        analytic=analytic,
        numeric=numeric,
        rel_err=_rel_err(numeric, analytic),
        eps=eps,
    )
