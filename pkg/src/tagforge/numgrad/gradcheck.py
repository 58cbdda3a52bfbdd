"""Finite-difference verification of reverse-mode gradients.

The checker perturbs parameter components one at a time and compares the
central difference (f(x+h) - f(x-h)) / 2h against the gradient produced by
``backward``. Callers must supply a pure forward function; in particular,
dropout has to be disabled (pass train=False inside ``f``) or the comparison
is meaningless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import Tensor, backward, zero_grad


@dataclass
class GradCheckEntry:
    name: str
    max_rel_err: float
    passed: bool


@dataclass
class GradCheckReport:
    entries: list[GradCheckEntry]
    tol: float

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def max_rel_err(self) -> float:
        return max(e.max_rel_err for e in self.entries)

    def __str__(self) -> str:
        lines = [
            f"{'PASS' if e.passed else 'FAIL'}  {e.name}  max_rel_err={e.max_rel_err:.3e}"
            for e in self.entries
        ]
        return "\n".join(lines)


def _rel_err(a: float, n: float) -> float:
    denom = max(abs(a), abs(n))
    if denom < 1e-8:
        return abs(a - n)
    return abs(a - n) / denom


def grad_check(f, params, h: float = 1e-5, tol: float = 1e-6,
               max_samples: int | None = None, rng=None) -> GradCheckReport:
    """Compare analytic gradients of ``f`` against central differences.

    ``f`` takes no arguments, reads the current ``params`` data and returns a
    scalar Tensor. When ``max_samples`` is set, at most that many components
    per parameter are probed (chosen with ``rng``).
    """
    params = list(params)
    zero_grad(params)
    loss = f()
    backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    zero_grad(params)

    if rng is None:
        rng = np.random.default_rng(0)

    entries = []
    for k, p in enumerate(params):
        flat = p.data.reshape(-1)
        n = flat.size
        if max_samples is not None and n > max_samples:
            idxs = rng.choice(n, size=max_samples, replace=False)
        else:
            idxs = range(n)
        worst = 0.0
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + h
            up = f().item()
            flat[i] = orig - h
            down = f().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            worst = max(worst, _rel_err(analytic[k].reshape(-1)[i], numeric))
        name = p.name or f"param[{k}]"
        entries.append(GradCheckEntry(name=name, max_rel_err=worst, passed=worst < tol))
    return GradCheckReport(entries=entries, tol=tol)
