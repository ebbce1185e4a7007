"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Param, Tensor, no_grad


class NonDeterministicError(RuntimeError):
    """Two forward passes of the checked computation disagreed."""


@dataclass
class ParamCheck:
    name: str
    max_rel_err: float
    checked: int
    total: int


@dataclass
class GradCheckReport:
    tol: float
    h: float
    params: list[ParamCheck] = field(default_factory=list)

    @property
    def max_rel_err(self) -> float:
        return max((p.max_rel_err for p in self.params), default=0.0)

    @property
    def worst_param(self) -> str:
        if not self.params:
            return ""
        return max(self.params, key=lambda p: p.max_rel_err).name

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tol

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status}: max rel err {self.max_rel_err:.3e} (tol {self.tol:.1e}, "
            f"worst {self.worst_param})"
        )


def _rel_err(a: float, n: float) -> float:
    return abs(a - n) / max(abs(a), abs(n), 1.0)


def grad_check(
    f,
    params: list[Param],
    h: float = 1e-5,
    tol: float = 1e-6,
    max_entries_per_param: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare ``f``'s analytic gradients against central differences.

    ``f`` is a zero-argument callable returning a scalar Tensor, closed over
    ``params``. Every parameter is checked; for parameters larger than
    ``max_entries_per_param`` a seeded subset of coordinates is probed
    (None probes every coordinate). Raises NonDeterministicError if two
    forward passes disagree bit-for-bit.
    """
    for p in params:
        p.zero_grad()
    y = f()
    if not isinstance(y, Tensor) or y.size != 1:
        raise ValueError("grad_check requires f() to return a scalar Tensor")
    with no_grad():
        y2 = f()
    if y.data.reshape(()) != y2.data.reshape(()):
        raise NonDeterministicError("f() returned different values on two forward passes")
    y.backward()

    rng = np.random.Generator(np.random.Philox(seed))
    report = GradCheckReport(tol=tol, h=h)
    for p in params:
        analytic = p.grad.reshape(-1).copy()
        flat = p.data.reshape(-1)
        n = flat.size
        if max_entries_per_param is None or n <= max_entries_per_param:
            idxs = np.arange(n)
        else:
            idxs = rng.choice(n, size=max_entries_per_param, replace=False)
        worst = 0.0
        with no_grad():
            for i in idxs:
                orig = flat[i]
                flat[i] = orig + h
                fp = f().item()
                flat[i] = orig - h
                fm = f().item()
                flat[i] = orig
                numeric = (fp - fm) / (2.0 * h)
                worst = max(worst, _rel_err(analytic[i], numeric))
        report.params.append(ParamCheck(p.name, worst, len(idxs), n))
    return report
