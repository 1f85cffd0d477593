"""Central finite-difference gradient checker.

The numeric side is the independent oracle for every analytic backward
pass in this package, so it deliberately knows nothing about models: it
probes a loss callable entry by entry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# relative-error denominator floor: gradients below ~1e-2 are compared
# absolutely (scaled), which keeps finite-difference noise out of the verdict
_DENOM_FLOOR = 1e-2


@dataclass
class GradCheckReport:
    max_rel_error: dict[str, float]

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values())

    def ok(self, tolerance: float) -> bool:
        return self.worst < tolerance

    def __str__(self):
        lines = [f"  {name:12s} max rel err {err:.3e}"
                 for name, err in self.max_rel_error.items()]
        return "\n".join(lines)


def grad_check(params, loss_fn, grads, step=1e-4) -> GradCheckReport:
    """Compare ``grads`` against central differences of ``loss_fn``.

    ``loss_fn`` must be a pure function of the current values in
    ``params`` (any dropout masks or data fixed by the caller); arrays are
    perturbed in place and restored.
    """
    report = {}
    for name, p in params.items():
        flat = p.reshape(-1)
        gflat = np.asarray(grads[name]).reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_fn()
            flat[i] = orig - step
            down = loss_fn()
            flat[i] = orig
            numeric = (up - down) / (2.0 * step)
            analytic = gflat[i]
            denom = max(abs(analytic) + abs(numeric), _DENOM_FLOOR)
            worst = max(worst, abs(analytic - numeric) / denom)
        report[name] = worst
    return GradCheckReport(max_rel_error=report)
