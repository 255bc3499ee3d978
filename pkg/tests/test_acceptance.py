"""Acceptance criteria 1-11 at their stated tolerances, one line per criterion.

Run with ``pytest -s tests/test_acceptance.py`` to see the PASS/FAIL lines.
"""
import numpy as np
import pytest

from measure_filter import validation as v

SEED = 0


def _rng():
    return np.random.default_rng(SEED)


CRITERIA = {
    1: lambda: v.check_fv_kernels(),
    2: lambda: v.check_hypergeom_merging(_rng()),
    3: lambda: v.check_fv_commutation(_rng()),
    4: lambda: v.check_dw_product(_rng()),
    5: lambda: v.check_s_decay(_rng()),
    6: lambda: v.check_cir_grid(SEED),
    7: lambda: v.check_wf_particles(SEED),
    8: lambda: v.check_duality(SEED),
    9: lambda: v.check_figure_behaviour(SEED),
    10: lambda: v.check_extended_precision(),
    11: lambda: v.check_fv_performance(SEED),
}


@pytest.mark.parametrize("criterion", sorted(CRITERIA))
def test_criterion(criterion):
    checks = CRITERIA[criterion]()
    assert checks and all(c.criterion == criterion for c in checks)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"\ncriterion {criterion}: {status} {c.name} value={c.value:.3g} "
              f"tol={c.tolerance:.3g} {c.detail}".rstrip())
    failed = [c.name for c in checks if not c.passed]
    assert not failed, f"criterion {criterion} failed: {failed}"
