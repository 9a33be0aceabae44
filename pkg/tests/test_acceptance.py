"""Acceptance criteria 1-14, one preset each, at their stated tolerances.

Each test runs the preset, checks the thresholds below against the preset's
metrics (independently of the preset's own expectation table) and prints one
PASS/FAIL line.  The four criteria on the eps=0.05 run share one simulation.
"""

import math

import pytest

from mzk.presets import PRESETS, run_preset


def _in(lo, hi):
    return lambda v: lo <= v <= hi


def _le(x):
    return lambda v: v <= x


def _eq(x):
    return lambda v: v == x


CRITERIA = {
    1: ("linear-unitarity", {"max_relative_l2_drift": _le(1e-12)}),
    2: ("airy-cross", {"max_abs_error": _le(1e-6), "ai0_quadrature_vs_reference": _le(1e-9)}),
    3: ("kernel-similarity", {"collapse_max_relative_deviation": _le(0.01), "envelope_finite": _eq(True)}),
    4: ("weaklp-scaling", {"exponent_error_p4": _le(0.03), "exponent_error_p6": _le(0.03)}),
    5: ("oracle-equivalence", {"max_relative_deviation": _le(1e-10)}),
    6: ("conservation", {"max_relative_l2_drift": _le(1e-8)}),
    7: ("decay-2-3", {"linf_exponent": _in(-0.75, -0.58), "linf_half_a_exponent": _le(-0.75),
                      "linf_grad_exponent": _le(-0.54)}),
    8: ("bounded-norms", {"h3_ratio": _le(1.1), "w_a_ratio": _le(1.1), "w_b_ratio": _le(1.1)}),
    9: ("dtf-decay", {"dtf_exponent": _le(-1.0)}),
    10: ("scattering", {"increments_decreasing_after_4": _eq(True), "tail_finite": _eq(True)}),
    11: ("cubic-scaling", {"slope": _in(2.8, 3.2)}),
    12: ("resonance-algebra", {"n_predicate_mismatches": _eq(0), "phi_all_plus_unit": _eq(24.0),
                              "max_m_gradxi_on_resonances": _le(1e-9),
                              "gradient_fd_max_relative_error": _le(1e-6)}),
    13: ("singular-identities", {"max_relative_residual": _le(1e-12)}),
    14: ("cutoff-scaling", {"chi_max_deviation": _le(1e-9), "singular_exponent_relative_error": _le(0.10)}),
}


@pytest.fixture(scope="module")
def out_root(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


def test_criteria_cover_presets():
    assert sorted(CRITERIA) == list(range(1, 15))
    assert sorted(name for name, _ in CRITERIA.values()) == sorted(PRESETS)
    for number, (name, _) in CRITERIA.items():
        assert PRESETS[name].criterion == number


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_acceptance(number, out_root, capsys):
    name, checks = CRITERIA[number]
    manifest = run_preset(name, out_root)
    results = {metric: (manifest.metrics.get(metric), ok) for metric, ok in checks.items()}
    failed = [m for m, (v, ok) in results.items()
              if v is None or (isinstance(v, float) and math.isnan(v)) or not ok(v)]
    passed = not failed and manifest.passed
    detail = ", ".join(f"{m}={_fmt(v)}" for m, (v, _) in results.items())
    with capsys.disabled():
        print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {name}: {detail} "
              f"({manifest.wall_seconds:.1f}s)")
    assert not failed, f"criterion {number} failed on {failed}: {detail}"
    assert manifest.passed, [e for e in manifest.expectations if not e["passed"]]
