"""The six acceptance criteria, each at its stated tolerance and time budget.

Every test prints one ``criterion N: PASS|FAIL`` line followed by the
measured quantities.  Two criteria do not hold at the configuration they
name (the multiplier equation residual at 513 nodes, and the second-order
kernel at L = 12, k = 4); they are run exactly as stated and fail.  The
``TestResolvedConfigurations`` class runs the nearest configurations at
which the same quantities do meet the bars.
"""
import time

import numpy as np
import pytest

from todalump import fourier as fo
from todalump import spectral as sk
from todalump.fields import GridSpec
from todalump.linearized import kernel_field
from todalump.suites import FOURIER_CHECKS, Settings, run_suite

MULTIPLIER = ["multiplier_mean_zero", "multiplier_equation_residual", "multiplier_negative_control"]
FOURIER_ANALYTIC = [c.name for c in FOURIER_CHECKS if c.name not in MULTIPLIER]
KERNEL = Settings(half_width=12.0, refine=4, order=2)

_first_runs: dict = {}


@pytest.fixture
def announce(request, pytestconfig):
    """Print one verdict line per criterion straight to the terminal."""
    reporter = pytestconfig.pluginmanager.get_plugin("terminalreporter")

    def emit(number: int, items: list[tuple[str, bool]], elapsed: float, budget: float):
        timed = elapsed < budget
        ok = all(passed for _, passed in items) and timed
        lines = [f"criterion {number}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f} s, budget {budget:g} s)"]
        lines += [f"    [{'ok' if passed else 'FAIL'}] {text}" for text, passed in items]
        text = "\n".join(lines)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(text)
        else:  # pragma: no cover
            print(text)
        assert ok, text

    return emit


def _timed_suite(name, settings=None, only=None):
    t0 = time.perf_counter()
    records = run_suite(name, settings or Settings(), only=only)
    _first_runs[(name, tuple(only or ()))] = (settings or Settings(), only, records)
    return records, time.perf_counter() - t0


def _record_lines(records):
    lines = []
    for r in records:
        reason = f" ({r.detail['reason']})" if "reason" in r.detail else ""
        lines.append((f"{r.name}: {r.worst_residual:.3e} {r.relation} {r.limit:g}{reason}", r.status == "pass"))
    return lines


def test_criterion_1_exact_solutions(announce):
    records, elapsed = _timed_suite("exact")
    announce(1, _record_lines(records), elapsed, 5.0)


def test_criterion_2_linearized(announce):
    records, elapsed = _timed_suite("linearized")
    announce(2, _record_lines(records), elapsed, 10.0)


def test_criterion_3_fourier(announce):
    records, elapsed = _timed_suite("fourier", only=FOURIER_ANALYTIC)
    announce(3, _record_lines(records), elapsed, 60.0)


def test_criterion_4_multiplier(announce):
    records, elapsed = _timed_suite("fourier", only=MULTIPLIER)
    announce(4, _record_lines(records), elapsed, 30.0)


def test_criterion_5_nondegeneracy(announce):
    t0 = time.perf_counter()
    records, _ = _timed_suite("kernel", KERNEL)
    grids = [GridSpec(L, k) for L in (8.0, 12.0, 16.0) for k in (2, 4)]
    table = sk.convergence_study(grids, order=2)
    elapsed = time.perf_counter() - t0
    trends = table.trends(L_ref=12.0, coarse=2, fine=4)
    items = _record_lines(records)
    items.append((f"sigma_1 ratio k=4/k=2 at L=12: {table.sigma1_ratio(12.0, 2, 4):.4f} (needs <= 0.5)",
                  trends["sigma1_halves"]))
    s2 = ", ".join(f"L={L:.2f}: {s:.3e}" for L, s in table.sigma2_by_L(4))
    items.append((f"sigma_2 decreasing with L ({s2})", trends["sigma2_decreases_with_L"]))
    items.append((f"sigma_3 spread {table.sigma3_spread():.3f} (needs < 0.2)", trends["sigma3_stable_20pct"]))
    announce(5, items, elapsed, 300.0)


def test_criterion_6_determinism(announce):
    if not _first_runs:
        pytest.skip("runs after criteria 1-5 in the same session")
    t0 = time.perf_counter()
    items = []
    for (name, _), (settings, only, first) in sorted(_first_runs.items()):
        second = run_suite(name, settings, only=only)
        same_status = [a.status for a in first] == [b.status for b in second]
        vals = np.array([[a.worst_residual, b.worst_residual] for a, b in zip(first, second)], dtype=float)
        finite = np.isfinite(vals).all(axis=1)
        diff = float(np.max(np.abs(vals[finite, 0] - vals[finite, 1]) / np.maximum(1.0, np.abs(vals[finite, 0])),
                            initial=0.0))
        items.append((f"{name}{'(' + ','.join(only) + ')' if only else ''}: outcomes identical, "
                      f"max relative change {diff:.1e}", same_status and diff < 1e-10))
        sv = [(a.detail.get("singular_values"), b.detail.get("singular_values"))
              for a, b in zip(first, second) if "singular_values" in a.detail]
        for a, b in sv:
            gap = float(np.max(np.abs(np.subtract(a, b))))
            items.append((f"{name}: singular values agree to {gap:.1e}", gap < 1e-10))
    announce(6, items, time.perf_counter() - t0, float("inf"))


class TestResolvedConfigurations:
    """Nearest configurations at which criteria 4 and 5 hold (recorded separately)."""

    def test_multiplier_at_769_nodes(self):
        grid = fo.multiplier_grid(768, 20.0)
        res = fo.multiplier_solve_eta_tilde(kernel_field("x"), grid, tol=1e-6)
        assert grid.refine == 7 and grid.nx == 769
        assert abs(res.f_integral) < 1e-6
        assert res.equation_residual < 1e-3

    def test_sixth_order_kernel(self):
        records = run_suite("kernel", Settings(half_width=6.0, refine=6, order=6))
        failed = [(r.name, r.worst_residual) for r in records if r.status != "pass"]
        assert not failed, failed
