"""Randomized structural suite: green nominally, red when sabotaged."""

from parbuck.verify import residual_table, run_structural_suite


def test_nominal_suite_is_green():
    results = run_structural_suite(draws=30, seed=0)
    table = residual_table(results)
    assert all(r.passed for r in results), f"red checks:\n{table}"
    names = {r.name for r in results}
    assert {"skew_symmetry", "gamma_row_sums", "state_map_round_trip",
            "transformed_sparsity", "casimir_invariance_ideal",
            "casimir_violation_with_esr", "energy_round_trip",
            "cost_gradient_fd"} <= names


def test_seeded_runs_reproduce_residuals():
    a = run_structural_suite(draws=10, seed=42)
    b = run_structural_suite(draws=10, seed=42)
    assert [(r.name, r.max_residual) for r in a] == [(r.name, r.max_residual) for r in b]


def test_different_seed_changes_residuals():
    a = run_structural_suite(draws=10, seed=1)
    b = run_structural_suite(draws=10, seed=2)
    assert [r.max_residual for r in a] != [r.max_residual for r in b]


def test_corrupted_repartition_matrix_turns_red():
    results = run_structural_suite(draws=5, seed=0, gamma_corruption=1e-3)
    failed = {r.name for r in results if not r.passed}
    assert "casimir_invariance_ideal" in failed


def test_table_formatting():
    results = run_structural_suite(draws=3, seed=0)
    table = residual_table(results)
    lines = table.splitlines()
    assert len(lines) == len(results) + 1
    assert "residual" in lines[0] and "tolerance" in lines[0]
    assert all(("pass" in ln) or ("FAIL" in ln) for ln in lines[1:])
