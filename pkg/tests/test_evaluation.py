import json
import math

import numpy as np
import pytest

from oracles import hr_brute_force, jaccard_brute_force, ndcg_brute_force
from trendrank.evaluation import (
    EvalRun,
    evaluate,
    hit_rate_at_k,
    jaccard_at_k,
    ndcg_at_k,
    true_top_k,
    write_report_json,
    write_report_tsv,
)


def run_of(ranked, user_truth, item_truth, ks=(5, 10)):
    return EvalRun(
        ranked_list=list(ranked),
        user_truth={u: set(t) for u, t in user_truth.items()},
        item_truth=dict(item_truth),
        k_values=tuple(ks),
    )


ITEMS = [f"i{k:02d}" for k in range(20)]


# --- hit rate -----------------------------------------------------------------

def test_hr_universal_hit():
    run = run_of(ITEMS, {"u1": {"i00"}, "u2": {"i00", "i19"}}, {})
    assert hit_rate_at_k(run, 1) == 1.0


def test_hr_universal_miss():
    run = run_of(ITEMS, {"u1": {"i19"}, "u2": {"i18"}}, {})
    assert hit_rate_at_k(run, 5) == 0.0


def test_hr_half():
    run = run_of(ITEMS, {"u1": {"i00"}, "u2": {"i19"}}, {})
    assert hit_rate_at_k(run, 5) == 0.5


def test_hr_requires_evaluable_users():
    run = run_of(ITEMS, {"u1": set()}, {})
    with pytest.raises(ValueError, match="users"):
        hit_rate_at_k(run, 5)


def test_hr_nondecreasing_in_k():
    rng = np.random.default_rng(51)
    truth = {
        f"u{j}": set(rng.choice(ITEMS, size=rng.integers(1, 4), replace=False))
        for j in range(8)
    }
    run = run_of(ITEMS, truth, {})
    values = [hit_rate_at_k(run, k) for k in range(1, 21)]
    assert all(b >= a for a, b in zip(values, values[1:]))


# --- NDCG ----------------------------------------------------------------------

def test_ndcg_truth_at_rank_one():
    run = run_of(ITEMS, {"u1": {"i00"}}, {})
    assert ndcg_at_k(run, 5) == 1.0


def test_ndcg_truth_at_rank_two():
    run = run_of(ITEMS, {"u1": {"i01"}}, {})
    assert ndcg_at_k(run, 5) == pytest.approx(1 / math.log2(3), abs=1e-9)


def test_ndcg_disjoint_is_zero():
    run = run_of(ITEMS, {"u1": {"i19"}}, {})
    assert ndcg_at_k(run, 5) == 0.0


def test_ndcg_ideal_placement_over_users():
    # Each user's single truth item sits at the best possible position for it.
    run = run_of(ITEMS, {"u1": {"i00"}, "u2": {"i00"}}, {})
    assert ndcg_at_k(run, 5) == 1.0


# --- Jaccard ---------------------------------------------------------------------

def test_jaccard_identical_sets():
    truth = {item: 100 - k for k, item in enumerate(ITEMS)}
    run = run_of(ITEMS, {}, truth)
    assert jaccard_at_k(run, 5) == 1.0


def test_jaccard_disjoint_sets():
    truth = {item: k for k, item in enumerate(ITEMS)}  # reversed preference
    run = run_of(ITEMS, {}, truth)
    assert jaccard_at_k(run, 5) == 0.0


def test_jaccard_single_overlap():
    run = run_of(["a", "b", "c"], {}, {"b": 9, "d": 8, "a": 0, "c": 0})
    # Predicted top-2 {a, b}; true top-2 {b, d}; overlap 1 of union 3.
    assert jaccard_at_k(run, 2) == pytest.approx(1 / 3, abs=1e-12)


def test_jaccard_needs_enough_items():
    run = run_of(["a"], {}, {"a": 1})
    with pytest.raises(ValueError, match="at least"):
        jaccard_at_k(run, 2)


def test_jaccard_truth_ties_break_by_id():
    assert true_top_k({"b": 5, "a": 5, "c": 1}, 1) == {"a"}


def test_jaccard_symmetric():
    # Swapping which set is "predicted" and which is "truth" changes nothing.
    lhs = run_of(["a", "b", "c", "d"], {}, {"b": 4, "d": 3, "a": 2, "c": 1})
    rhs = run_of(["b", "d", "a", "c"], {}, {"a": 4, "b": 3, "c": 2, "d": 1})
    assert jaccard_at_k(lhs, 2) == jaccard_at_k(rhs, 2) == pytest.approx(1 / 3)


# --- evaluate --------------------------------------------------------------------

def test_evaluate_perfect_oracle_list():
    truth = {item: 200 - 3 * k for k, item in enumerate(ITEMS)}
    users = {f"u{j}": {ITEMS[j]} for j in range(6)}
    run = run_of(ITEMS, users, truth)
    report = evaluate(run)
    assert report.jaccard[5] == 1.0
    assert report.jaccard[10] == 1.0
    assert report.users == 6
    assert report.items == 20
    for metrics in (report.hr, report.ndcg, report.jaccard):
        assert all(0.0 <= v <= 1.0 for v in metrics.values())


def test_evaluate_reversed_list_jaccard_zero():
    truth = {item: 200 - 3 * k for k, item in enumerate(ITEMS)}
    run = run_of(list(reversed(ITEMS)), {"u": {ITEMS[0]}}, truth)
    report = evaluate(run)
    assert report.jaccard[5] == 0.0


def test_evaluate_restrict_users():
    users = {"hit": {"i00"}, "miss": {"i19"}}
    run = run_of(ITEMS, users, {item: 1 for item in ITEMS}, ks=(5,))
    assert evaluate(run).hr[5] == 0.5
    assert evaluate(run, restrict_users={"hit"}).hr[5] == 1.0


def test_evaluate_matches_brute_force():
    rng = np.random.default_rng(52)
    for _ in range(50):
        n_items = int(rng.integers(3, 21))
        items = [f"m{k:02d}" for k in range(n_items)]
        ranked = list(rng.permutation(items))
        user_truth = {}
        for j in range(int(rng.integers(1, 11))):
            size = int(rng.integers(0, min(4, n_items) + 1))
            user_truth[f"u{j}"] = set(rng.choice(items, size=size, replace=False))
        if not any(user_truth.values()):
            user_truth["u_fallback"] = {items[0]}
        item_truth = {item: int(rng.integers(0, 9)) for item in items}
        k = int(rng.integers(1, n_items + 1))
        run = run_of(ranked, user_truth, item_truth, ks=(k,))
        assert abs(hit_rate_at_k(run, k) - hr_brute_force(ranked, run.user_truth, k)) <= 1e-12
        assert abs(ndcg_at_k(run, k) - ndcg_brute_force(ranked, run.user_truth, k)) <= 1e-12
        assert (
            abs(jaccard_at_k(run, k) - jaccard_brute_force(ranked, run.item_truth, k)) <= 1e-12
        )


def test_truth_ranked_list_maximizes_jaccard():
    rng = np.random.default_rng(53)
    truth = {item: int(rng.integers(0, 50)) for item in ITEMS}
    oracle_list = sorted(ITEMS, key=lambda item: (-truth[item], item))
    oracle_run = run_of(oracle_list, {}, truth, ks=(5,))
    best = jaccard_at_k(oracle_run, 5)
    for _ in range(30):
        shuffled = list(rng.permutation(ITEMS))
        other = jaccard_at_k(run_of(shuffled, {}, truth, ks=(5,)), 5)
        assert best >= other


def test_eval_run_validation():
    with pytest.raises(ValueError, match="duplicate"):
        run_of(["a", "a"], {}, {})
    with pytest.raises(ValueError, match="positive"):
        run_of(["a"], {}, {}, ks=(0,))


def test_report_files(tmp_path):
    truth = {item: 200 - 3 * k for k, item in enumerate(ITEMS)}
    run = run_of(ITEMS, {"u": {"i00"}}, truth)
    report = evaluate(run)
    json_path = tmp_path / "report.json"
    tsv_path = tmp_path / "report.tsv"
    write_report_json(report, json_path)
    write_report_tsv(report, tsv_path)
    payload = json.loads(json_path.read_text())
    assert set(payload) == {"hr", "ndcg", "jaccard", "users", "items"}
    assert payload["hr"]["5"] == 1.0
    lines = tsv_path.read_text().splitlines()
    assert lines[0] == "metric\tk\tvalue"
    assert any(line.startswith("jaccard\t5\t") for line in lines)
