"""Acceptance gate: one group of checks per criterion, summarised after the run."""

import json
import random
import time

import pytest

from srsmine.classifier import FR, NFR, EvaluationRow, classify, evaluate, format_report, train
from srsmine.cli import main
from srsmine.datagen import SearchConfig, SearchFailed, SearchFailure, alternating_variable_search, generate_suite
from srsmine.pathfinder import enumerate_targets
from srsmine.reducer import reduce
from srsmine.suite import coverage, dumps_suite

from oracles import all_reachable_guarded, ivar, line_straddles, model, random_model, status

N_MODELS = 60
criterion = pytest.mark.criterion


@pytest.fixture(scope="module")
def models():
    ms = [random_model(seed) for seed in range(N_MODELS)]
    for m in ms:
        assert len(m.states) <= 6 and len(m.variables) <= 3
        assert all(v.kind == "integer" and v.hi - v.lo + 1 <= 200 for v in m.variables)
    return ms


@pytest.fixture(scope="module")
def searches(models):
    """Every target of every model, searched once with a trace attached."""
    runs = []
    start = time.perf_counter()
    for n, m in enumerate(models):
        for i, t in enumerate(enumerate_targets(m)):
            trace = []
            try:
                result = alternating_variable_search(m, t, SearchConfig(seed=1000 + n), i, trace)
            except SearchFailed as exc:
                result = exc.failure
            runs.append((m, t, result, trace))
    return runs, time.perf_counter() - start


@pytest.fixture(scope="module")
def suites(models):
    return [(m, generate_suite(m, SearchConfig(seed=7 + n))) for n, m in enumerate(models)]


# -- 1 ----------------------------------------------------------------------


@criterion(1, "boundary tightness vs exhaustive scan, random models, < 60 s")
def test_boundary_tightness(searches):
    runs, elapsed = searches
    start = time.perf_counter()
    checked = 0
    for m, t, result, _ in runs:
        if isinstance(result, SearchFailure):
            continue
        changed = [k for k in result.i_in if result.i_in[k] != result.i_out[k]]
        assert len(changed) == 1
        var = changed[0]
        lo, hi = sorted([result.i_in[var], result.i_out[var]])
        assert (lo, hi) in line_straddles(m, t.path, result.i_in, var)
        assert status(m, t.path, result.i_in) is (not t.desired)
        assert status(m, t.path, result.i_out) is t.desired
        checked += 1
    total = elapsed + time.perf_counter() - start
    print(f"\n{checked} boundary pairs checked over {N_MODELS} models in {total:.1f} s")
    assert checked > 0
    assert total < 60


# -- 2 ----------------------------------------------------------------------


@criterion(2, "worked example x > 10 gives I_in {x:11}, I_out {x:10}, < 1 s")
def test_worked_example():
    m = model([ivar("x", 0, 100)], [{"id": "t1", "source": "A", "target": "B", "guard": "x > 10"}], states=("A", "B"))
    t = next(t for t in enumerate_targets(m) if not t.desired)
    start = time.perf_counter()
    pair = alternating_variable_search(m, t, SearchConfig(seed=0))
    assert time.perf_counter() - start < 1
    assert (pair.i_in, pair.i_out) == ({"x": 11}, {"x": 10})


@criterion(2, "worked example x > 10 gives I_in {x:11}, I_out {x:10}, < 1 s")
@pytest.mark.parametrize("seeds", [range(0, 100), range(2 ** 32, 2 ** 32 + 100)])
def test_worked_example_any_seed(seeds):
    m = model([ivar("x", 0, 100)], [{"id": "t1", "source": "A", "target": "B", "guard": "x > 10"}], states=("A", "B"))
    t = next(t for t in enumerate_targets(m) if not t.desired)
    for seed in seeds:
        pair = alternating_variable_search(m, t, SearchConfig(seed=seed))
        assert (pair.i_in, pair.i_out) == ({"x": 11}, {"x": 10}), seed


# -- 3 ----------------------------------------------------------------------


@criterion(3, "predicate completeness vs brute-force path enumeration")
def test_predicate_completeness(models):
    for m in models:
        targets = enumerate_targets(m)
        reachable = all_reachable_guarded(m, 16)
        for tr in m.guarded:
            outcomes = sorted(t.desired for t in targets if t.transition == tr.id)
            if tr.id in reachable:
                assert outcomes == [False, True]
            else:
                assert outcomes == [] and tr.id in targets.skipped


# -- 4 ----------------------------------------------------------------------


@criterion(4, "accepted F strictly decreases within each variable phase")
def test_monotone_descent(searches):
    runs, _ = searches
    phases = 0
    for _, _, _, trace in runs:
        grouped = {}
        for restart, phase, _, f in trace:
            grouped.setdefault((restart, phase), []).append(f)
        for fs in grouped.values():
            assert all(a > b for a, b in zip(fs, fs[1:])), fs
        phases += len(grouped)
    assert phases > 0


# -- 5 ----------------------------------------------------------------------


@criterion(5, "reduction preserves coverage; duplicated suite shrinks to exactly 50%")
def test_reduction_safety(suites):
    for m, suite in suites:
        if not suite.cases:
            continue
        reduced = reduce(suite, m, "auto")
        assert coverage(reduced, m) == coverage(suite, m)
        assert len(reduced) <= len(suite)


@criterion(5, "reduction preserves coverage; duplicated suite shrinks to exactly 50%")
def test_duplicate_fixture_halves(atm):
    suite = generate_suite(atm, SearchConfig(seed=2024))
    twins = [c.__class__(**{**c.__dict__, "id": c.id + "b"}) for c in suite.cases]
    dup = suite.with_cases(list(suite.cases) + twins)
    reduced = reduce(dup, atm, len(dup) // 2)
    assert len(reduced) * 2 == len(dup)
    assert coverage(reduced, atm) == coverage(dup, atm)


# -- 6 ----------------------------------------------------------------------


@criterion(6, "permuting case order yields a byte-identical reduced suite")
def test_order_insensitivity(suites):
    rng = random.Random(6)
    for m, suite in suites:
        if not suite.cases:
            continue
        expected = dumps_suite(reduce(suite, m, "auto"))
        for _ in range(3):
            cases = list(suite.cases)
            rng.shuffle(cases)
            assert dumps_suite(reduce(suite.with_cases(cases), m, "auto")) == expected


# -- 7 ----------------------------------------------------------------------


@criterion(7, "generate twice with the same seed gives byte-identical files")
@pytest.mark.parametrize("sample", ["two_state.json", "atm.json"])
def test_generate_deterministic(tmp_path, samples, sample):
    files = []
    for name in ("first.json", "second.json"):
        out = tmp_path / name
        assert main(["generate", str(samples / sample), "--seed", "12345", "--out", str(out)]) == 0
        files.append(out.read_bytes())
    assert files[0] == files[1]


# -- 8 ----------------------------------------------------------------------


def disjoint_corpus(n_fr, n_nfr, rng):
    fr_words = [f"fun{i}" for i in range(40)]
    nfr_words = [f"qual{i}" for i in range(40)]
    corpus = [(" ".join(rng.sample(fr_words, 5)), FR) for _ in range(n_fr)]
    corpus += [(" ".join(rng.sample(nfr_words, 5)), NFR) for _ in range(n_nfr)]
    rng.shuffle(corpus)
    return corpus


@criterion(8, "classifier: separable accuracy, posterior sums, 365-sentence row arithmetic, < 5 s")
def test_classifier_properties():
    start = time.perf_counter()
    rng = random.Random(8)
    corpus = disjoint_corpus(130, 235, rng)
    model = train(corpus)
    assert evaluate(model, corpus, 1) == EvaluationRow(1, 365, 0)
    for sentence, _ in corpus:
        assert abs(sum(model.posteriors(sentence).values()) - 1) <= 1e-12

    # same-sized evaluation corpus: 235 NFR + 130 FR, 106 of them worded like the other class
    fresh = disjoint_corpus(130, 235, rng)
    nfr_idx = [i for i, (_, label) in enumerate(fresh) if label == NFR]
    flipped = set(rng.sample(nfr_idx, 106))
    # flipped sentences keep their NFR label but reuse FR wording
    fr_sentences = [s for s, label in fresh if label == FR]
    test_set = [(rng.choice(fr_sentences), NFR) if i in flipped else (s, label)
                for i, (s, label) in enumerate(fresh)]
    assert sum(1 for _, l in test_set if l == NFR) == 235 and len(test_set) == 365
    row = evaluate(model, test_set, 2)
    assert (row.correct, row.incorrect) == (259, 106)
    assert row.correct + row.incorrect == len(test_set)
    report = format_report([row], test_set)
    assert report.splitlines()[:3] == ["Total 365 sentences", '  235 annotated as "NFR"', '  130 annotated as "FR"']
    assert report.splitlines()[-1].split() == ["2", "259", "106"]
    assert classify(model, "")[0] == NFR
    assert time.perf_counter() - start < 5


# -- 9 ----------------------------------------------------------------------


@criterion(9, "contradictory prefix exits 2 with failed_targets populated")
def test_infeasible_target(tmp_path, samples):
    out = tmp_path / "suite.json"
    assert main(["generate", str(samples / "infeasible.json"), "--out", str(out)]) == 2
    failed = json.loads(out.read_text())["failed_targets"]
    assert failed
    assert any(f["transition"] == "t1" and f["most_violated"]["transition"] == "t0" for f in failed)
