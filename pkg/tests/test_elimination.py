import numpy as np
import pytest

from bbglm import dataset as ds
from bbglm import elimination as elim
from bbglm.design import INTERCEPT, ModelSpec
from bbglm.elimination import (
    ABSENCE_FINAL,
    EliminationError,
    Factor,
    absence_candidates,
    backward_eliminate,
    expand_terms,
)
from bbglm.engine import UnstablePosterior


def names(terms):
    return [t.split("=")[0] for t in terms]


def test_single_binary_factor():
    assert names(expand_terms({"F": Factor("f", ("a", "b"))})) == ["F"]


def test_interaction_names():
    got = names(expand_terms(
        {"F": Factor("f", ("a", "b")), "G": Factor("g", ("x", "y"))}, [("F", "G")]
    ))
    assert got == ["F", "G", "FG"]


def test_absence_candidate_set():
    got = names(absence_candidates())
    expected = {"C", "S", "L", "CS", "CL", "SL", "CSL", "A2", "A3", "A4",
                "CA2", "CA3", "CA4", "SA2", "SA3", "SA4"}
    assert set(got) == expected and len(got) == 16
    assert set(ABSENCE_FINAL) <= expected


def test_expand_errors():
    with pytest.raises(ValueError, match="duplicate"):
        expand_terms({"A": Factor("a", ("0", "1")), "B": Factor("b", ("0", "1")),
                      "AB": Factor("c", ("0", "1"))}, [("A", "B")])
    with pytest.raises(ValueError, match="empty"):
        expand_terms({"A": Factor("a", ("0", "1"))}, main_effects=[])
    with pytest.raises(ValueError):
        Factor("a", ("only",))


def poisson_data(seed, n=400, coefs=(1.0, 0.5, 0.4, 0.0)):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3)).round(3)
    mu = np.exp(coefs[0] + x @ np.asarray(coefs[1:]))
    y = rng.poisson(mu)
    return ds.Dataset.from_columns({"a": x[:, 0], "b": x[:, 1], "noise": x[:, 2], "y": y})


def test_threshold_zero_drops_nothing():
    data = poisson_data(0)
    trace = backward_eliminate(data, ModelSpec("y", ("a", "b", "noise")), threshold=0.0,
                               M_step=100)
    assert len(trace.steps) == 1 and trace.dropped == []


def test_noise_column_goes_first():
    # a true-zero coefficient has |pmean|/psd near |N(0, 1)|, so it falls
    # below 3 in about 99.7% of runs while the real effects stay far above
    first = []
    for seed in range(100):
        trace = backward_eliminate(poisson_data(seed), ModelSpec("y", ("a", "b", "noise")),
                                   threshold=3.0, M_step=200, master_seed=seed)
        first.append(trace.dropped[:1] == ["noise"])
    assert np.mean(first) >= 0.95


def test_final_ratio_guarantee_and_step_invariants(absence):
    trace = backward_eliminate(absence, elim.absence_spec(), M_step=300, master_seed=3)
    final = trace.final_summary
    droppable = [k for k, n in enumerate(final.names) if n != INTERCEPT]
    assert np.all(final.ratio[droppable] >= trace.threshold)
    for k, step in enumerate(trace.steps[:-1]):
        r = step.summary.ratio
        idx = [j for j, n in enumerate(step.summary.names) if n != INTERCEPT]
        assert step.dropped_ratio == pytest.approx(r[idx].min())
        assert step.remaining == len(trace.steps[k].summary.names) - 2
    assert [s.remaining for s in trace.steps[:-1]] == list(
        range(15, 15 - len(trace.dropped), -1)
    )


def test_trace_is_deterministic(absence):
    a = backward_eliminate(absence, elim.absence_spec(), M_step=200, master_seed=8)
    b = backward_eliminate(absence, elim.absence_spec(), M_step=200, master_seed=8)
    assert a.dropped == b.dropped
    np.testing.assert_array_equal(a.final_summary.pmean, b.final_summary.pmean)


def test_interaction_can_outlive_its_parent():
    rng = np.random.default_rng(12)
    n = 600
    f = rng.integers(0, 2, n)
    g = rng.integers(0, 2, n)
    y = rng.poisson(np.exp(1.0 + 0.8 * g + 0.8 * f * g))
    data = ds.Dataset.from_columns({"f": f, "g": g, "y": y},
                                   kinds={"f": ds.CATEGORICAL, "g": ds.CATEGORICAL})
    terms = expand_terms({"F": Factor("f", ("0", "1")), "G": Factor("g", ("0", "1"))},
                         [("F", "G")])
    trace = backward_eliminate(data, ModelSpec("y", tuple(terms)), M_step=400, master_seed=1)
    assert "F" in trace.dropped
    assert "FG" in trace.final_terms


def test_pinned_terms_stay():
    data = poisson_data(2)
    spec = ModelSpec("y", ("a", "b", "noise"), pinned=("noise",))
    trace = backward_eliminate(data, spec, threshold=50.0, M_step=100)
    assert "noise" in trace.final_terms


def test_last_column_without_intercept_is_kept():
    data = poisson_data(4, coefs=(0.0, 0.0, 0.0, 0.0))
    trace = backward_eliminate(data, ModelSpec("y", ("a",), intercept=False),
                               threshold=1e6, M_step=50)
    assert trace.final_terms == ["a"]


def test_failure_aborts_with_partial_trace(monkeypatch):
    real = elim.run_posterior

    def flaky(*args, stream=0, **kw):
        if stream == 2:
            raise UnstablePosterior(30, 100, {"diverged": 30})
        return real(*args, stream=stream, **kw)

    monkeypatch.setattr(elim, "run_posterior", flaky)
    with pytest.raises(EliminationError) as info:
        backward_eliminate(poisson_data(5), ModelSpec("y", ("a", "b", "noise")),
                           threshold=3.0, M_step=100)
    trace = info.value.trace
    assert len(trace.steps) == 1 and trace.failure.startswith("step 2")


def test_negative_threshold_rejected():
    with pytest.raises(ValueError):
        backward_eliminate(poisson_data(0), ModelSpec("y", ("a",)), threshold=-1.0)
