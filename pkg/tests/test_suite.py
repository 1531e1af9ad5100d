import json

import pytest

from dirichlet_ops.suite import (
    SCHEMA,
    ConfigError,
    ExperimentConfig,
    csv_text,
    generate_corpus,
    ordered_map,
    run_suite,
    write_report,
)

IDENTITY = {"name": "identity", "c0": 1, "phi": {"coeffs": []}}


def small_config(**kw):
    base = dict(schema=SCHEMA, symbols=[IDENTITY], sigma_grid=[0.25, 0.0625, 0.015625], t_grid=[0.0],
                h_grid=[0.25, 0.125], s_grid=[[0.5, 0.0], [1.0, 2.0]], truncations=[16, 32],
                lp_indices=[2, 3], mc_samples=2000, mc_polys=1, norm_path_trials=1)
    base.update(kw)
    return ExperimentConfig.from_json(base)


def test_config_rejects_unknown_keys_and_schema():
    with pytest.raises(ConfigError, match="unknown"):
        ExperimentConfig.from_json({"schema": SCHEMA, "symbols": [IDENTITY], "bogus": 1})
    with pytest.raises(ConfigError, match="schema"):
        ExperimentConfig.from_json({"symbols": [IDENTITY]})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json({"schema": "other", "symbols": [IDENTITY]})


def test_config_validation():
    with pytest.raises(ConfigError):
        small_config(sigma_grid=[])
    with pytest.raises(ConfigError):
        small_config(s_grid=[[-1.0, 0.0]])
    with pytest.raises(ConfigError):
        small_config(tolerances={"translate_integral": 0.0})
    with pytest.raises(ConfigError):
        small_config(symbols=[], corpus=None)


def test_config_round_trip():
    cfg = small_config()
    assert ExperimentConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg


def test_corpus_is_certified_and_seeded():
    a = generate_corpus(seed=4, count=6)
    b = generate_corpus(seed=4, count=6)
    assert a == b
    for Phi in a:
        assert Phi.validity.rigorous and Phi.c0 in (1, 2)
    smooth = generate_corpus(seed=4, count=6, l=1)
    assert all(n in (1, 2, 4, 8) for Phi in smooth for n in Phi.phi.support)
    with pytest.raises(ConfigError):
        generate_corpus(seed=0, count=1, support=(3, 5), l=1)


def test_csv_text_is_deterministic():
    rows = [{"a": 0.1 + 0.2, "b": None, "c": True}]
    assert csv_text(rows) == "a,b,c\n0.3,,true\n"


def test_ordered_map_preserves_order(monkeypatch):
    monkeypatch.setenv("DIRICHLET_OPS_THREADS", "4")
    assert ordered_map(lambda x: x * x, list(range(20))) == [x * x for x in range(20)]


def test_small_run_and_report(tmp_path):
    report = run_suite(small_config())
    assert not report.failed
    names = [c.name for c in report.checks]
    assert names.index("validation") < names.index("contraction") < names.index("carleson_counting")
    written = write_report(report, tmp_path)
    assert (tmp_path / "checks.csv") in written
    assert "runtime" not in (tmp_path / "checks.csv").read_text().splitlines()[0]


def test_invalid_symbol_skips_dependents():
    bad = {"name": "bad", "c0": 1, "phi": {"coeffs": [[2, 1, 0]]}}
    report = run_suite(small_config(symbols=[bad]))
    status = {c.name: c.status for c in report.checks if c.symbol == "bad"}
    assert status["validation"] == "fail"
    assert status["contraction"] == "skipped"
    assert report.failed
