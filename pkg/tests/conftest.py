"""Shared fixtures: reference parameters/scenario and the (expensive)
warm-started dual-model reference runs, computed once per session."""

import time

import numpy as np
import pytest

from mmcdyn import analysis, params, sim
from mmcdyn.control import Refs


@pytest.fixture(scope="session")
def p():
    return params.load_params(params.resolve_config_path("paper.cfg"))


@pytest.fixture(scope="session")
def sc():
    return sim.load_scenario(params.resolve_config_path("paper.scn"))


@pytest.fixture(scope="session")
def eq_at(p):
    """Cached equilibrium lookup keyed by (p_ref, q_ref)."""
    cache = {}

    def get(p_ref, q_ref):
        key = (p_ref, q_ref)
        if key not in cache:
            cache[key] = analysis.find_equilibrium(p, Refs(p_ref, q_ref))
        return cache[key]

    return get


@pytest.fixture(scope="session")
def headline(p, sc):
    """Warm-started reference-scenario runs of both models plus the
    cross-model comparison report and wall-clock timings."""
    refs = Refs(*sc.initial_refs)
    y_aam, y_ssti, eq = analysis.prepare_warm_start(p, refs)
    t0 = time.perf_counter()
    tr_aam = sim.run_scenario("aam", sc, p, warm_start=y_aam)
    t1 = time.perf_counter()
    tr_ssti = sim.run_scenario("ssti", sc, p, warm_start=y_ssti)
    t2 = time.perf_counter()
    proj = analysis.project_aam_trace(tr_aam, p)
    report, violations = analysis.evaluate_comparison(proj, tr_ssti, sc, p)
    return {"eq": eq, "aam": tr_aam, "ssti": tr_ssti, "proj": proj,
            "report": report, "violations": violations,
            "runtime_aam": t1 - t0, "runtime_ssti": t2 - t1}


@pytest.fixture()
def rng():
    return np.random.default_rng(20260823)
