import csv
import io
import json
import math
from dataclasses import replace

import jsonschema
import numpy as np
import pytest

from mixorder.criteria import CriterionSpec
from mixorder.dataio import load_schema
from mixorder.densities import GaussianFamily, GaussianParams, LaplaceFamily, LaplaceParams
from mixorder.fitter import FitConfig
from mixorder.mixture import MixtureParams
from mixorder.simulation import (
    SimulationConfig,
    data_hash,
    get_scenario,
    hellinger_1d,
    replicate_data,
    run_consistency,
    run_replicate,
    scenario_library,
)

G1 = GaussianFamily(1)
FAST = FitConfig(restarts=2, max_iters=150)


def normal(mu, var=1.0):
    return MixtureParams([1.0], [GaussianParams.scalar(mu, var)], G1)


class TestHellinger:
    @pytest.mark.parametrize("mu", [0.5, 1.0, 2.0, 4.0])
    def test_closed_form(self, mu):
        want = math.sqrt(1 - math.exp(-mu * mu / 8))
        assert abs(hellinger_1d(normal(0.0), normal(mu)) - want) <= 1e-6

    def test_mu2_value(self):
        # sqrt(1 - exp(-0.5)) = 0.62727...
        assert hellinger_1d(normal(0.0), normal(2.0)) == pytest.approx(0.6273, abs=1e-4)

    def test_identity(self):
        f = MixtureParams([0.4, 0.6], [LaplaceParams(0, 1), LaplaceParams(3, 2)], LaplaceFamily())
        assert hellinger_1d(f, f) <= 1e-8

    def test_symmetric(self):
        f = MixtureParams([0.4, 0.6], [GaussianParams.scalar(0, 1), GaussianParams.scalar(3, 0.5)], G1)
        g = normal(1.0, 2.0)
        assert abs(hellinger_1d(f, g) - hellinger_1d(g, f)) <= 1e-10

    def test_laplace_closed_form(self):
        # equal-rate Laplace pair: affinity = (1 + gamma*d/2) exp(-gamma*d/2)
        lap = LaplaceFamily()
        f = MixtureParams([1.0], [LaplaceParams(0.0, 1.0)], lap)
        g = MixtureParams([1.0], [LaplaceParams(1.5, 1.0)], lap)
        aff = (1 + 0.75) * math.exp(-0.75)
        assert abs(hellinger_1d(f, g) - math.sqrt(1 - aff)) <= 1e-6

    def test_rejects_multivariate(self):
        f = MixtureParams([1.0], [GaussianParams.from_cov([0.0, 0.0], np.eye(2))], GaussianFamily(2))
        with pytest.raises(ValueError):
            hellinger_1d(f, f)


class TestScenarios:
    def test_library(self):
        lib = scenario_library()
        assert set(lib) == {"gaussian-2comp", "laplace-2comp", "regression-2line", "gaussian-1comp-null"}
        lap = lib["laplace-2comp"].truth
        assert list(lap.weights) == [0.5, 0.5]
        assert [c.loc for c in lap.components] == [0.0, 6.0]
        assert [c.rate for c in lap.components] == [1.0, 1.0]
        assert lib["gaussian-1comp-null"].k0 == 1
        g = lib["gaussian-2comp"]
        assert g.n_grid == (200, 500, 2000) and g.kmax == 5 and g.replicates == 200
        reg = lib["regression-2line"]
        assert reg.n_grid == (1000,) and reg.kmax == 4
        assert [list(c.coef) for c in reg.truth.components] == [[0.0, 2.0], [0.0, -2.0]]
        assert reg.truth.components[0].sd ** 2 == pytest.approx(0.25)

    def test_unknown(self):
        with pytest.raises(KeyError, match="gaussian-2comp"):
            get_scenario("nope")

    def test_config_round_trip(self):
        for cfg in scenario_library().values():
            d = json.loads(json.dumps(cfg.to_dict()))
            assert SimulationConfig.from_dict(d).to_dict() == cfg.to_dict()

    def test_config_strict(self):
        d = get_scenario("gaussian-1comp-null").to_dict()
        d["typo"] = 1
        with pytest.raises(ValueError, match="typo"):
            SimulationConfig.from_dict(d)

    def test_invalid_configs(self):
        base = get_scenario("gaussian-2comp")
        with pytest.raises(ValueError):
            replace(base, replicates=0)
        with pytest.raises(ValueError):
            replace(base, n_grid=(500, 200))
        with pytest.raises(ValueError):
            replace(base, kmax=1)


def small(name, **kw):
    cfg = replace(get_scenario(name), fit_cfg=FAST, **kw)
    return cfg


class TestRun:
    def test_paired_design(self):
        cfg = small("gaussian-2comp", n_grid=(200,), replicates=2)
        d = run_replicate(cfg, 200, 1)
        assert d["data_hash"] == data_hash(replicate_data(cfg, 200, 1))
        assert set(d["selected"]) == {c.label for c in cfg.criteria}
        assert d["data_hash"] != data_hash(replicate_data(cfg, 200, 0))
        # BIC and nu-BIC(3) see the same fits and identical penalties
        assert d["selected"]["bic"] == d["selected"]["nu-bic:3"]

    def test_deterministic(self):
        cfg = small("laplace-2comp", n_grid=(200,), replicates=1)
        assert run_consistency(cfg).to_csv() == run_consistency(cfg).to_csv()

    def test_null_accuracy(self):
        cfg = small("gaussian-1comp-null", n_grid=(500,), replicates=20, kmax=2,
                    criteria=(CriterionSpec.bic(),))
        row = run_consistency(cfg).row("bic", 500)
        assert row.accuracy >= 0.9
        assert row.correct + row.under + row.over == row.replicates
        assert row.accuracy == row.correct / row.replicates

    def test_table_outputs(self):
        cfg = small("gaussian-2comp", n_grid=(200, 500), replicates=2)
        table = run_consistency(cfg)
        assert len(table.rows) == 2 * len(cfg.criteria)
        text = table.to_csv()
        parsed = list(csv.reader(io.StringIO(text)))
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(parsed)
        assert buf.getvalue() == text
        jsonschema.validate(json.loads(json.dumps(table.to_dict())), load_schema("accuracy_table"))
        nu = [r for r in table.rows if r.criterion == "nu-bic:3"]
        bic = [r for r in table.rows if r.criterion == "bic"]
        assert [(r.correct, r.mean_k) for r in nu] == [(r.correct, r.mean_k) for r in bic]
        assert all(r.median_hellinger is not None and 0 <= r.median_hellinger <= 1 for r in table.rows)

    def test_parallel_matches_serial(self):
        cfg = small("gaussian-1comp-null", n_grid=(300,), replicates=2, kmax=2)
        assert run_consistency(cfg, n_jobs=2).to_csv() == run_consistency(cfg, n_jobs=1).to_csv()

    def test_callback(self):
        cfg = small("regression-2line", n_grid=(200,), replicates=2, kmax=2)
        seen = []
        run_consistency(cfg, on_replicate=seen.append)
        assert [d["replicate"] for d in seen] == [0, 1]
