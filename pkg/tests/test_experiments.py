import json
import math

import numpy as np
import pytest

from adaptdd.experiments import (REPORT_COLUMNS, ExperimentConfig,
                                 bound_constant, class_spectra, dump_spectra, emit_report,
                                 load_reports, parse_eta, parse_tolerance, run_experiment)

from conftest import cached_substructures


@pytest.mark.parametrize("spec,m,expected", [
    ("1+log(H/h)", 14, 1 + math.log(14)),
    ("4H/h", 8, 32.0),
    ("4*H/h", 8, 32.0),
    ("H/h", 6, 6.0),
    ("1000", 8, 1000.0),
    (2.5, 8, 2.5),
    ("inf", 8, math.inf),
])
def test_parse_tolerance(spec, m, expected):
    assert parse_tolerance(spec, m) == pytest.approx(expected)


def test_parse_tolerance_rejects():
    with pytest.raises(ValueError):
        parse_tolerance("log(H)", 4)


@pytest.mark.parametrize("spec,expected", [("full", None), ("H", 8), ("h", 1), ("2h", 2),
                                           ("20h", 8)])
def test_parse_eta(spec, expected):
    assert parse_eta(spec, 8) == expected


@pytest.mark.parametrize("spec", ["1.5h", "0h", "H/2"])
def test_parse_eta_rejects(spec):
    with pytest.raises(ValueError):
        parse_eta(spec, 8)


def test_config_method_table():
    assert ExperimentConfig(2, 2, 4, 0).selection is None
    assert ExperimentConfig(2, 2, 4, 1).selection == "two-type"
    assert ExperimentConfig(2, 2, 4, 3).scaling_kind == "deluxe"
    assert ExperimentConfig(2, 2, 4, 4).solver == "fetidp"
    with pytest.raises(ValueError):
        ExperimentConfig(2, 2, 4, 5)
    with pytest.warns(RuntimeWarning):
        ExperimentConfig(2, 2, 4, 3, scaling="multiplicity")


def test_bound_constant():
    assert bound_constant(cached_substructures(2, 3, 4, "constant").dec) == 128
    assert bound_constant(cached_substructures(3, 2, 2, "constant").dec) == 8 * max(9, 9 * 4)


def test_method0_ignores_tolerances():
    sub = cached_substructures(2, 2, 4, "random:0")
    with pytest.warns(RuntimeWarning, match="tolerances ignored"):
        rep = run_experiment(ExperimentConfig(2, 2, 4, 0, tol_face="2"), sub)
    assert rep.adaptive_total == 0


def test_method0_vs_method3_ratio():
    sub = cached_substructures(2, 3, 6, "random:17")
    r0 = run_experiment(ExperimentConfig(2, 3, 6, 0), sub)
    r3 = run_experiment(ExperimentConfig(2, 3, 6, 3), sub)
    assert r0.kappa / r3.kappa >= 100


def test_methods_agree_on_solution():
    sub = cached_substructures(2, 2, 4, "random:6")
    sols = [run_experiment(ExperimentConfig(2, 2, 4, k), sub, return_solution=True)[1]
            for k in range(5)]
    for u in sols[1:]:
        np.testing.assert_allclose(u, sols[0], atol=1e-8 * np.abs(sols[0]).max())


def test_report_ratios():
    sub = cached_substructures(2, 3, 14, "channels:3:1e6")
    rep = run_experiment(ExperimentConfig(2, 3, 14, 2), sub)
    assert rep.n_faces == 12 and rep.p2 == pytest.approx(2.0)
    assert rep.lambda_min >= 1 - 1e-6 and rep.kappa >= 1 and rep.bound_ok


def test_deluxe_economy_on_totals():
    sub = cached_substructures(2, 3, 6, "random:2")
    r2 = run_experiment(ExperimentConfig(2, 3, 6, 2), sub)
    r3 = run_experiment(ExperimentConfig(2, 3, 6, 3), sub)
    assert r3.pnum2 <= r2.pnum2


def test_csv_header_and_json_roundtrip(tmp_path):
    sub = cached_substructures(2, 2, 4, "random:3")
    rep = run_experiment(ExperimentConfig(2, 2, 4, 3), sub)
    text = emit_report(rep, "csv")
    assert text.splitlines()[0] == "method,pnum1,pnum2,pnumE,iter,lambda_min,lambda_max,kappa,time"
    assert text.splitlines()[0].split(",") == list(REPORT_COLUMNS)
    path = tmp_path / "r.json"
    emit_report([rep], "json", path)
    (back,) = load_reports(path.read_text())
    assert back == rep
    with pytest.raises(ValueError):
        emit_report(rep, "xml")


def test_determinism():
    cfg = ExperimentConfig(2, 2, 4, 3, coeff="random:9")
    a, b = run_experiment(cfg), run_experiment(cfg)
    da, db = a.to_dict(), b.to_dict()
    da.pop("time"), db.pop("time")
    assert json.dumps(da) == json.dumps(db)


def test_spectra_sorted_and_symmetric():
    sub = cached_substructures(2, 3, 4, "constant")
    cfg = ExperimentConfig(2, 3, 4, 3)
    spectra = class_spectra(sub, cfg)
    for row in spectra:
        assert row["eigenvalues"] == sorted(row["eigenvalues"], reverse=True)
    ref = np.array(spectra[0]["eigenvalues"])
    for row in spectra[1:]:
        np.testing.assert_allclose(row["eigenvalues"], ref, rtol=1e-8)
    text = dump_spectra(cfg, sub=sub)
    assert text.splitlines()[0] == "class_id,kind,eta,n_infinite,eigenvalues"
    assert len(text.splitlines()) == 1 + 12
    assert "np." not in text


def test_slab_eigenvalues_larger_on_channel_face():
    sub = cached_substructures(2, 2, 12, "channels:1:1e3")
    full = class_spectra(sub, ExperimentConfig(2, 2, 12, 3, eta="H"))
    thin = class_spectra(sub, ExperimentConfig(2, 2, 12, 3, eta="h"))
    for a, b in zip(full, thin):
        assert max(b["eigenvalues"], default=0) >= max(a["eigenvalues"], default=0)
