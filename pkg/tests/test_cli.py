import csv
import json

import numpy as np
import pytest

from indiscernible import cli
from indiscernible.certificates import CertificateKind, family_densities, verify_injectivity_sampling
from indiscernible.geometry import Cuboid
from indiscernible.measures import FULL, family_to_json, measure_vector, random_family
from indiscernible.report import BatchRow, emit_plot_data


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_certify_json(capsys):
    code, out, _ = run(capsys, "certify", "--kind", "cuboid-quadratic", "--d", "2", "--pairs", "10000", "--seed", "7")
    doc = json.loads(out)
    assert code == 0 and doc["schema"] == 1
    assert set(doc) >= {"kind", "d", "pairs", "min_gap", "min_ratio", "worst_pair", "seed"}
    assert doc["min_gap"] > 0


def test_certify_is_byte_identical(capsys):
    argv = ("certify", "--kind", "interval-pair", "--d", "1", "--pairs", "500", "--seed", "3")
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_reconstruct_ambiguous(capsys):
    kind = CertificateKind("cuboid-cubic", 2, domain=FULL)
    m = measure_vector(family_densities(kind), Cuboid([-1, 0], [1, 1]))
    code, out, _ = run(capsys, "reconstruct", "--kind", "cuboid-cubic", "--d", "2", "--domain", "full",
                       "--moments", json.dumps(m.tolist()))
    assert code == 4 and json.loads(out)["status"] == "ambiguous"


def test_reconstruct_ok(capsys):
    kind = CertificateKind("cuboid-quadratic", 2)
    m = measure_vector(family_densities(kind), Cuboid([0, 0], [1, 2]))
    code, out, _ = run(capsys, "reconstruct", "--kind", "cuboid-quadratic", "--d", "2", "--moments", json.dumps(m.tolist()))
    doc = json.loads(out)
    assert code == 0 and doc["status"] == "exact"
    np.testing.assert_allclose(doc["shape"]["cuboid"]["hi"], [1, 2], atol=1e-14)


def test_lemma(capsys):
    code, out, _ = run(capsys, "lemma", "--alpha", '{"dim":1,"terms":[{"coeff":1,"exps":[0]}]}',
                       "--support", "[-1,1]", "--m1", "0", "--m2", "0.6666666666666666")
    doc = json.loads(out)
    assert code == 0
    assert doc["a"] == pytest.approx(1.0, abs=1e-15) and doc["b"] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize(
    "argv, field",
    [
        (["certify", "--kind", "cuboid-quadratic"], "d"),
        (["reconstruct", "--kind", "cuboid-quadratic", "--d", "2", "--moments", "[1, 2"], "moments"),
        (["reconstruct", "--kind", "cuboid-quadratic", "--d", "2", "--moments", "[1, 2]"], "moments"),
        (["lemma", "--alpha", '{"dim":1}', "--support", "[-1,1]", "--m1", "0", "--m2", "1"], "alpha"),
        (["lemma", "--alpha", '{"dim":1,"terms":[]}', "--support", "[1]", "--m1", "0", "--m2", "1"], "support"),
        (["search", "/nonexistent.json"], "input"),
        (["certify", "--kind", "interval-pair", "--d", "1", "--pairs", "0"], "pairs"),
    ],
)
def test_invalid_input(capsys, argv, field):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err.count("\n") == 1 and field in err


def _problem_file(tmp_path, fam, **extra):
    path = tmp_path / "problem.json"
    path.write_text(json.dumps({"problem": {"family": "cuboid", "measures": family_to_json(fam)}, **extra}))
    return str(path)


def test_search_found_and_reproducible(capsys, tmp_path):
    path = _problem_file(tmp_path, random_family(2, 3, 3, np.random.default_rng(1)))
    code, out, _ = run(capsys, "search", path, "--seed", "4")
    doc = json.loads(out)
    assert code == 0 and doc["result"]["verified"] and doc["config"]["seed"] == 4
    assert run(capsys, "search", path, "--seed", "4")[1] == out


def test_search_not_found(capsys, tmp_path):
    path = _problem_file(tmp_path, family_densities(CertificateKind("cuboid-quadratic", 2)))
    with pytest.warns(UserWarning):
        code, out, _ = run(capsys, "search", path, "--restarts", "20")
    assert code == 3 and json.loads(out)["result"]["status"] == "not-found"


def test_search_bad_config_field(capsys, tmp_path):
    path = _problem_file(tmp_path, random_family(1, 1, 1, np.random.default_rng(0)), config={"restarts": 3})
    code, _, err = run(capsys, "search", path)
    assert code == 2 and "config" in err


def test_report_from_certify(capsys, tmp_path):
    rep = tmp_path / "cert.json"
    run(capsys, "certify", "--kind", "interval-pair", "--d", "1", "--pairs", "300", "--seed", "2", "--out", str(rep))
    out = tmp_path / "cert.csv"
    assert run(capsys, "report", "--input", str(rep), "--format", "csv", "--out", str(out))[0] == 0
    rows = list(csv.reader(out.read_text().splitlines()))
    assert rows[0] == ["separation", "gap"] and len(rows) == 301
    assert (tmp_path / "cert.png").stat().st_size > 0
    assert b"\r\n" not in out.read_bytes()


def test_phase_change_report(capsys, tmp_path):
    out = tmp_path / "phase.csv"
    code, _, _ = run(capsys, "report", "--d", "2", "--format", "csv", "--out", str(out), "--restarts", "60")
    assert code == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert [r["k"] for r in rows] == ["1", "2", "3", "4"]
    assert [r["status"] for r in rows] == ["found", "found", "found", "not-found"]
    assert (tmp_path / "phase.png").exists()


def test_emit_plot_data_shapes():
    assert emit_plot_data([]) == "k,d,restarts_used,residual,status\n"
    text = emit_plot_data([BatchRow(1, 2, 1, 0.0, "found")])
    assert text.splitlines()[1] == "1,2,1,0.0,found"
    rep = verify_injectivity_sampling(CertificateKind("interval-pair", 1), 3, 0)
    assert len(emit_plot_data(rep).splitlines()) == 4
