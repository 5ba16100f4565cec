import csv
import io
import json

import pytest

from culprit.cli import main
from culprit.evaluation import (
    ScenarioParams,
    generate_scenario,
    random_bisection_scenarios,
    write_bisection_scenario,
    write_fixture,
)

pytestmark = pytest.mark.git


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("fx")
    paths = write_fixture(generate_scenario(3, ScenarioParams(n_commits=30)), d / "fx")
    truth = dict(zip(*[line.split("\t") for line in paths["truth"].read_text().splitlines()]))
    return paths, truth


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    return list(csv.reader(io.StringIO(text), delimiter="\t"))


def base_args(paths):
    return ["--repo", paths["repo"], "--coverage", paths["coverage"]]


def test_reduce_report(capsys, fixture_dir):
    paths, truth = fixture_dir
    code, out, err = run_cli(capsys, "reduce", *base_args(paths))
    assert code == 0
    rows = table(out)
    assert rows[0] == ["kind", "key", "value"]
    summary = {k: v for kind, k, v in rows[1:] if kind == "summary"}
    assert summary["C"] == "30"
    assert int(summary["C_BIC"]) == int(summary["C_F"]) - 1
    assert float(summary["ratio_C_F"]) == pytest.approx(int(summary["C_F"]) / 30, abs=1e-6)
    verdicts = {k: v for kind, k, v in rows[1:] if kind == "commit"}
    assert verdicts[truth["comment_only_hash"]] == "SP"
    assert verdicts[truth["bic_hash"]] == "BIC"
    assert "|C|=30" in err


def test_no_stage2_keeps_everything(capsys, fixture_dir):
    paths, _ = fixture_dir
    code, out, _ = run_cli(capsys, "reduce", *base_args(paths), "--no-stage2")
    summary = {k: v for kind, k, v in table(out)[1:] if kind == "summary"}
    assert code == 0 and summary["C_SP"] == "0" and summary["C_BIC"] == summary["C_F"]


def test_score_ranks_bic_first_and_is_deterministic(capsys, fixture_dir, tmp_path):
    paths, truth = fixture_dir
    cache = tmp_path / "evolve.tsv"
    outs = []
    for extra in ([], ["--evolve-cache", cache], ["--evolve-cache", cache, "--jobs", 4]):
        code, out, _ = run_cli(capsys, "score", *base_args(paths), *extra)
        assert code == 0
        outs.append(out)
    assert cache.exists()
    assert outs[0] == outs[1] == outs[2]
    first = table(outs[0])[0]
    assert first[:2] == ["1", truth["bic_hash"]]
    assert truth["comment_only_hash"] not in outs[0]


def test_score_variants(capsys, fixture_dir, tmp_path):
    paths, truth = fixture_dir
    for flags in (["--vote", "raw", "--lambda", "0"], ["--alpha", 1, "--tau", "dense"], ["--aggregate", "max"]):
        code, out, _ = run_cli(capsys, "score", *base_args(paths), *flags)
        assert code == 0 and truth["bic_hash"] in out


def test_score_external(capsys, fixture_dir, tmp_path):
    paths, truth = fixture_dir
    cov = json.loads(paths["coverage"].read_text())
    failing = [t for t in cov["tests"] if t["outcome"] == "FAIL"][0]
    fl = tmp_path / "fl.tsv"
    fl.write_text("".join(f"{c['file']}\t{c['line']}\t-{i}\n" for i, c in enumerate(failing["covered"])))
    code, _, err = run_cli(capsys, "score", *base_args(paths), "--fl", f"external:{fl}")
    assert code == 1 and "negative" in err
    code, out, _ = run_cli(capsys, "score", *base_args(paths), "--fl", f"external:{fl}", "--shift-to-zero")
    assert code == 0 and table(out)[0][1] == truth["bic_hash"]
    code, _, _ = run_cli(capsys, "score", *base_args(paths), "--fl", "dstar")
    assert code == 1


def test_bisect_on_scores(capsys, fixture_dir, tmp_path):
    paths, truth = fixture_dir
    scores = tmp_path / "scores.tsv"
    assert run_cli(capsys, "score", *base_args(paths), "--out", scores)[0] == 0
    code, out, _ = run_cli(capsys, "bisect", "--repo", paths["repo"], "--scores", scores, "--oracle-index", 0)
    rows = dict(r for r in table(out))
    assert code == 0 and rows["bic"] == truth["bic_hash"]


def test_bisect_constant_weights(capsys, scripted_repo, tmp_path):
    hashes = [scripted_repo.commit(f"c{i}", {"f": f"{i}\n"}) for i in range(8)]
    scores = tmp_path / "s.tsv"
    scores.write_text("".join(f"1\t{h}\t1.0\n" for h in hashes))
    code, out, _ = run_cli(capsys, "bisect", "--repo", scripted_repo.path, "--scores", scores, "--oracle-index", 0)
    rows = dict(r for r in table(out))
    assert code == 0 and rows["iterations"] == "3" and rows["bic"] == hashes[-1]
    code, out, _ = run_cli(capsys, "bisect", "--repo", scripted_repo.path, "--standard", "--oracle-index", 7)
    assert code == 0 and dict(table(out))["bic"] == hashes[0]


def test_bisect_run_command(capsys, scripted_repo):
    hashes = [scripted_repo.commit(f"c{i}", {"value": f"{i}\n"}) for i in range(6)]
    # the "bug" appears at value 3
    cmd = "test $(cat value) -lt 3"
    code, out, _ = run_cli(capsys, "bisect", "--repo", scripted_repo.path, "--standard", "--run", cmd)
    assert code == 0 and dict(table(out))["bic"] == hashes[3]


def test_bisect_resume(capsys, scripted_repo, tmp_path):
    hashes = [scripted_repo.commit(f"c{i}", {"f": f"{i}\n"}) for i in range(8)]
    log = tmp_path / "session.log"
    newest = scripted_repo.git("rev-parse", "HEAD").strip()
    log.write_text(f"4\t{hashes[3]}\tgood\n")
    code, out, _ = run_cli(capsys, "bisect", "--repo", scripted_repo.path, "--standard",
                           "--oracle-index", 1, "--resume", log)
    rows = dict(table(out))
    assert code == 0 and rows["bic"] == hashes[6] and rows["iterations"] == "3"
    assert newest == hashes[-1]
    assert len(log.read_text().splitlines()) == 3


def test_bisect_bad_oracle_index(capsys, scripted_repo):
    scripted_repo.commit("c", {"f": "x\n"})
    code, _, err = run_cli(capsys, "bisect", "--repo", scripted_repo.path, "--standard", "--oracle-index", 5)
    assert code == 1 and "outside" in err


def test_eval(capsys, tmp_path):
    p = tmp_path / "r.tsv"
    p.write_text("b1\t1\t5\nb2\t2\t5\nb3\t4\t5\n")
    code, out, _ = run_cli(capsys, "eval", "--ranks", p)
    rows = {r[0]: r[1:] for r in table(out)[1:]}
    assert code == 0 and float(rows["MRR"][0]) == pytest.approx(0.583333, abs=1e-6)
    assert float(rows["MRR"][1]) == pytest.approx(1 / 3)


def test_simulate(capsys, tmp_path):
    for sc in random_bisection_scenarios(0, 4, n_commits=50, n_candidates=10):
        write_bisection_scenario(sc, tmp_path / f"{sc.name}.tsv")
    code, out, _ = run_cli(capsys, "simulate", "--scenarios", tmp_path)
    rows = table(out)
    assert code == 0 and len(rows) == 5 and rows[0][0] == "scenario"
    code, _, _ = run_cli(capsys, "simulate", "--scenarios", tmp_path / "none")
    assert code == 1


def test_generate(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "--seed", 9, "generate", "--out", tmp_path / "g", "--commits", 12)
    assert code == 0 and (tmp_path / "g" / "repo" / ".git").exists()
    code, _, _ = run_cli(capsys, "generate", "--out", tmp_path / "h", "--commits", 3)
    assert code == 1


def test_environment_errors(capsys, tmp_path, fixture_dir):
    paths, _ = fixture_dir
    (tmp_path / "norepo").mkdir()
    code, _, err = run_cli(capsys, "reduce", "--repo", tmp_path / "norepo", "--coverage", paths["coverage"])
    assert code == 2 and "stage 1" in err
    code, _, _ = run_cli(capsys, "reduce", "--repo", paths["repo"], "--coverage", tmp_path / "missing.json")
    assert code == 2


def test_invalid_input(capsys, tmp_path, fixture_dir):
    paths, _ = fixture_dir
    bad = tmp_path / "c.json"
    bad.write_text("{")
    code, _, err = run_cli(capsys, "reduce", "--repo", paths["repo"], "--coverage", bad)
    assert code == 1 and "line 1" in err
