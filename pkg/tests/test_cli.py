import os
import subprocess
import sys

import pytest

from ngsp.builtin import BuiltinScorerBank
from ngsp.cli import label_color, parse_result, run
from ngsp.guide import format_guide
from ngsp.shapes import load_labels, load_shape

from conftest import G1_TEXT


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data, model = str(root / "data"), str(root / "model.ngsp")
    assert run(["synth", "--count", "40", "--seed", "1", "--out", data]) == 0
    assert run(["train", "--data", data, "--out", model, "--epochs", "100",
                "--negatives-per-positive", "4", "--group-perturbations", "5"]) == 0
    ids = root / "few.txt"
    ids.write_text("toychair_00000\ntoychair_00001\ntoychair_00002\n")
    return root, data, model, str(ids)


def infer_to(pipeline, out, *extra):
    root, data, model, ids = pipeline
    argv = ["infer", "--data", data, "--ids", ids, "--scorer", f"builtin:{model}",
            "--out", str(root / out), "--jobs", "1", *extra]
    assert run(argv) == 0
    return {f: (root / out / f).read_text() for f in sorted(os.listdir(root / out))}


def assignments(results):
    return {k: parse_result(v)[1].labels for k, v in results.items()}


def test_synth_writes_files(pipeline):
    _, data, _, _ = pipeline
    names = os.listdir(data)
    assert "toychair.grammar" in names
    assert sum(n.endswith(".regs") for n in names) == 40
    assert sum(n.endswith(".labels") for n in names) == 40


def test_k1_is_guide_argmax(pipeline):
    _, data, model, _ = pipeline
    res = infer_to(pipeline, "k1", "--k", "1")
    bank = BuiltinScorerBank.load(model)
    for name, labels in assignments(res).items():
        shape = load_shape(os.path.join(data, name.replace(".result", ".regs")))
        assert labels == bank.guide_distribution(shape).argmax().labels


def test_disabling_all_terms_is_no_l(pipeline):
    off = infer_to(pipeline, "off", "--k", "200", "--disable", "geom,layout,region")
    k1 = infer_to(pipeline, "k1b", "--k", "1")
    assert assignments(off) == assignments(k1)


def test_infer_is_deterministic(pipeline):
    a = infer_to(pipeline, "det_a", "--k", "300")
    b = infer_to(pipeline, "det_b", "--k", "300")
    assert a == b
    s1 = infer_to(pipeline, "sto_a", "--k", "50", "--stochastic", "--seed", "3")
    s2 = infer_to(pipeline, "sto_b", "--k", "50", "--stochastic", "--seed", "3")
    assert s1 == s2


def test_result_header(pipeline):
    res = infer_to(pipeline, "hdr", "--k", "20")
    header, labels = parse_result(next(iter(res.values())))
    assert header["k"] == 20
    assert set(header) == {"k", "log_q", "log_geom", "log_layout", "log_region", "log_total"}
    assert len(labels) > 0


def test_evaluate_gt_and_results(pipeline, capsys):
    root, data, _, ids = pipeline
    assert run(["evaluate", "--data", data, "--ids", ids, "--pred", data]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[-1] == "mean_miou\t100"
    infer_to(pipeline, "ev", "--k", "100")
    report = str(root / "report.tsv")
    assert run(["evaluate", "--data", data, "--ids", ids, "--pred", str(root / "ev"),
                "--out", report]) == 0
    text = open(report).read()
    assert text.startswith("label\tintersection\tunion\tiou\n")
    assert 0 <= float(text.splitlines()[-1].split("\t")[1]) <= 100


def test_split_and_make_negatives(pipeline, tmp_path):
    _, data, _, ids = pipeline
    out = tmp_path / "splits"
    assert run(["split", "--data", data, "--out", str(out), "--min-per-set", "10",
                "--max-per-set", "20"]) == 0
    sizes = [len((out / f"{n}.txt").read_text().split()) for n in ("train", "val", "test")]
    assert sizes == [20, 10, 10]
    negs = tmp_path / "negs.tsv"
    assert run(["make-negatives", "--data", data, "--ids", ids, "--kind", "layout",
                "--label", "base", "--per-positive", "3", "--out", str(negs)]) == 0
    rows = [ln.split("\t") for ln in negs.read_text().splitlines()]
    assert sum(r[3] == "positive" for r in rows) == 3
    assert all(r[1] == "base" and r[2] == "layout" for r in rows)


def test_corrupt(pipeline, tmp_path, capsys):
    _, data, _, ids = pipeline
    out = tmp_path / "c2"
    assert run(["corrupt", "--data", data, "--ids", ids, "--level", "2", "--out", str(out)]) == 0
    before = load_shape(os.path.join(data, "toychair_00000.regs"))
    after = load_shape(str(out / "toychair_00000.regs"))
    assert len(after) == 2 * len(before)
    prov = (out / "toychair_00000.prov").read_text().splitlines()
    assert len(prov) == len(after)
    assert run(["evaluate", "--data", str(out), "--ids", ids, "--pred", str(out)]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "mean_miou\t100"


def test_export_colored(pipeline, tmp_path):
    _, data, _, _ = pipeline
    shape = os.path.join(data, "toychair_00000.regs")
    lab = tmp_path / "one.labels"
    n = len(load_shape(shape))
    lab.write_text("".join(f"{i} seat\n" for i in range(n)))
    ply = tmp_path / "one.ply"
    assert run(["export-colored", "--shape", shape, "--labels", str(lab), "--out", str(ply)]) == 0
    lines = ply.read_text().splitlines()
    body = lines[lines.index("end_header") + 1:]
    npts = sum(r.num_points for r in load_shape(shape).regions)
    assert f"element vertex {npts}" in lines
    assert len(body) == npts
    assert {tuple(ln.split()[3:]) for ln in body} == {tuple(str(c) for c in label_color("seat"))}
    # the same label gets the same color on another shape
    other = os.path.join(data, "toychair_00001.regs")
    gt = os.path.join(data, "toychair_00001.labels")
    ply2 = tmp_path / "two.ply"
    assert run(["export-colored", "--shape", other, "--labels", gt, "--out", str(ply2)]) == 0
    labels = load_labels(gt).labels
    lines2 = ply2.read_text().splitlines()
    first_seat = labels.index("seat")
    start = lines2.index("end_header") + 1 + sum(
        r.num_points for r in load_shape(other).regions[:first_seat])
    assert tuple(lines2[start].split()[3:]) == tuple(str(c) for c in label_color("seat"))


def test_exit_codes(pipeline, tmp_path, capsys):
    root, data, model, _ = pipeline
    assert run([]) == 1
    assert run(["frobnicate"]) == 1
    assert run(["infer", "--data", data, "--disable", "colour", "--scorer", f"builtin:{model}"]) == 1
    assert run(["infer", "--data", data, "--k", "0", "--scorer", f"builtin:{model}"]) == 1
    assert run(["infer", "--data", data]) == 1
    bad = tmp_path / "bad.grammar"
    bad.write_text("root: r\nr -> a ; a\n")
    assert run(["parse-grammar", str(bad)]) == 2
    assert run(["evaluate", "--data", str(tmp_path / "nowhere"), "--pred", data]) == 2
    scorer = tmp_path / "fail.py"
    scorer.write_text("import sys\nsys.exit(5)\n")
    guides = tmp_path / "guides"
    guides.mkdir()
    bank = BuiltinScorerBank.load(model)
    shape = load_shape(os.path.join(data, "toychair_00000.regs"))
    (guides / "toychair_00000.guide").write_text(format_guide(bank.guide_distribution(shape)))
    ids = tmp_path / "one.txt"
    ids.write_text("toychair_00000\n")
    code = run(["infer", "--data", data, "--ids", str(ids), "--guide-dir", str(guides), "--k", "5",
                "--scorer", f"external:{sys.executable} {scorer}"])
    assert code == 3
    err = capsys.readouterr().err
    assert "error" in err


def test_parse_grammar_prints_canonical(tmp_path, capsys):
    p = tmp_path / "g.grammar"
    p.write_text(G1_TEXT)
    assert run(["parse-grammar", str(p)]) == 0
    first = capsys.readouterr().out
    p.write_text(first)
    assert run(["parse-grammar", str(p)]) == 0
    assert capsys.readouterr().out == first


def test_console_script_runs(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ngsp.cli", "synth", "--describe"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert '"version": "toychair-1"' in proc.stdout
