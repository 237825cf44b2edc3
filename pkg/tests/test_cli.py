import json

import pytest

from rotorwalk import experiments
from rotorwalk.cli import main
from rotorwalk.experiments import SpecError, fit_exponent, load_spec, parse_spec, run_experiment
from oracles import brute_W, lattice_in, lattice_out
from rotorwalk.render import PALETTE, RenderError, render_range

EXC = {"experiment": "excursions", "name": "d", "graph": {"kind": "Z2"}, "config": {"kind": "diamond"},
       "excursions": 5, "outputs": {"csv": "d.csv", "ppm": "d.ppm"}}


def write_spec(tmp_path, data, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def read_ppm(raw):
    head, rest = raw.split(b"\n", 1)
    assert head == b"P6"
    dims, rest = rest.split(b"\n", 1)
    w, h = map(int, dims.split())
    maxval, pix = rest.split(b"\n", 1)
    assert maxval == b"255" and len(pix) == 3 * w * h
    return w, h, [[tuple(pix[3 * (r * w + c):3 * (r * w + c) + 3]) for c in range(w)] for r in range(h)]


# ------------------------------------------------------------------ fitting


def test_fit_square():
    f = fit_exponent([(t, t * t) for t in (1, 2, 5, 10, 100)])
    assert f.slope == pytest.approx(2.0, abs=1e-12) and f.r2 == pytest.approx(1.0)


def test_fit_two_thirds():
    f = fit_exponent([(t, t ** (2 / 3)) for t in (10**3, 10**4, 10**5, 10**6)])
    assert abs(f.slope - 2 / 3) <= 1e-6


@pytest.mark.parametrize("bad", [[(1, 1), (2, 0), (3, 3)], [(1, 1), (-2, 2), (3, 3)], [(1, 1), (2, 2)]])
def test_fit_rejects_bad_series(bad):
    with pytest.raises(ValueError):
        fit_exponent(bad)


def test_fit_command(tmp_path, capsys):
    p = tmp_path / "r.csv"
    p.write_text("t,range_size\n" + "".join(f"{t},{t ** 0.5}\n" for t in (4, 16, 64, 256)))
    assert main(["fit", str(p)]) == 0
    assert json.loads(capsys.readouterr().out)["slope"] == pytest.approx(0.5)
    p.write_text("t,range_size\n1,0\n2,1\n3,1\n")
    assert main(["fit", str(p)]) == 1
    assert main(["fit", str(tmp_path / "missing.csv")]) == 1


def test_comb_range_exponent():
    spec = parse_spec({"experiment": "range", "graph": {"kind": "COMB"}, "config": {"kind": "uniform"},
                       "seeds": [0, 1, 2], "steps": 5333333,
                       "checkpoints": [10**4, 3 * 10**4, 10**5, 3 * 10**5, 10**6, 3 * 10**6]})
    rows = run_experiment(spec).rows
    for seed in (0, 1, 2):
        series = [(r["t"], r["range_size"]) for r in rows if r["seed"] == seed]
        assert 0.60 <= fit_exponent(series).slope <= 0.73


# ------------------------------------------------------------------ render


def test_render_empty_window():
    raw = render_range({}, (0, 0, 1, 1))
    assert raw == b"P6\n1 1\n255\n\xff\xff\xff"


def test_render_single_vertex():
    w, h, px = read_ppm(render_range({(0, 0): 1}))
    assert (w, h) == (1, 1) and px[0][0] == PALETTE[0]


def test_render_palette_cycles_and_orientation():
    w, h, px = read_ppm(render_range({(0, 0): 21, (1, 1): 2}))
    assert (w, h) == (2, 2)
    assert px[1][0] == PALETTE[0] and px[0][1] == PALETTE[1] and px[0][0] == (255, 255, 255)


def test_render_refuses_huge_window():
    with pytest.raises(RenderError):
        render_range({}, (0, 0, 20000, 10**4 + 1))


def test_diamond_rings(tmp_path):
    assert main(["render", "--spec", write_spec(tmp_path, EXC), "--out", str(tmp_path)]) == 0
    w, h, px = read_ppm((tmp_path / "d.ppm").read_bytes())
    assert (w, h) == (11, 11)
    for r in range(h):
        for c in range(w):
            x, y = c - 5, 5 - r
            d = abs(x) + abs(y)
            want = (255, 255, 255) if d > 5 else PALETTE[max(d, 1) - 1]
            assert px[r][c] == want


# ---------------------------------------------------------------- commands


def test_run_writes_outputs(tmp_path, capsys):
    spec = write_spec(tmp_path, EXC)
    assert main(["run", "--spec", spec, "--out", str(tmp_path / "o")]) == 0
    csv = (tmp_path / "o" / "d.csv").read_text().splitlines()
    assert csv[0] == "seed,n,T,size_A,incomplete"
    out, into = lattice_out("Z2"), lattice_in("Z2")
    assert [int(r.split(",")[2]) for r in csv[1:]] == [brute_W(out, into, (0, 0), n) for n in range(1, 6)]
    report = json.loads((tmp_path / "o" / "d.json").read_text())
    assert report["spec_hash"] == load_spec(spec).digest()


@pytest.mark.parametrize("data", [
    {**EXC, "name": "u", "config": {"kind": "uniform"}, "seeds": [3]},
    {"experiment": "range", "name": "r", "graph": {"kind": "MANHATTAN"}, "config": {"kind": "uniform"},
     "seeds": [1, 2], "steps": 20000, "checkpoints": [100, 1000]},
    {"experiment": "returns", "name": "m", "graph": {"kind": "FLATTICE"}, "config": {"kind": "uniform"},
     "seeds": [0, 1], "steps": 5000, "checkpoints": [10, 100]},
    {"experiment": "cover", "name": "c", "graph": {"kind": "finite", "battery": True},
     "config": {"kind": "uniform"}, "params": {"count": 12, "seed": 4}},
])
def test_reruns_are_byte_identical(tmp_path, data):
    spec = write_spec(tmp_path, data)
    outs = []
    for k in range(2):
        d = tmp_path / f"o{k}"
        assert main(["run", "--spec", spec, "--out", str(d)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1] and outs[0]


def test_empty_checkpoints_summary_only(tmp_path):
    data = {"experiment": "range", "name": "e", "graph": {"kind": "Z2"}, "config": {"kind": "uniform"},
            "seeds": [0], "steps": 500, "checkpoints": []}
    assert main(["run", "--spec", write_spec(tmp_path, data), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("0,500,")


def test_overrides(tmp_path):
    data = {"experiment": "range", "name": "v", "graph": {"kind": "Z2"}, "config": {"kind": "uniform"},
            "seeds": [0], "steps": 500}
    spec = write_spec(tmp_path, data)
    assert main(["run", "--spec", spec, "--out", str(tmp_path), "--seeds", "3..5", "--budget", "50"]) == 0
    rows = (tmp_path / "v.csv").read_text().splitlines()[1:]
    assert [r.split(",")[:2] for r in rows] == [["3", "50"], ["4", "50"], ["5", "50"]]


def test_world_limit_is_usage_error(tmp_path):
    data = {"experiment": "range", "name": "w", "graph": {"kind": "Z2"}, "config": {"kind": "uniform"},
            "seeds": [0], "steps": 10**5}
    assert main(["run", "--spec", write_spec(tmp_path, data), "--out", str(tmp_path), "--world-limit", "3"]) == 1


def test_validate(tmp_path, capsys):
    assert main(["validate", "--spec", write_spec(tmp_path, EXC)]) == 0
    assert capsys.readouterr().out.startswith("ok excursions ")


@pytest.mark.parametrize("data,field", [
    ({**EXC, "bogus": 1}, "bogus"),
    ({**EXC, "experiment": "nope"}, "experiment"),
    ({**EXC, "config": {"kind": "uniform"}}, "seeds"),
    ({**EXC, "excursions": 0}, "excursions"),
    ({**EXC, "graph": {"kind": "HEX"}}, "graph.kind"),
    ({**EXC, "outputs": {"png": "x"}}, "outputs.png"),
    ({**EXC, "seeds": [1.5]}, "seeds"),
])
def test_bad_specs_name_the_field(tmp_path, capsys, data, field):
    with pytest.raises(SpecError) as err:
        parse_spec(data)
    assert err.value.field == field
    assert main(["validate", "--spec", write_spec(tmp_path, data)]) == 1
    assert field in capsys.readouterr().err


def test_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main(["run", "--spec", "x.json", "--seeds", "5..1"])
    assert e.value.code == 1
    assert main(["run", "--spec", str(tmp_path / "absent.json")]) == 1
    (tmp_path / "bad.json").write_text("{")
    assert main(["run", "--spec", str(tmp_path / "bad.json")]) == 1


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    data = {**EXC, "outputs": {"csv": str(blocker / "x.csv")}}
    assert main(["run", "--spec", write_spec(tmp_path, data)]) == 1


def test_invariant_trip_exits_2(tmp_path, monkeypatch):
    monkeypatch.setattr(experiments, "check_growth_bounds", lambda *a, **k: ["forced failure"])
    data = {"experiment": "range", "name": "x", "graph": {"kind": "Z2"}, "config": {"kind": "uniform"},
            "seeds": [0], "steps": 100}
    assert main(["run", "--spec", write_spec(tmp_path, data), "--out", str(tmp_path)]) == 2
    assert "bounds_ok" in (tmp_path / "x.csv").read_text()


def test_shipped_specs_validate():
    from pathlib import Path
    specs = sorted((Path(__file__).parent.parent / "specs").glob("*.json"))
    assert specs
    for p in specs:
        assert main(["validate", "--spec", str(p)]) == 0
