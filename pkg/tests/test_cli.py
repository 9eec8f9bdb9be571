import json

import pytest

from hyperform.chain_core import load_chain, make_chain, save_chain, validate_chain
from hyperform.cli import parse_kernel, run


@pytest.fixture
def coin(tmp_path):
    path = tmp_path / "coin.json"
    save_chain(make_chain([[0.5, 0.5], [0.5, 0.5]], [0.5, 0.5], reversible=True), path)
    return path


def test_spectrum_of_fair_flip(coin, capsys):
    assert run(["spectrum", "--input", str(coin)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[1].split(",")[2] == "1.0"


def test_validate_flags_bad_row(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"n": 2, "triplets": [[0, 0, 0.9], [1, 1, 1.0]], "pi": [0.5, 0.5]}))
    assert run(["validate", "--input", str(path)]) == 1
    assert "row_stochastic" in capsys.readouterr().err


def test_validate_ok_and_missing_file(coin, tmp_path):
    assert run(["validate", "--input", str(coin)]) == 0
    assert run(["validate", "--input", str(tmp_path / "nope.json")]) == 2


def test_malformed_file_is_structural_error(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text("{not json")
    assert run(["spectrum", "--input", str(path)]) == 2


def test_dirichlet(coin, tmp_path, capsys):
    field = tmp_path / "f.json"
    field.write_text(json.dumps([0.0, 2.0]))
    assert run(["dirichlet", "--input", str(coin), "--field", str(field)]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1.0)
    field.write_text(json.dumps({"values": [1.0]}))
    assert run(["dirichlet", "--input", str(coin), "--field", str(field)]) == 2


def test_discretize_writes_valid_chains(tmp_path):
    out = tmp_path / "mesh"
    assert run(["discretize", "--kernel", "affine-xy", "--per-axis", "8", "--output", str(out)]) == 0
    H = load_chain(out / "H.json")
    assert H.reversible and validate_chain(H).ok and H.n_states == 8
    assert load_chain(out / "G.json").n_states == 8


def test_barbell_then_compare_round_trip(tmp_path, capsys):
    out = tmp_path / "bb"
    assert run(["barbell", "--n", "8", "--flavor", "discrete", "--output", str(out)]) == 0
    header, row = capsys.readouterr().out.splitlines()
    rec = dict(zip(header.split(","), row.split(",")))
    assert float(rec["t_rel"]) <= float(rec["t_rel_bound"])
    from hyperform.benchmarks import iid_chain
    chain = load_chain(out / "chain.json")
    save_chain(iid_chain(chain.stationary), tmp_path / "iid.json")
    argv = ["compare", "--input", str(out / "chain.json"), str(tmp_path / "iid.json"),
            "--family", str(out / "family.json")]
    assert run(argv) == 0
    _, row2 = capsys.readouterr().out.splitlines()
    assert row2.split(",")[0] == rec["B"]


def test_barbell_split_and_continuous(capsys):
    assert run(["barbell", "--n", "4", "--flavor", "split", "--per-axis", "4"]) == 0
    assert capsys.readouterr().out.strip().endswith(",1,pass")
    assert run(["barbell", "--n", "4", "--flavor", "continuous", "--per-axis", "2"]) == 0


def test_converge_is_byte_identical(tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"s{i}.csv"
        assert run(["converge", "--kernel", "affine-xy", "--study", "density", "--per-axis", "4",
                    "--per-axis", "8", "--seed", "7", "--output", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].decode().startswith("per_axis,delta,value,reference,abs_error\n4,")


def test_kernel_specs():
    assert parse_kernel("barbell:4:split").space.n_components == 12
    assert run(["converge", "--kernel", "triangle"]) == 2
    assert run(["converge", "--kernel", "barbell:4:discrete"]) == 2


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as exc:
        run(["frobnicate"])
    assert exc.value.code == 2
