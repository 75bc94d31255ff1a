import json

import numpy as np
import pytest

from hypoflow.catalog import (
    LISTED,
    ModelParams,
    describe,
    list_models,
    load_model,
    model_from_dict,
    model_kind,
    model_to_dict,
    parse_operator,
    read_model_file,
    resolve_name,
)
from hypoflow.quantum import PAULI, build_lindblad_heisenberg, thermal_qubit, two_qubit_lift


def test_listing_contents():
    rows = list_models()
    names = {r["name"] for r in rows}
    assert {"quadratic", "periodic-free", "thermal-qubit", "two-qubit"} <= names
    cls = {r["name"]: r["classification"] for r in rows}
    assert cls["thermal-qubit"] == "coercive"
    assert cls["two-qubit"] == "hypocoercive" and cls["quadratic"] == "hypocoercive"
    assert all(r["php_zero"] and r["l_a_antisymmetric"] and r["l_s_symmetric"] for r in rows)
    assert json.loads(json.dumps(rows)) == rows


def test_inline_quadratic_name():
    name, p = resolve_name("quadratic-m=0.04", ModelParams())
    assert name == "quadratic" and p.m == 0.04
    assert model_kind("quadratic-m=0.04") == "classical"
    with pytest.raises(ValueError):
        load_model("no-such-model")


def test_load_catalog_entries():
    for name in LISTED:
        d = load_model(name, ModelParams(nx=5, nv=4))
        assert d.dim > 0
    d = load_model("periodic", ModelParams(coefficients=(0.5, 0, 0.5), nx=5, nv=4))
    assert d.dim == 20


def test_parse_operator_forms():
    x = parse_operator("X", 2)
    assert np.array_equal(x, PAULI["X"])
    assert np.allclose(parse_operator({"XX": 0.5, "ZI": [0, 1]}, 4),
                       0.5 * np.kron(PAULI["X"], PAULI["X"]) + 1j * np.kron(PAULI["Z"], PAULI["I"]))
    assert np.allclose(parse_operator([[0, [0, -1]], [[0, 1], 0]], 2), PAULI["Y"])
    with pytest.raises(ValueError):
        parse_operator([[1, 2]], 2)
    with pytest.raises(ValueError):
        parse_operator("X", 3)


def test_model_file_roundtrip(tmp_path):
    m = two_qubit_lift(0.8)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(model_to_dict(m)))
    back = read_model_file(str(path))
    assert np.allclose(back.hamiltonian, m.hamiltonian) and back.gamma == 0.8
    a = build_lindblad_heisenberg(back).generator().matrix
    b = build_lindblad_heisenberg(m).generator().matrix
    assert np.allclose(a, b)
    d = load_model(str(path))
    assert describe(d)["ker_l"] == 2


def test_model_file_errors(tmp_path):
    with pytest.raises(ValueError, match="unknown"):
        model_from_dict({"dim": 2, "H": "Z", "jumps": ["X"], "extra": 1})
    with pytest.raises(ValueError, match="missing"):
        model_from_dict({"dim": 2, "H": "Z"})
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValueError, match="cannot read"):
        read_model_file(str(bad))


def test_describe_thermal():
    info = describe(build_lindblad_heisenberg(thermal_qubit()))
    assert info["classification"] == "coercive" and info["ker_ls"] == info["ker_l"] == 1
