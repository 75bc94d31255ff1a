"""
Named models and JSON quantum-model files.

Classical entries are Galerkin truncations of the Langevin generator; quantum
entries are Heisenberg-picture Lindbladians on the KMS space of their
stationary state. Every entry builds a :class:`GeneratorDecomposition`.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass

import numpy as np

from .classical import PotentialSpec, build_langevin
from .hilbert import GeneratorDecomposition, kernel_basis, symmetry_check
from .lifting import php_residual
from .quantum import (
    LindbladModel,
    build_lindblad_heisenberg,
    pauli_operator,
    thermal_qubit,
    two_qubit_lift,
)

DEFAULT_NX = 16
DEFAULT_NV = 16
DEFAULT_NX_PERIODIC = 9


@dataclass(frozen=True)
class ModelParams:
    """Numerical knobs shared by all catalog entries; unused ones are ignored."""

    gamma: float = 1.0
    m: float = 1.0
    amplitude: float = 1.0
    coefficients: tuple | None = None
    nx: int | None = None
    nv: int = DEFAULT_NV


def _nx(p: ModelParams, periodic: bool) -> int:
    if p.nx is not None:
        return p.nx
    return DEFAULT_NX_PERIODIC if periodic else DEFAULT_NX


def _quadratic(p: ModelParams) -> GeneratorDecomposition:
    return build_langevin(PotentialSpec.quadratic(p.m), _nx(p, False), p.nv, p.gamma)


def _periodic_free(p: ModelParams) -> GeneratorDecomposition:
    return build_langevin(PotentialSpec.free_torus(), _nx(p, True), p.nv, p.gamma)


def _periodic_cos(p: ModelParams) -> GeneratorDecomposition:
    return build_langevin(PotentialSpec.cosine(p.amplitude), _nx(p, True), p.nv, p.gamma)


def _periodic(p: ModelParams) -> GeneratorDecomposition:
    if p.coefficients is None:
        raise ValueError("periodic model needs coefficients")
    return build_langevin(PotentialSpec.periodic(p.coefficients), _nx(p, True), p.nv, p.gamma)


CATALOG = {
    "quadratic": ("classical", _quadratic, "Langevin, U = m x^2/2, Hermite x Hermite basis"),
    "periodic-free": ("classical", _periodic_free, "Langevin on the torus, U = 0"),
    "periodic-cos": ("classical", _periodic_cos, "Langevin on the torus, U = amplitude cos x"),
    "periodic": ("classical", _periodic, "Langevin on the torus, U from Fourier coefficients"),
    "thermal-qubit": ("quantum", lambda p: build_lindblad_heisenberg(thermal_qubit(p.gamma)),
                      "qubit with thermal amplitude damping, H = Z/2"),
    "two-qubit": ("quantum", lambda p: build_lindblad_heisenberg(two_qubit_lift(p.gamma)),
                  "H = XX, jumps XI and ZI"),
}
LISTED = ("quadratic", "periodic-free", "periodic-cos", "thermal-qubit", "two-qubit")


def potential_for(name: str, p: ModelParams) -> PotentialSpec:
    """Potential of a classical catalog entry."""
    if name == "quadratic":
        return PotentialSpec.quadratic(p.m)
    if name == "periodic-free":
        return PotentialSpec.free_torus()
    if name == "periodic-cos":
        return PotentialSpec.cosine(p.amplitude)
    if name == "periodic":
        return PotentialSpec.periodic(p.coefficients)
    raise ValueError(f"model {name!r} has no potential")


_INLINE = re.compile(r"^quadratic-m=(?P<m>[-+0-9.eE]+)$")


def resolve_name(name: str, params: ModelParams) -> tuple[str, ModelParams]:
    """Accept inline forms such as ``quadratic-m=0.04``."""
    mt = _INLINE.match(name)
    if mt:
        return "quadratic", ModelParams(**{**params.__dict__, "m": float(mt["m"])})
    return name, params


def load_model(name: str, params: ModelParams | None = None) -> GeneratorDecomposition:
    """Build a catalog model by name or load a JSON quantum-model file by path."""
    params = ModelParams() if params is None else params
    name, params = resolve_name(name, params)
    if name in CATALOG:
        return CATALOG[name][1](params)
    if name.endswith(".json") or os.path.sep in name or os.path.exists(name):
        model = read_model_file(name, gamma=None)
        if params.gamma != 1.0:
            model = LindbladModel(model.hamiltonian, model.jumps, params.gamma, model.name)
        return build_lindblad_heisenberg(model)
    raise ValueError(f"unknown model {name!r}")


def model_kind(name: str) -> str:
    name, _ = resolve_name(name, ModelParams())
    return CATALOG[name][0] if name in CATALOG else "quantum"


# ---- JSON model files ----

def _entry(z) -> complex:
    if isinstance(z, (int, float)):
        return complex(z)
    if isinstance(z, (list, tuple)) and len(z) == 2 and all(isinstance(c, (int, float)) for c in z):
        return complex(z[0], z[1])
    raise ValueError(f"matrix entry must be a number or [re, im], got {z!r}")


def parse_operator(spec, dim: int) -> np.ndarray:
    """Operator from a matrix, a Pauli string, or a ``{pauli: coefficient}`` map."""
    n_qubits = int(round(np.log2(dim))) if dim > 0 else 0
    if isinstance(spec, str):
        if 2**n_qubits != dim:
            raise ValueError("Pauli shorthand needs a qubit dimension")
        return pauli_operator(spec, n_qubits)
    if isinstance(spec, dict):
        if 2**n_qubits != dim:
            raise ValueError("Pauli shorthand needs a qubit dimension")
        out = np.zeros((dim, dim), dtype=complex)
        for label, coef in spec.items():
            out += _entry(coef) * pauli_operator(label, n_qubits)
        return out
    if isinstance(spec, list):
        try:
            a = np.array([[_entry(z) for z in row] for row in spec], dtype=complex)
        except TypeError as exc:
            raise ValueError("matrix must be a list of rows") from exc
        if a.shape != (dim, dim):
            raise ValueError(f"matrix has shape {a.shape}, expected {(dim, dim)}")
        return a
    raise ValueError(f"cannot parse operator {spec!r}")


MODEL_KEYS = {"dim", "H", "jumps", "gamma", "name"}


def model_from_dict(d: dict, gamma: float | None = None) -> LindbladModel:
    unknown = set(d) - MODEL_KEYS
    if unknown:
        raise ValueError(f"unknown model-file keys {sorted(unknown)}")
    for key in ("dim", "H", "jumps"):
        if key not in d:
            raise ValueError(f"model file missing {key!r}")
    dim = d["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ValueError("dim must be a positive integer")
    if not isinstance(d["jumps"], list):
        raise ValueError("jumps must be a list")
    h = parse_operator(d["H"], dim)
    jumps = tuple(parse_operator(j, dim) for j in d["jumps"])
    g = float(d.get("gamma", 1.0)) if gamma is None else gamma
    return LindbladModel(h, jumps, g, name=str(d.get("name", "")))


def model_to_dict(model: LindbladModel) -> dict:
    enc = lambda a: [[[float(z.real), float(z.imag)] for z in row] for row in a]
    return {"dim": model.dim, "H": enc(model.hamiltonian), "jumps": [enc(j) for j in model.jumps],
            "gamma": model.gamma, "name": model.name}


def read_model_file(path: str, gamma: float | None = None) -> LindbladModel:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read model file {path!r}: {exc}") from exc
    if not isinstance(d, dict):
        raise ValueError("model file must hold a JSON object")
    return model_from_dict(d, gamma)


# ---- listing ----

def describe(decomp: GeneratorDecomposition, tol: float = 1e-9) -> dict:
    """Dimensions, kernel sizes and the structural checks satisfied by a decomposition."""
    ker_ls = decomp.ker_basis.shape[1]
    ker_l = kernel_basis(decomp.generator(), tol).shape[1]
    scale = max(decomp.l_a.norm(), 1.0)
    return {
        "dim": decomp.dim,
        "ker_ls": ker_ls,
        "ker_l": ker_l,
        "classification": "coercive" if ker_l == ker_ls else "hypocoercive",
        "l_a_antisymmetric": symmetry_check(decomp.l_a).antisymmetric_residual < 1e-10,
        "l_s_symmetric": symmetry_check(decomp.l_s).symmetric_residual < 1e-10,
        "php_zero": php_residual(decomp) / scale < 1e-10,
    }


def list_models() -> list[dict]:
    out = []
    for name in LISTED:
        kind, build, text = CATALOG[name]
        d = build(ModelParams())
        out.append({"name": name, "kind": kind, "description": text, **describe(d)})
    return out
