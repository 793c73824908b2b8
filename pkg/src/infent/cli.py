"""Batch runner: one subcommand per construction, CSV or JSON output.

Parameters come from built-in defaults, then a TOML config file (``--config``),
then command-line flags, each layer overriding the previous one. Sweeps fan
out over a thread pool and are written back in input order.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from typing import Any, Callable

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from . import bell, bipartite, chain, grid, modular, nopa, operators, weyl
from .errors import InfentError

THREADS_ENV = "INFENT_THREADS"

TOLERANCES = {
    "structural": operators.STRUCT_TOL,
    "spectral": operators.SPECTRAL_TOL,
    "full_rank": modular.FULL_RANK_TOL,
    "centralizer": modular.CENTRALIZER_TOL,
}


class ConfigError(Exception):
    """Invalid command configuration (exit code 2)."""


# ---------------------------------------------------------------- parameters


def _floats(v) -> list[float]:
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    if isinstance(v, (int, float)):
        return [float(v)]
    return [float(x) for x in str(v).split(",") if x.strip()]


def _ints(v) -> list[int]:
    out = []
    for x in _floats(v):
        if x != int(x):
            raise ValueError(f"{x} is not an integer")
        out.append(int(x))
    return out


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


@dataclass(frozen=True)
class Param:
    name: str
    kind: Callable[[Any], Any]
    default: Any
    help: str = ""
    choices: tuple[str, ...] | None = None


@dataclass(frozen=True)
class Command:
    name: str
    help: str
    params: tuple[Param, ...]
    run: Callable[["ExperimentConfig"], list[dict]]
    lam_or_r: bool = False  # exactly one of lam / r may be given


@dataclass
class ExperimentConfig:
    command: str
    params: dict[str, Any]
    out: str | None = None
    format: str = "csv"
    seed: int = 0
    threads: int = 1
    explicit: set[str] = field(default_factory=set)


def _seeds(seed: int, n: int) -> list[np.random.Generator]:
    """Independent generators per sweep item, independent of the worker count."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _pool_map(cfg: ExperimentConfig, fn, items) -> list:
    items = list(items)
    if cfg.threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
        return list(ex.map(fn, items))


def _flatten(chunks: list[list[dict]]) -> list[dict]:
    return [row for chunk in chunks for row in chunk]


def _lam_list(cfg: ExperimentConfig) -> list[tuple[float, float]]:
    """(lam, r) pairs from whichever of lam / r was given."""
    p = cfg.params
    if p.get("r") is not None:
        return [(math.tanh(r), r) for r in p["r"]]
    return [(lam, math.atanh(lam)) for lam in p["lam"]]


# ------------------------------------------------------------------ commands


def run_schmidt(cfg):
    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    d = p["d"]
    state = p["state"]
    if state == "singlet":
        psi = bipartite.singlet()
    elif state == "omega":
        psi = bipartite.max_entangled(d)
    elif state == "product":
        psi = bipartite.random_product_state(d, rng)
    elif state == "random":
        psi = bipartite.BipartitePureState.from_vector(operators.random_vector(d * d, rng), (d, d))
    else:  # nopa
        psi = nopa.nopa_state(nopa.NopaParams.from_lambda(p["lam"], p["trunc"]))
    sd = bipartite.schmidt(psi)
    S = bipartite.entropy(sd)
    return [
        {"n": n, "coefficient": float(c), "probability": float(c * c), "entropy_bits": S}
        for n, c in enumerate(sd.coefficients)
    ]


def run_entropy_divergence(cfg):
    p = cfg.params
    kinds = ["amplitude", "probability"] if p["kind"] == "both" else [p["kind"]]
    items = [(k, N) for k in kinds for N in p["n"]]
    values = _pool_map(cfg, lambda kn: bipartite.entropy(bipartite.divergent_family(kn[1], kn[0])), items)
    rows, prev = [], {}
    for (k, N), S in zip(items, values):
        rows.append({"kind": k, "N": N, "entropy_bits": S, "increasing": k not in prev or S > prev[k]})
        prev[k] = S
    return rows


def run_nogo_bound(cfg):
    p = cfg.params
    ds = p["d"]
    rngs = _seeds(cfg.seed, len(ds))

    def one(i):
        d = ds[i]
        best = bipartite.max_product_fidelity(d, p["samples"], rngs[i], refine=p["refine"])
        return {
            "d": d,
            "samples": p["samples"],
            "max_fidelity": best,
            "bound": 1 / d,
            "within_bound": best <= 1 / d + 1e-9,
            "gap": 1 / d - best,
        }

    return _pool_map(cfg, one, range(len(ds)))


def _bell_state(name: str, d: int, rng, fidelity: float) -> np.ndarray:
    if name == "singlet":
        return bipartite.singlet().density()
    if name == "omega":
        return bipartite.max_entangled(d).density()
    if name == "product":
        return bipartite.random_product_state(d, rng).density()
    if name == "separable":
        w = rng.dirichlet(np.ones(4))
        return sum(wi * bipartite.random_product_state(d, rng).density() for wi in w)
    return bipartite.isotropic_state(fidelity, d)


def run_bell_seesaw(cfg):
    p = cfg.params
    state = p["state"]
    opts = dict(restarts=p["restarts"], seed=cfg.seed, max_iters=p["max_iters"])
    if state == "chain":
        s = chain.ChainState()

        def one(k):
            w = bell.beta_optimize(chain.restrict(s, k), **opts)
            return {"state": state, "d": 2, "pair": k, "beta": w.beta}

        rows = _pool_map(cfg, one, p["pair"])
    else:
        d = 2 if state == "singlet" else p["d"]
        rho = _bell_state(state, d, np.random.default_rng(cfg.seed), p["fidelity"])
        w = bell.beta_optimize(rho, dims=(d, d), **opts)
        rows = [{"state": state, "d": d, "pair": -1, "beta": w.beta}]
    for r in rows:
        r["cirelson"] = bell.CIRELSON
        r["exceeds_local"] = r["beta"] > 1 + 1e-9
    return rows


_CHAIN_OBS = {"zz": operators.SZ, "xx": operators.SX, "yy": operators.SY}


def run_chain_expect(cfg):
    p = cfg.params
    s = chain.ChainState()
    rows = []
    for k in p["pair"]:
        if p["observable"] == "chsh":
            A = bell.test_operator_sequence(k, k)
        else:
            X = _CHAIN_OBS[p["observable"]]
            A = chain.ChainObservable.pair(k, X, X)
        v = chain.expect(s, A)
        rows.append({"pair": k, "observable": p["observable"], "re": v.real, "im": v.imag})
    return rows


def _modular_row(label: str, psi, rng, tol: float) -> dict:
    d = psi.dims[0]
    md = modular.modular_data(psi)
    A = operators.random_unitary(d, rng) + operators.random_hermitian(d, rng)
    lhs = md.apply_S(np.kron(A, np.eye(d)) @ md.omega_vec)
    rhs = np.kron(A.conj().T, np.eye(d)) @ md.omega_vec
    p = np.sort(np.real(np.linalg.eigvalsh(md.rho_A)))
    expected = np.sort(np.outer(p, 1 / p).reshape(-1))
    got = np.linalg.eigvalsh(md.delta)
    route = np.linalg.norm(md.delta - modular.delta_from_tomita(modular.tomita_from_definition(psi)), 2)
    eye = np.eye(d)
    trace_defect = max(
        modular.restricted_commutator_defect(md, np.outer(eye[i], eye[j]), np.outer(eye[j], eye[i]))
        for i in range(d)
        for j in range(d)
    )
    flat = float(np.max(np.abs(p - 1 / d))) <= tol
    identity = float(np.linalg.norm(md.delta - np.eye(d * d), 2)) <= tol
    tracial = trace_defect <= tol
    return {
        "state": label,
        "s_residual": float(np.linalg.norm(lhs - rhs)),
        "delta_spectral_match": float(np.max(np.abs(got - expected) / np.maximum(1, expected))),
        "delta_route_match": float(route),
        "flat_spectrum": flat,
        "delta_identity": identity,
        "trace_property": tracial,
        "equivalent": flat == identity == tracial,
    }


def run_modular(cfg):
    p = cfg.params
    d = p["d"]
    rngs = _seeds(cfg.seed, p["samples"] + 1)

    def one(i):
        if i == 0:
            return _modular_row("omega", bipartite.max_entangled(d), rngs[0], p["tol"])
        v = operators.random_vector(d * d, rngs[i])
        return _modular_row(f"random{i}", bipartite.BipartitePureState.from_vector(v, (d, d)), rngs[i], p["tol"])

    return _pool_map(cfg, one, range(p["samples"] + 1))


def run_doubles(cfg):
    p = cfg.params
    d = p["d"]
    rngs = _seeds(cfg.seed, p["samples"])

    def one(i):
        rng = rngs[i]
        psi = bipartite.BipartitePureState.from_vector(operators.random_vector(d * d, rng), (d, d))
        md = modular.modular_data(psi)
        _, V = np.linalg.eigh(md.rho_A)
        # A centralizer element: diagonal in the eigenbasis of rho_A.
        central = V @ np.diag(rng.normal(size=d) + 1j * rng.normal(size=d)) @ V.conj().T
        generic = operators.random_hermitian(d, rng) + 1j * operators.random_hermitian(d, rng)
        rows = []
        for kind, A in (("central", central), ("generic", generic)):
            comm = float(np.linalg.norm(A @ md.rho_A - md.rho_A @ A, 2))
            B = modular.bob_block(md.conjugate_by_J(np.kron(A.conj().T, np.eye(d))), d)
            defect = max(modular.double_defect(psi, A, B))
            rows.append(
                {
                    "sample": i,
                    "kind": kind,
                    "commutator": comm,
                    "double_defect": defect,
                    "has_double": modular.find_double(md, A, p["tol"]) is not None,
                }
            )
        return rows

    return _flatten(_pool_map(cfg, one, range(p["samples"])))


def run_weyl_projector(cfg):
    def one(d):
        P = weyl.max_ent_projector_weyl(d)
        residual = float(np.max(np.abs(P - bipartite.max_entangled_projector(d))))
        g = weyl.generators(d)
        F = weyl.weyl_fidelity(
            weyl.density_evaluator(bipartite.max_entangled_projector(d)),
            g["u1"], g["v1"], g["u2"], g["v2"], d,
        )
        return {"d": d, "projector_residual": residual, "fidelity_re": F.real, "fidelity_im": F.imag}

    return _pool_map(cfg, one, cfg.params["d"])


def run_nopa_extract(cfg):
    p = cfg.params
    d = p["d"]

    def one(lr):
        lam, r = lr
        params = nopa.NopaParams.from_lambda(lam, p["trunc"])
        rows = []
        for step in range(1, p["iterations"] + 1):
            ex = nopa.extract_qudit(params, d)
            F = nopa.extraction_fidelity(params.lam, d)
            closed = nopa.extraction_fidelity_closed_form(params.lam, d)
            rows.append(
                {
                    "lam": lam,
                    "r": r,
                    "d": d,
                    "step": step,
                    "step_lam": params.lam,
                    "residual": ex.residual,
                    "fidelity": F,
                    "closed_form": closed,
                }
            )
            params = ex.coarse_params
        return rows

    return _flatten(_pool_map(cfg, one, _lam_list(cfg)))


_PERMS = {
    "shift": lambda ell: nopa.shift(ell),
    "even": lambda ell: nopa.v_even(),
    "odd": lambda ell: nopa.v_odd(),
    "swaps": lambda ell: nopa.local_swaps(),
}


def run_nopa_perm(cfg):
    p = cfg.params
    V = _PERMS[p["perm"]](p["ell"])

    def one(lr):
        lam, r = lr
        N = p["trunc"] or nopa.required_trunc(lam, p["tail"])
        defect = nopa.perm_defect(nopa.NopaParams.from_lambda(lam, N), V)
        closed = None
        if p["perm"] == "shift":
            closed = nopa.shift_defect_closed_form(lam, p["ell"])
        elif p["perm"] == "even":
            closed = nopa.even_defect_closed_form(lam)
        bound = nopa.perm_defect_bound(lam, V.ell) if V.ell is not None and lam > 0 else None
        return {"lam": lam, "r": r, "perm": V.name, "trunc": N, "defect": defect, "closed_form": closed, "bound": bound}

    return _pool_map(cfg, one, _lam_list(cfg))


def run_epr_covariance(cfg):
    p = cfg.params

    def one(lr):
        lam, r = lr
        params = nopa.NopaParams.from_lambda(lam, p["trunc"])
        fock = nopa.fock_quadrature_variances(params)
        closed = nopa.epr_covariance(r)
        return {
            "r": r,
            "lam": lam,
            "var_qdiff_closed": closed["var_qdiff"],
            "var_qdiff_fock": fock["var_qdiff"],
            "var_psum_closed": closed["var_psum"],
            "var_psum_fock": fock["var_psum"],
            "tail_weight": params.tail_weight,
            "max_error": max(abs(closed[k] - fock[k]) for k in ("var_qdiff", "var_psum")),
        }

    return _pool_map(cfg, one, _lam_list(cfg))


def run_char_fn(cfg):
    p = cfg.params
    args = (p["xi1"], p["xi2"], p["eta1"], p["eta2"])
    off = nopa.off_subspace_component(*args)

    def one(lr):
        lam, r = lr
        chi = nopa.characteristic_fn(r, *args).real
        bound = math.exp(-math.exp(2 * r) * off * off / 4)
        return {
            "r": r,
            "lam": lam,
            "xi1": args[0],
            "xi2": args[1],
            "eta1": args[2],
            "eta2": args[3],
            "in_subspace": nopa.in_isotropic_subspace(args[:2], args[2:]),
            "off_component": off,
            "chi": chi,
            "off_bound": bound,
            "within_bound": chi <= bound * (1 + 1e-12) + 1e-300,
        }

    return _pool_map(cfg, one, _lam_list(cfg))


def run_grid_extract(cfg):
    p = cfg.params
    d = p["d"]
    if p["adjust"]:
        spec, adj = grid.GridSpec.for_d(d, p["L"], p["X"])
    else:
        spec, adj = grid.GridSpec(p["L"], p["X"]), 0.0
    ops = grid.build_ops(spec, d, p["a"])

    def one(lr):
        lam, r = lr
        st = grid.grid_nopa(spec, lam, p["a"])
        F = weyl.weyl_fidelity(st.expect, ops.U1, ops.V1, ops.U2, ops.V2, d)
        hats = grid.hat_defects(ops, st)
        return {
            "r": r,
            "lam": lam,
            "d": d,
            "L": spec.L,
            "X": spec.X,
            "X_adjustment": adj,
            "fidelity": F.real,
            "commutation_1": grid.commutation_residual(ops, st.psi, spec.dx, 1),
            "commutation_2": grid.commutation_residual(ops, st.psi, spec.dx, 2),
            "u_period_exact": (ops.U1**d).is_identity() and (ops.U2**d).is_identity(),
            "v_period_exact": (ops.V1**d).is_identity() and (ops.V2**d).is_identity(),
            "boundary_mass": st.boundary_mass,
            "flagged": st.flagged,
            "uhat_defect": hats["uhat"],
            "vhat_defect": hats["vhat"],
        }

    return _pool_map(cfg, one, _lam_list(cfg))


_LAM = Param("lam", _floats, None, "Comma-separated lambda values in [0, 1)")
_R = Param("r", _floats, None, "Comma-separated squeezing values r >= 0 (alternative to --lam)")

COMMANDS: dict[str, Command] = {
    c.name: c
    for c in [
        Command(
            "schmidt",
            "Schmidt coefficients and entanglement entropy of a bipartite pure state",
            (
                Param("state", str, "singlet", "", ("singlet", "omega", "nopa", "product", "random")),
                Param("d", int, 2, "Local dimension"),
                Param("lam", float, 0.5, "lambda for --state nopa"),
                Param("trunc", int, 64, "Fock truncation for --state nopa"),
            ),
            run_schmidt,
        ),
        Command(
            "entropy-divergence",
            "Entropy of the truncated slowly decaying family versus N",
            (
                Param("n", _ints, [100, 1000, 10000], "Comma-separated truncations"),
                Param("kind", str, "amplitude", "", ("amplitude", "probability", "both")),
            ),
            run_entropy_divergence,
        ),
        Command(
            "nogo-bound",
            "Largest maximally entangled fraction over random product states",
            (
                Param("d", _ints, [2, 3, 4], "Comma-separated local dimensions"),
                Param("samples", int, 1000, "Product states per dimension"),
                Param("refine", _bool, True, "One alternating step per sample"),
            ),
            run_nogo_bound,
        ),
        Command(
            "bell-seesaw",
            "CHSH value by see-saw optimization",
            (
                Param("state", str, "singlet", "", ("singlet", "omega", "product", "separable", "isotropic", "chain")),
                Param("d", int, 2, "Local dimension"),
                Param("restarts", int, 8, "Random restarts"),
                Param("max_iters", int, 200, "See-saw iterations per start"),
                Param("fidelity", float, 0.9, "Singlet fraction for --state isotropic"),
                Param("pair", _ints, [0, 10, 1000000], "Chain pair indices for --state chain"),
            ),
            run_bell_seesaw,
        ),
        Command(
            "chain-expect",
            "Expectations in the singlet chain",
            (
                Param("pair", _ints, [0, 10, 1000000], "Comma-separated pair indices"),
                Param("observable", str, "chsh", "", ("chsh", "zz", "xx", "yy")),
            ),
            run_chain_expect,
        ),
        Command(
            "modular",
            "Modular operator checks on random full-rank states",
            (
                Param("d", int, 4, "Local dimension"),
                Param("samples", int, 100, "Random states"),
                Param("tol", float, 1e-9, "Equivalence tolerance"),
            ),
            run_modular,
        ),
        Command(
            "doubles",
            "EPR doubles J A^dag J for central and generic observables",
            (
                Param("d", int, 4, "Local dimension"),
                Param("samples", int, 20, "Random states"),
                Param("tol", float, modular.CENTRALIZER_TOL, "Centralizer tolerance"),
            ),
            run_doubles,
        ),
        Command(
            "weyl-projector",
            "Weyl expansion of the maximally entangled projector",
            (Param("d", _ints, [2, 3, 5], "Comma-separated dimensions"),),
            run_weyl_projector,
        ),
        Command(
            "nopa-extract",
            "Qudit extraction from the truncated two-mode squeezed state",
            (
                _LAM, _R,
                Param("d", int, 2, "Qudit dimension"),
                Param("trunc", int, 256, "Fock truncation (multiple of d)"),
                Param("iterations", int, 2, "Successive extractions"),
            ),
            run_nopa_extract,
            lam_or_r=True,
        ),
        Command(
            "nopa-perm",
            "Double defect of permutation isometries",
            (
                _LAM, _R,
                Param("perm", str, "even", "", ("shift", "even", "odd", "swaps")),
                Param("ell", int, 1, "Shift distance"),
                Param("trunc", int, 0, "Fock truncation (0: automatic from --tail)"),
                Param("tail", float, 1e-15, "Dropped tail weight for automatic truncation"),
            ),
            run_nopa_perm,
            lam_or_r=True,
        ),
        Command(
            "epr-covariance",
            "Quadrature variances: closed form versus truncated Fock state",
            (_LAM, _R, Param("trunc", int, 512, "Fock truncation")),
            run_epr_covariance,
            lam_or_r=True,
        ),
        Command(
            "char-fn",
            "Characteristic function at one phase-space point",
            (
                _LAM, _R,
                Param("xi1", float, 1.0), Param("xi2", float, 1.0),
                Param("eta1", float, 0.5), Param("eta2", float, -0.5),
            ),
            run_char_fn,
            lam_or_r=True,
        ),
        Command(
            "grid-extract",
            "Branch-cut qudit extraction on a position grid",
            (
                _LAM, _R,
                Param("d", int, 2, "Qudit dimension"),
                Param("L", int, grid.DEFAULT_L, "Grid points per mode (power of two)"),
                Param("X", float, grid.DEFAULT_X, "Half extent of the grid"),
                Param("a", float, 0.0, "Displacement of mode 2"),
                Param("adjust", _bool, True, "Move X to the nearest extent compatible with d"),
            ),
            run_grid_extract,
            lam_or_r=True,
        ),
    ]
}

_LAM_DEFAULTS = {
    "nopa-extract": ("lam", [0.5, 0.9, 0.99]),
    "nopa-perm": ("lam", [0.9, 0.99, 0.999]),
    "epr-covariance": ("r", [0.0, 1.0, 2.0, 3.0]),
    "char-fn": ("r", [0.0, 1.0, 2.0, 3.0]),
    "grid-extract": ("r", [0.0, 1.0, 2.0, 3.0]),
}

_GLOBAL_KEYS = ("format", "out", "seed", "threads")


# ------------------------------------------------------------- config layer


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be at least 1")
    return n


def load_config_file(path: str, command: str) -> dict[str, Any]:
    """Top-level keys apply to every command; a table named after the command overrides them."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config {path} is not valid TOML: {e}") from None
    merged = {k: v for k, v in data.items() if not isinstance(v, dict)}
    section = data.get(command, {})
    if not isinstance(section, dict):
        raise ConfigError(f"config key {command!r} must be a table")
    merged.update(section)
    file_cmd = merged.pop("command", command)
    if file_cmd != command:
        raise ConfigError(f"config is for command {file_cmd!r}, not {command!r}")
    return merged


def resolve(command: str, flags: dict[str, Any], file_values: dict[str, Any]) -> ExperimentConfig:
    """Merge defaults < file < flags and validate every value."""
    cmd = COMMANDS[command]
    known = {p.name for p in cmd.params} | set(_GLOBAL_KEYS)
    unknown = sorted(set(file_values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
    layered = {**file_values, **{k: v for k, v in flags.items() if v is not None}}

    params: dict[str, Any] = {}
    for p in cmd.params:
        raw = layered.get(p.name, p.default)
        if raw is None:
            params[p.name] = None
            continue
        try:
            value = p.kind(raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid value for {p.name}: {raw!r} ({e})") from None
        if p.choices and value not in p.choices:
            raise ConfigError(f"{p.name} must be one of {', '.join(p.choices)}, got {value!r}")
        params[p.name] = value

    if cmd.lam_or_r:
        if params["lam"] is not None and params["r"] is not None:
            raise ConfigError("give exactly one of lam and r")
        if params["lam"] is None and params["r"] is None:
            key, value = _LAM_DEFAULTS[command]
            params[key] = value
        if params["lam"] is not None and any(not 0 <= x < 1 for x in params["lam"]):
            raise ConfigError("lam values must lie in [0, 1)")
        if params["r"] is not None and any(x < 0 or math.tanh(x) >= 1 for x in params["r"]):
            raise ConfigError("r values must be nonnegative and finite enough that tanh(r) < 1")

    fmt = layered.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    try:
        seed = int(layered.get("seed", 0))
        threads = int(layered["threads"]) if "threads" in layered else default_threads()
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    return ExperimentConfig(command, params, layered.get("out"), fmt, seed, threads, set(flags))


# ------------------------------------------------------------------ output


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, (bool, int, str)) or v is None:
        return v
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return str(v)


def render_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    cols = list(rows[0]) if rows else []
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([_cell(row[c]) for c in cols])
    return buf.getvalue()


def metadata(cfg: ExperimentConfig) -> dict:
    return {
        "library": "infent",
        "version": __version__,
        "command": cfg.command,
        "params": {k: _jsonable(v) for k, v in cfg.params.items()},
        "seed": cfg.seed,
        "tolerances": TOLERANCES,
        "threads": cfg.threads,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def load_schema(name: str = "output.schema.json") -> dict:
    return json.loads(resources.files("infent.schemas").joinpath(name).read_text())


def render_json(cfg: ExperimentConfig, rows: list[dict]) -> str:
    import jsonschema

    doc = {
        "metadata": metadata(cfg),
        "columns": list(rows[0]) if rows else [],
        "data": [{k: _jsonable(v) for k, v in row.items()} for row in rows],
    }
    jsonschema.validate(doc, load_schema())
    return json.dumps(doc, indent=2) + "\n"


def run(cfg: ExperimentConfig) -> list[dict]:
    return COMMANDS[cfg.command].run(cfg)


def write_outputs(cfg: ExperimentConfig, rows: list[dict]) -> None:
    text = render_csv(rows) if cfg.format == "csv" else render_json(cfg, rows)
    if cfg.out is None:
        sys.stdout.write(text)
        return
    with open(cfg.out, "w", newline="") as fh:
        fh.write(text)
    if cfg.format == "csv":
        with open(cfg.out + ".meta.json", "w") as fh:
            json.dump(metadata(cfg), fh, indent=2)
            fh.write("\n")


# ------------------------------------------------------------------- argv


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infent", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"infent {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS.values():
        sp = sub.add_parser(cmd.name, help=cmd.help, description=cmd.help)
        sp.add_argument("--format", choices=("csv", "json"), default=None)
        sp.add_argument("--out", default=None, help="Output path (default: stdout)")
        sp.add_argument("--seed", type=int, default=None, help="Unsigned 64-bit seed (default 0)")
        sp.add_argument("--threads", type=int, default=None, help=f"Worker threads (default ${THREADS_ENV} or 1)")
        sp.add_argument("--config", default=None, help="TOML file with parameter values")
        for p in cmd.params:
            flag = "--" + p.name.replace("_", "-")
            extra = f" (default {p.default})" if p.default is not None else ""
            sp.add_argument(flag, dest=p.name, default=None, choices=p.choices, help=p.help + extra)
    return parser


def _error(kind: str, message: str, command: str | None) -> None:
    sys.stderr.write(json.dumps({"error": {"type": kind, "message": message, "command": command}}) + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        if e.code not in (0, None):
            _error("usage", "invalid command line; see --help", None)
        return int(e.code or 0)
    ns = vars(args)
    command = ns.pop("command")
    config_path = ns.pop("config")
    try:
        file_values = load_config_file(config_path, command) if config_path else {}
        cfg = resolve(command, ns, file_values)
    except ConfigError as e:
        _error("config", str(e), command)
        return 2
    try:
        rows = run(cfg)
        write_outputs(cfg, rows)
    except (InfentError, ValueError) as e:
        _error(type(e).__name__, str(e), command)
        return 1
    except OSError as e:
        _error("io", str(e), command)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
