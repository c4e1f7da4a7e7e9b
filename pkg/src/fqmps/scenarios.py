"""Scenario runner: config parsing, execution, and serialization.

Configs are JSON key-value trees validated against the schema below with
strict unknown-key rejection (a typo'd key aborts the run rather than
silently using a default). Every run directory is self-describing:
``metadata.json`` holds the fully resolved config plus timings, the CSVs
carry headers, and the final state lands in a binary checkpoint.

Schema (see also ``configs/`` for worked examples)::

    kind: "dmrg" | "tdvp" | "eos" | "validate" | "bench"
    model:
      t, v: floats            hopping / interaction energy
      sites, particles: ints  L and N (N counts holes in hole mode)
      q_max: int              distance cutoff = physical dimension
      penalty: float|null     constraint penalty (null: default)
      mode: "particle" | "hole"
      projector: "exact" | "truncated"
    dmrg:  max_sweeps, bond_schedule, energy_tol, eig_tol, leakage_alarm,
           mixing_schedule|null, discard_tolerance
    tdvp:  dt, t_final, max_bond, krylov_tol, measure_stride,
           checkpoint_stride, literal_eq8 (unused), q2_domain_wall_split
    eos:   n_min, n_max, method ("ed"|"dmrg"), use_holes_below_half
    output_dir: str
    seed: int
    baseline: "q1" | "q2" | "both"
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import __version__
from .checkpoint import load_state, save_state
from .dmrg import DmrgConfig, dmrg_run
from .eos import eos_maxwell
from .mpo import (
    ModelParams,
    assemble_hamiltonian,
    build_projector_C,
    build_q2_tv,
    energy_offset,
    hole_params,
)
from .mps import entropy_profile, product_state
from .observables import measure_q1, measure_q2
from .oracle import constrained_ed_ground
from .tdvp import TdvpConfig, Trajectory, expand_bond_basis, tdvp_run


class ConfigError(ValueError):
    """Schema violation in a scenario config."""


class NumericError(RuntimeError):
    """A solver failed in a way that invalidates the run."""


@dataclass
class Scenario:
    kind: str
    model: ModelParams
    dmrg: DmrgConfig | None
    tdvp: TdvpConfig | None
    eos: dict | None
    output_dir: str
    seed: int = 1
    baseline: str = "q1"
    checkpoint_stride: int = 0
    raw: dict = field(default_factory=dict)


_MODEL_KEYS = {
    "t": float,
    "v": float,
    "sites": int,
    "particles": int,
    "q_max": int,
    "penalty": (float, type(None)),
    "mode": str,
    "projector": str,
}
_DMRG_KEYS = {
    "max_sweeps": int,
    "bond_schedule": list,
    "mixing_schedule": (list, type(None)),
    "eig_tol": float,
    "energy_tol": float,
    "discard_tolerance": float,
    "leakage_alarm": float,
    "variance": (bool, type(None)),
}
_TDVP_KEYS = {
    "dt": float,
    "t_final": float,
    "max_bond": int,
    "krylov_tol": float,
    "measure_stride": int,
    "expansion_passes": (int, type(None)),
    "checkpoint_stride": int,
}
_EOS_KEYS = {
    "n_min": int,
    "n_max": int,
    "method": str,
    "use_holes_below_half": bool,
    "dmrg": dict,
}
_VALIDATE_KEYS = {"tier": str}
_TOP_KEYS = {
    "kind", "model", "dmrg", "tdvp", "eos", "validate", "output_dir", "seed",
    "baseline",
}


def _check_keys(section: dict, allowed: dict, where: str):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {where}.{key!r}")
    for key, val in section.items():
        want = allowed[key]
        if want is list:
            if not isinstance(val, list):
                raise ConfigError(f"{where}.{key} must be a list")
        elif isinstance(want, tuple):
            if not isinstance(val, want) and not (
                float in want and isinstance(val, int) and not isinstance(val, bool)
            ):
                raise ConfigError(f"{where}.{key} has wrong type {type(val).__name__}")
        elif want is float:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"{where}.{key} must be a number")
        elif want is int:
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"{where}.{key} must be an integer")
        elif not isinstance(val, want):
            raise ConfigError(f"{where}.{key} has wrong type {type(val).__name__}")


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc


def parse_scenario(cfg: dict, output_root: str | None = None) -> Scenario:
    """Validate a config tree and resolve it into a :class:`Scenario`."""
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be an object")
    for key in cfg:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown key {key!r}")
    kind = cfg.get("kind")
    if kind not in ("dmrg", "tdvp", "eos", "validate", "bench"):
        raise ConfigError(f"kind must be dmrg/tdvp/eos/validate/bench, got {kind!r}")
    model_cfg = cfg.get("model", {})
    _check_keys(model_cfg, _MODEL_KEYS, "model")
    try:
        model = ModelParams(**model_cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc

    dmrg_cfg = None
    if "dmrg" in cfg and cfg["dmrg"] is not None:
        _check_keys(cfg["dmrg"], _DMRG_KEYS, "dmrg")
        section = dict(cfg["dmrg"])
        if "bond_schedule" in section:
            section["bond_schedule"] = tuple(section["bond_schedule"])
        if section.get("mixing_schedule") is not None:
            section["mixing_schedule"] = tuple(section["mixing_schedule"])
        try:
            dmrg_cfg = DmrgConfig(**section)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"dmrg: {exc}") from exc

    tdvp_cfg = None
    checkpoint_stride = 0
    if "tdvp" in cfg and cfg["tdvp"] is not None:
        _check_keys(cfg["tdvp"], _TDVP_KEYS, "tdvp")
        section = dict(cfg["tdvp"])
        checkpoint_stride = int(section.pop("checkpoint_stride", 0))
        try:
            tdvp_cfg = TdvpConfig(**section)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"tdvp: {exc}") from exc

    eos_cfg = None
    if "eos" in cfg and cfg["eos"] is not None:
        _check_keys(cfg["eos"], _EOS_KEYS, "eos")
        eos_cfg = dict(cfg["eos"])
    if "validate" in cfg and cfg["validate"] is not None:
        _check_keys(cfg["validate"], _VALIDATE_KEYS, "validate")
        if cfg["validate"].get("tier", "quick") not in ("quick", "full"):
            raise ConfigError("validate.tier must be quick or full")

    if kind == "dmrg" and dmrg_cfg is None:
        dmrg_cfg = DmrgConfig()
    if kind == "tdvp" and tdvp_cfg is None:
        raise ConfigError("tdvp scenarios need a tdvp section")
    if kind == "eos" and eos_cfg is None:
        raise ConfigError("eos scenarios need an eos section")

    output_dir = cfg.get("output_dir", "runs/run")
    if output_root:
        output_dir = os.path.join(output_root, output_dir)
    baseline = cfg.get("baseline", "q1")
    if baseline not in ("q1", "q2", "both"):
        raise ConfigError(f"baseline must be q1/q2/both, got {baseline!r}")
    seed = cfg.get("seed", 1)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    return Scenario(
        kind=kind,
        model=model,
        dmrg=dmrg_cfg,
        tdvp=tdvp_cfg,
        eos=eos_cfg,
        output_dir=output_dir,
        seed=seed,
        baseline=baseline,
        checkpoint_stride=checkpoint_stride,
        raw=cfg,
    )


# ---------------------------------------------------------------------------
# serialization helpers


def format_float(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(path, header: list[str], rows):
    """Atomic CSV write; floats use shortest round-trip formatting."""
    tmp = str(path) + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_float(x) for x in row) + "\n")
    os.replace(tmp, path)


def write_json(path, payload: dict):
    tmp = str(path) + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    os.replace(tmp, path)


def _json_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _metadata(scenario: Scenario, started: float, extra: dict) -> dict:
    return {
        "code_version": __version__,
        "kind": scenario.kind,
        "config": scenario.raw,
        "resolved": {
            "model": asdict(scenario.model),
            "penalty_resolved": scenario.model.lam,
            "energy_offset": energy_offset(scenario.model),
            "dmrg": asdict(scenario.dmrg) if scenario.dmrg else None,
            "tdvp": asdict(scenario.tdvp) if scenario.tdvp else None,
            "eos": scenario.eos,
            "baseline": scenario.baseline,
            "seed": scenario.seed,
        },
        "wall_seconds": time.time() - started,
        **extra,
    }


# ---------------------------------------------------------------------------
# initial states


def initial_distance_values(params: ModelParams) -> list[int]:
    """Uniform-as-possible ordered configuration inside the box."""
    length, n = params.sites, params.particles
    if 2 * n == length:
        return [1] + [2] * (n - 1)
    xs = [round(k * (length + 1) / (n + 1)) for k in range(1, n + 1)]
    for i in range(n):  # enforce strict ordering after rounding
        if i == 0:
            xs[i] = max(1, xs[i])
        else:
            xs[i] = max(xs[i - 1] + 1, xs[i])
    while xs[-1] > length:
        for i in range(n - 1, -1, -1):
            lo = 1 if i == 0 else xs[i - 1] + 1
            if xs[i] > lo:
                xs[i] -= 1
                break
    qs = [xs[0]] + [xs[i] - xs[i - 1] for i in range(1, n)]
    return [min(q, params.q_max) for q in qs]


def domain_wall_values(params: ModelParams) -> list[int]:
    return [1] * params.particles


# ---------------------------------------------------------------------------
# scenario execution


def run_scenario(scenario: Scenario, progress=None) -> dict:
    os.makedirs(scenario.output_dir, exist_ok=True)
    started = time.time()
    if scenario.kind == "dmrg":
        extra = _run_dmrg(scenario, progress)
    elif scenario.kind == "tdvp":
        extra = _run_tdvp(scenario, progress)
    elif scenario.kind == "eos":
        extra = _run_eos(scenario, progress)
    elif scenario.kind == "bench":
        extra = _run_bench(scenario)
    elif scenario.kind == "validate":
        from .validate import validate_suite

        tier = scenario.raw.get("validate", {}).get("tier", "quick")
        report = validate_suite(tier)
        write_json(os.path.join(scenario.output_dir, "validation.json"), report)
        extra = {"results": {"passed": report["passed"], "tier": tier}}
    else:
        raise ConfigError(f"kind {scenario.kind!r} is not runnable here")
    meta = _metadata(scenario, started, extra)
    write_json(os.path.join(scenario.output_dir, "metadata.json"), meta)
    return meta


def _run_dmrg(scenario: Scenario, progress=None) -> dict:
    out = scenario.output_dir
    results = {}
    if scenario.baseline in ("q1", "both"):
        params = scenario.model
        h = assemble_hamiltonian(params)
        psi0 = product_state(initial_distance_values(params), params.q_max)
        leak_op = build_projector_C(replace(params, projector="exact"))
        gs, reports = dmrg_run(h, psi0, scenario.dmrg, leakage_op=leak_op,
                               progress=progress)
        rows = [
            (r.sweep, r.direction, format_float(r.energy), r.max_bond,
             format_float(r.max_discarded), format_float(r.leakage),
             format_float(r.variance), format_float(r.seconds), r.warning or "")
            for r in reports
        ]
        write_csv(
            os.path.join(out, "sweeps.csv"),
            ["sweep", "direction", "energy", "max_bond", "max_discarded",
             "leakage", "variance", "seconds", "warning"],
            rows,
        )
        entropies = entropy_profile(gs)
        write_csv(
            os.path.join(out, "entropy.csv"),
            ["bond", "entropy"],
            [(i + 1, format_float(float(s))) for i, s in enumerate(entropies)],
        )
        obs = measure_q1(gs, params)
        write_csv(
            os.path.join(out, "occupation.csv"),
            ["site", "density"],
            [(x + 1, format_float(float(v))) for x, v in enumerate(obs["occupation"])],
        )
        save_state(
            os.path.join(out, "final_state.ckpt"), gs, params,
            extra={"kind": "dmrg", "energy": reports[-1].energy,
                   "seed": scenario.seed},
        )
        results["q1"] = {
            "energy": reports[-1].energy,
            "energy_particle_sector": reports[-1].energy + energy_offset(scenario.model),
            "leakage": reports[-1].leakage,
            "sweeps": len(reports),
            "max_entropy": float(entropies.max()) if entropies.size else 0.0,
        }
    if scenario.baseline in ("q2", "both"):
        params = scenario.model
        h2 = build_q2_tv(params)
        psi0 = product_state(_q2_spread_values(params), 2)
        gs2, reports2 = dmrg_run(h2, psi0, scenario.dmrg)
        write_csv(
            os.path.join(out, "sweeps_q2.csv"),
            ["sweep", "direction", "energy", "max_bond", "max_discarded",
             "seconds"],
            [(r.sweep, r.direction, format_float(r.energy), r.max_bond,
              format_float(r.max_discarded), format_float(r.seconds))
             for r in reports2],
        )
        ent2 = entropy_profile(gs2)
        write_csv(
            os.path.join(out, "entropy_q2.csv"),
            ["bond", "entropy"],
            [(i + 1, format_float(float(s))) for i, s in enumerate(ent2)],
        )
        results["q2"] = {
            "energy": reports2[-1].energy,
            "sweeps": len(reports2),
            "max_entropy": float(ent2.max()) if ent2.size else 0.0,
        }
    return {"results": results}


def _q2_spread_values(params: ModelParams) -> list[int]:
    """Occupation-basis starting state with evenly spread particles."""
    vals = [1] * params.sites
    x = 0
    for q in initial_distance_values(params):
        x += q
        vals[x - 1] = 2
    return vals


def _run_tdvp(scenario: Scenario, progress=None) -> dict:
    out = scenario.output_dir
    results = {}
    if scenario.baseline in ("q1", "both"):
        results["q1"] = _run_tdvp_q1(scenario, os.path.join(out), "")
    if scenario.baseline in ("q2", "both"):
        results["q2"] = _run_tdvp_q2(scenario, os.path.join(out), "_q2")
    return {"results": results}


def _trajectory_rows(traj: Trajectory):
    rows = []
    for i, t in enumerate(traj.times):
        rows.append(
            (
                format_float(t),
                format_float(traj.energies[i]),
                format_float(traj.norms[i]),
                format_float(
                    float(np.max(traj.entropy_profiles[i]))
                    if len(traj.entropy_profiles[i])
                    else 0.0
                ),
                format_float(traj.leakages[i]),
                format_float(traj.max_discarded[i]),
            )
        )
    return rows


def _write_trajectory(out, suffix, traj: Trajectory, sites: int):
    write_csv(
        os.path.join(out, f"trajectory{suffix}.csv"),
        ["time", "energy", "norm", "max_entropy", "leakage", "max_discarded"],
        _trajectory_rows(traj),
    )
    ent_rows = []
    for t, prof in zip(traj.times, traj.entropy_profiles):
        for b, s in enumerate(prof):
            ent_rows.append((format_float(t), b + 1, format_float(float(s))))
    write_csv(
        os.path.join(out, f"entropy{suffix}.csv"),
        ["time", "bond", "entropy"], ent_rows,
    )
    occ_rows = []
    for t, occ in zip(traj.times, traj.occupations):
        if occ is None:
            continue
        for x, v in enumerate(occ):
            occ_rows.append((format_float(t), x + 1, format_float(float(v))))
    write_csv(
        os.path.join(out, f"occupation{suffix}.csv"),
        ["time", "site", "density"], occ_rows,
    )
    q_rows = []
    for t, prof in zip(traj.times, traj.q_profiles):
        if prof is None:
            continue
        for n, v in enumerate(prof):
            q_rows.append((format_float(t), n + 1, format_float(float(v))))
    write_csv(
        os.path.join(out, f"distances{suffix}.csv"),
        ["time", "particle", "mean_distance"], q_rows,
    )


def _run_tdvp_q1(scenario: Scenario, out: str, suffix: str,
                 resume_from: tuple | None = None) -> dict:
    params = scenario.model
    cfg = scenario.tdvp
    h = assemble_hamiltonian(params)

    def observer(t, state):
        return measure_q1(state, params)

    if resume_from is None:
        psi0 = product_state(domain_wall_values(params), params.q_max).astype(complex)
        psi0 = expand_bond_basis(h, psi0, cfg.max_bond, cfg.expansion_passes)
        start_time = 0.0
    else:
        psi0, start_time = resume_from
    ckpt_path = os.path.join(out, f"final_state{suffix}.ckpt")
    stride_ckpt = scenario.checkpoint_stride
    seen = [0]

    def observer_with_ckpt(t, state):
        seen[0] += 1
        if stride_ckpt and seen[0] % stride_ckpt == 0:
            save_state(
                os.path.join(out, f"checkpoint{suffix}.ckpt"), state, params,
                extra={"kind": "tdvp", "time": t, "seed": scenario.seed},
            )
        return observer(t, state)

    traj = tdvp_run(h, psi0, cfg, observer=observer_with_ckpt,
                    start_time=start_time)
    _write_trajectory(out, suffix, traj, params.sites)
    save_state(
        ckpt_path, traj.final_state, params,
        extra={"kind": "tdvp", "time": traj.times[-1], "seed": scenario.seed},
    )
    return {
        "final_time": traj.times[-1],
        "final_energy": traj.energies[-1],
        "max_entropy": float(max(np.max(p) if len(p) else 0.0
                                 for p in traj.entropy_profiles)),
        "final_leakage": traj.leakages[-1],
        "norm_drift": float(abs(np.asarray(traj.norms) - 1.0).max()),
        "warnings": traj.warnings,
    }


def _run_tdvp_q2(scenario: Scenario, out: str, suffix: str) -> dict:
    params = scenario.model
    cfg = scenario.tdvp
    h = build_q2_tv(params)
    filled = [2] * params.particles + [1] * (params.sites - params.particles)
    psi0 = product_state(filled, 2).astype(complex)
    psi0 = expand_bond_basis(h, psi0, cfg.max_bond, cfg.expansion_passes)

    def observer(t, state):
        return measure_q2(state)

    traj = tdvp_run(h, psi0, cfg, observer=observer)
    _write_trajectory(out, suffix, traj, params.sites)
    save_state(
        os.path.join(out, f"final_state{suffix}.ckpt"), traj.final_state, params,
        extra={"kind": "tdvp_q2", "time": traj.times[-1], "seed": scenario.seed},
    )
    return {
        "final_time": traj.times[-1],
        "final_energy": traj.energies[-1],
        "max_entropy": float(max(np.max(p) if len(p) else 0.0
                                 for p in traj.entropy_profiles)),
        "norm_drift": float(abs(np.asarray(traj.norms) - 1.0).max()),
    }


def resume_tdvp(checkpoint_path: str, scenario: Scenario) -> dict:
    """Continue a TDVP run from its checkpoint up to the configured t_final."""
    state, params, extra = load_state(checkpoint_path)
    if extra.get("kind") not in ("tdvp", "tdvp_q2"):
        raise ConfigError(f"{checkpoint_path} is not a tdvp checkpoint")
    start_time = float(extra.get("time", 0.0))
    os.makedirs(scenario.output_dir, exist_ok=True)
    started = time.time()
    results = _run_tdvp_q1(
        scenario, scenario.output_dir, "_resumed", resume_from=(state, start_time)
    )
    meta = _metadata(scenario, started, {"results": {"resumed": results}})
    write_json(os.path.join(scenario.output_dir, "metadata.json"), meta)
    return meta


def _single_energy(params: ModelParams, dmrg_cfg: DmrgConfig, method: str) -> float:
    if method == "ed":
        energy, _, _ = constrained_ed_ground(params)
        return energy + energy_offset(params)
    h = assemble_hamiltonian(params)
    psi0 = product_state(initial_distance_values(params), params.q_max)
    leak_op = build_projector_C(replace(params, projector="exact"))
    _, reports = dmrg_run(h, psi0, dmrg_cfg, leakage_op=leak_op)
    return reports[-1].energy + energy_offset(params)


def _run_eos(scenario: Scenario, progress=None) -> dict:
    eos_cfg = scenario.eos
    method = eos_cfg.get("method", "ed")
    n_min, n_max = int(eos_cfg["n_min"]), int(eos_cfg["n_max"])
    use_holes = bool(eos_cfg.get("use_holes_below_half", False))
    base = scenario.model
    dmrg_cfg = scenario.dmrg or DmrgConfig()
    if "dmrg" in eos_cfg:
        dmrg_cfg = DmrgConfig(**{
            **(asdict(scenario.dmrg) if scenario.dmrg else {}),
            **eos_cfg["dmrg"],
        })
    jobs = []
    for n in range(n_min, n_max + 1):
        params = replace(base, particles=n, mode="particle")
        # low filling means long distances: the hole picture keeps q small
        if use_holes and n < base.sites // 2 and base.sites - n >= 1:
            params, _ = hole_params(params)
        jobs.append((n, params))
    workers = int(os.environ.get("FQMPS_WORKERS", "1"))
    energies = {}
    pictures = {}
    if workers > 1:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {
                pool.submit(_single_energy, params, dmrg_cfg, method): n
                for n, params in jobs
            }
            for fut in concurrent.futures.as_completed(futs):
                energies[futs[fut]] = fut.result()
    else:
        for n, params in jobs:
            energies[n] = _single_energy(params, dmrg_cfg, method)
            if progress:
                progress(f"E({n}) = {energies[n]:.10f}")
    for n, params in jobs:
        pictures[n] = params.mode
    table = eos_maxwell(energies, base.sites)
    out = scenario.output_dir
    write_csv(
        os.path.join(out, "eos.csv"),
        ["n", "density", "energy", "picture", "on_hull", "mu_lo", "mu_hi"],
        [
            (r.n, format_float(r.n / base.sites), format_float(r.energy),
             pictures[r.n], int(r.on_hull), format_float(r.mu_lo),
             format_float(r.mu_hi))
            for r in table.rows
        ],
    )
    gap = table.charge_gap(base.sites // 2)
    return {
        "results": {
            "energies": {str(n): e for n, e in sorted(energies.items())},
            "half_filling_gap": gap,
            "hull": table.hull_n,
        }
    }


def _run_bench(scenario: Scenario) -> dict:
    """Kernel micro-benchmarks (factorizations at solver-typical shapes)."""
    rng = np.random.default_rng(scenario.seed)
    sizes = [(64, 10, 64), (128, 10, 128)]
    rows = []
    for dl, d, dr in sizes:
        a = rng.standard_normal((dl * d, dr))
        t0 = time.perf_counter()
        for _ in range(5):
            np.linalg.qr(a)
        rows.append((f"qr_{dl}x{d}x{dr}", format_float((time.perf_counter() - t0) / 5)))
        t0 = time.perf_counter()
        for _ in range(3):
            np.linalg.svd(a, full_matrices=False)
        rows.append((f"svd_{dl}x{d}x{dr}", format_float((time.perf_counter() - t0) / 3)))
    write_csv(os.path.join(scenario.output_dir, "bench.csv"),
              ["kernel", "seconds"], rows)
    return {"results": {"kernels": len(rows)}}
