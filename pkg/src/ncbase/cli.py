"""Command line interface: load systems, compute norms, run verification suites.

Reports are JSON ({"schema": 1, ...}) and deterministic for a fixed seed and
configuration up to the "timing_s" field.  Exit codes: 0 all checks pass,
1 a check failed, 2 usage or parse error, 3 solver failure.
"""

from __future__ import annotations

import json
import os
import sys
import time

import click
import numpy as np

from . import classical, cones, conic, matcore, ncnorm, opsys, paulsen, sampling

SCHEMA = 1


def _solve_tol(tol: float) -> float:
    override = os.environ.get("NCBASE_SOLVE_TOL")
    return float(override) if override else min(max(tol * 1e-2, 1e-9), 1e-6)


def _validate_config(level_cap: int, tol: float) -> None:
    if not 1 <= level_cap <= 6:
        raise click.UsageError("level cap must lie in [1, 6]")
    if not 1e-10 <= tol <= 1e-3:
        raise click.UsageError("tolerance must lie in [1e-10, 1e-3]")


def _record(name: str, status: str, observed, bound, tolerance) -> dict:
    def num(v):
        v = float(v)
        return v if np.isfinite(v) else repr(v)

    return {
        "name": name,
        "status": status,
        "observed": num(observed),
        "bound": num(bound),
        "tolerance": num(tolerance),
    }


def _emit(report: dict, out: str | None, t0: float) -> None:
    statuses = [r["status"] for r in report.get("records", [])]
    report["overall"] = (
        "fail" if "fail" in statuses else ("indeterminate" if "indeterminate" in statuses else "pass")
    )
    report["timing_s"] = round(time.time() - t0, 3)
    report["solver"] = {"solves": conic.solve_count()}
    text = json.dumps(report, sort_keys=True, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    click.echo(text)
    if report["overall"] == "fail":
        sys.exit(1)


def _load_system(path_or_name: str, d: int, dim: int, seed: int, field: str):
    named = {
        "diag": lambda: sampling.diag_system(d, field),
        "full-matrix": lambda: sampling.full_matrix_system(d, field),
        "random": lambda: sampling.random_system(d, dim, sampling.rng_from_seed(seed), field),
    }
    if path_or_name in named:
        return named[path_or_name]()
    with open(path_or_name) as fh:
        return opsys.system_from_json(json.load(fh))


def _suite_records(suite) -> list[dict]:
    return [
        _record(r.name, r.status, r.observed, r.bound, r.tolerance) for r in suite.records
    ]


@click.group()
def main() -> None:
    """Operator system / nc base norm workbench."""


# ---------------------------------------------------------------------------
# norm
# ---------------------------------------------------------------------------

@main.command("norm")
@click.option("--system", "system_path", required=True, help="system JSON file or diag/full-matrix/random")
@click.option("--element", "element_path", required=True, type=click.Path(exists=True))
@click.option("--dual/--primal", default=False, help="element lives in M_n(S*) (DualCP cone)")
@click.option("--f1", "f1_path", default=None, help="primal base function values JSON (default: normalized trace)")
@click.option("--d", default=2, show_default=True)
@click.option("--dim", default=4, show_default=True)
@click.option("--level-cap", default=4, show_default=True)
@click.option("--tol", default=1e-6, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default=None, type=click.Path())
def cmd_norm(system_path, element_path, dual, f1_path, d, dim, level_cap, tol, seed, out) -> None:
    """Compute the nc base norm of an element (JSON in, JSON report out)."""
    t0 = time.time()
    _validate_config(level_cap, tol)
    try:
        system = _load_system(system_path, d, dim, seed, "C")
        with open(element_path) as fh:
            obj = json.load(fh)
    except (OSError, KeyError, ValueError, opsys.OpsysError, matcore.MatcoreError) as exc:
        raise click.UsageError(f"parse error: {exc}") from exc
    try:
        if dual:
            bs = cones.BaseSpec(cones.DualCP(system, max_level=level_cap))
            x = cones.dual_from_json(system, obj)
            selfadj = cones.dual_is_selfadjoint(x)
        else:
            if f1_path:
                with open(f1_path) as fh:
                    f1_vals = np.asarray(json.load(fh), dtype=complex)
            else:
                f1_vals = np.array([np.trace(b) / system.d for b in system.basis])
            bs = cones.BaseSpec(cones.Inherited(system, max_level=level_cap), f1_vals)
            x = opsys.element_from_json(system, obj)
            selfadj = opsys.is_selfadjoint(x)
        res = (
            ncnorm.nc_base_norm_sa(bs, x, _solve_tol(tol))
            if selfadj
            else ncnorm.nc_base_norm(bs, x, _solve_tol(tol))
        )
    except (cones.Indeterminate, conic.SolverFailure) as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(3)
    f1y = bs.f1_apply(res.witness_pos)
    f1z = bs.f1_apply(res.witness_neg)
    report = {
        "schema": SCHEMA,
        "command": "norm",
        "config": {"system": system_path, "element": element_path, "dual": dual, "tol": tol},
        "value": res.value,
        "witness": {
            "f1_mass_pos": float(np.trace(f1y).real),
            "f1_mass_neg": float(np.trace(f1z).real),
            "residual": res.residual,
        },
        "gap": res.gap,
        "records": [
            _record("witness residual", "pass" if res.residual <= 1e-6 else "fail", res.residual, 1e-6, tol)
        ],
    }
    _emit(report, out, t0)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

@main.command("verify")
@click.argument("suite", type=click.Choice(["duality", "mbos", "bipolar", "paulsen", "complexify", "classical"]))
@click.option("--system", "system_path", default="random", show_default=True)
@click.option("--d", default=2, show_default=True)
@click.option("--dim", default=4, show_default=True)
@click.option("--field", default="C", type=click.Choice(["R", "C"]), show_default=True)
@click.option("--levels", default=2, show_default=True, help="verify matrix levels 1..levels")
@click.option("--samples", default=100, show_default=True)
@click.option("--level-cap", default=4, show_default=True)
@click.option("--tol", default=1e-6, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--v-shape", default="2x2", show_default=True, help="paulsen: operator space shape")
@click.option("--v-dim", default=2, show_default=True, help="paulsen: operator space dimension")
@click.option("--out", default=None, type=click.Path())
def cmd_verify(suite, system_path, d, dim, field, levels, samples, level_cap, tol, seed, v_shape, v_dim, out) -> None:
    """Run a verification suite; exit 0 iff all records pass."""
    t0 = time.time()
    _validate_config(level_cap, tol)
    level_list = tuple(range(1, levels + 1))
    try:
        records = _run_suite(
            suite, system_path, d, dim, field, level_list, samples, level_cap, tol, seed, v_shape, v_dim
        )
    except (cones.Indeterminate, conic.SolverFailure) as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(3)
    except (OSError, ValueError) as exc:
        raise click.UsageError(f"parse error: {exc}") from exc
    report = {
        "schema": SCHEMA,
        "command": f"verify {suite}",
        "config": {
            "system": system_path,
            "d": d,
            "dim": dim,
            "field": field,
            "levels": levels,
            "samples": samples,
            "tol": tol,
            "seed": seed,
        },
        "records": records,
    }
    _emit(report, out, t0)


def _run_suite(suite, system_path, d, dim, field, level_list, samples, level_cap, tol, seed, v_shape, v_dim):
    rng = sampling.rng_from_seed(seed)
    if suite == "duality":
        system = _load_system(system_path, d, dim, seed, field)
        rep = ncnorm.verify_duality(
            system, levels=level_list, samples=samples, tol=max(tol, 1e-5), seed=seed,
            solve_tol=_solve_tol(tol),
        )
        return _suite_records(rep)
    if suite == "mbos":
        system = _load_system(system_path, d, dim, seed, field)
        f1_vals = sampling.random_faithful_state_values(system, rng)
        bs = cones.BaseSpec(cones.Inherited(system, max_level=level_cap), f1_vals)
        rep = ncnorm.mbos_validate(bs, levels=level_list, samples=max(samples // 10, 3), tol=tol, seed=seed)
        recs = _suite_records(rep)
        bs2 = cones.BaseSpec(cones.DualCP(system, max_level=level_cap))
        rep2 = ncnorm.mbos_validate(bs2, levels=level_list, samples=max(samples // 10, 3), tol=tol, seed=seed)
        return recs + [_record("dual " + r["name"], r["status"], r["observed"], r["bound"], r["tolerance"]) for r in _suite_records(rep2)]
    if suite == "bipolar":
        system = _load_system(system_path, d, dim, seed, field)
        provider = cones.Inherited(system, max_level=level_cap)
        elements = [
            sampling.random_selfadjoint_element(system, n, rng)
            for n in level_list
            for _ in range(max(samples // len(level_list), 1))
        ]
        rep = cones.bipolar_check(provider, elements, tol=max(tol, 1e-7))
        return [
            _record(
                f"bipolar level={r.level} #{i}",
                "pass" if r.agree else "fail",
                r.eig_margin - r.dual_margin,
                0.0,
                tol,
            )
            for i, r in enumerate(rep.records)
        ]
    if suite == "paulsen":
        d1, d2 = (int(v) for v in v_shape.split("x"))
        rep_space = (
            paulsen.random_space(d1, d2, v_dim, rng, field)
            if system_path == "random"
            else paulsen.rep_from_json(json.load(open(system_path)))
        )
        ps = paulsen.build_paulsen(rep_space)
        rep = paulsen.verify_equivalence(
            ps, levels=level_list, samples=max(samples // 4, 3), tol=max(tol, 1e-5), seed=seed
        )
        recs = _suite_records(rep)
        recs.append(_record("extremal ratio min", "pass", rep.min_ratio, 0.5, tol))
        recs.append(_record("extremal ratio max", "pass", rep.max_ratio, 4.0, tol))
        agree = 0
        trials = max(samples, 10)
        for _ in range(trials):
            lam = rng.uniform(-0.2, 2.2)
            x = paulsen.v_project(rep_space, rng.normal(size=(d1, d2)) + 1j * rng.normal(size=(d1, d2)))
            x *= rng.uniform(0.1, 1.2)
            formula = paulsen.k1_membership(ps, lam, x, tol=1e-9)
            cand = paulsen.k1_candidate(ps, lam, x)
            amb = matcore.herm(opsys.ambient(cand))
            sdp = matcore.is_psd(amb, tol=1e-9)
            agree += int(formula == sdp)
        recs.append(
            _record("k1 formula agreement", "pass" if agree == trials else "fail", agree, trials, 1e-7)
        )
        return recs
    if suite == "complexify":
        system = _load_system(system_path, d, dim, seed, "R")
        rep = classical.complexify_check(system, samples=max(samples // 4, 5), tol=max(tol, 1e-7), seed=seed)
        return [
            _record(r.name, "pass" if r.ok else "fail", r.observed, r.bound, tol) for r in rep.records
        ]
    if suite == "classical":
        recs = []
        for n in (3, 4, 5):
            sp = classical.simplex_space(n)
            rep = classical.taylor_duality_check(sp, pairs=max(samples // 3, 10), seed=seed + n)
            recs += [
                _record(f"simplex{n} {r.name}", "pass" if r.ok else "fail", r.observed, r.bound, tol)
                for r in rep.records
            ]
            cl = classical.cone_closure_idempotence(sp)
            recs.append(
                _record(
                    f"simplex{n} closure idempotent",
                    "pass" if cl.hull_equal and cl.vertices_matched else "fail",
                    cl.max_defect,
                    tol,
                    tol,
                )
            )
        return recs
    raise click.UsageError(f"unknown suite {suite}")


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

@main.command("gen")
@click.argument("generator", type=click.Choice(["random-system", "paulsen", "diag", "full-matrix"]))
@click.option("--d", default=2, show_default=True)
@click.option("--n", default=2, show_default=True)
@click.option("--dim", default=4, show_default=True)
@click.option("--field", default="C", type=click.Choice(["R", "C"]), show_default=True)
@click.option("--v-shape", default="2x2", show_default=True)
@click.option("--v-dim", default=2, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def cmd_gen(generator, d, n, dim, field, v_shape, v_dim, seed, out) -> None:
    """Write a reproducible (seeded) system JSON file."""
    rng = sampling.rng_from_seed(seed)
    if generator == "diag":
        system = sampling.diag_system(n, field)
    elif generator == "full-matrix":
        system = sampling.full_matrix_system(d, field)
    elif generator == "random-system":
        system = sampling.random_system(d, dim, rng, field)
    else:
        d1, d2 = (int(v) for v in v_shape.split("x"))
        ps = paulsen.build_paulsen(paulsen.random_space(d1, d2, v_dim, rng, field))
        system = ps.system
    with open(out, "w") as fh:
        json.dump(opsys.system_to_json(system), fh, sort_keys=True, indent=2)
        fh.write("\n")
    click.echo(f"wrote {out}")


# ---------------------------------------------------------------------------
# explore (non-gating demonstrations)
# ---------------------------------------------------------------------------

@main.command("explore")
@click.argument("topic", type=click.Choice(["nonadditive"]))
@click.option("--d", default=2, show_default=True)
@click.option("--out", default=None, type=click.Path())
def cmd_explore(topic, d, out) -> None:
    """Numerical demonstrations (report-only, never a gate)."""
    t0 = time.time()
    system = sampling.full_matrix_system(d, "C")
    bs = cones.BaseSpec(cones.DualCP(system))
    rng = sampling.rng_from_seed(0)
    phi1 = sampling.random_state(system, rng)
    phi2 = sampling.random_state(system, rng)
    s = cones.dual_direct_sum(phi1, phi2)
    v1 = ncnorm.nc_base_norm_sa(bs, phi1).value
    v2 = ncnorm.nc_base_norm_sa(bs, phi2).value
    vs = ncnorm.nc_base_norm_sa(bs, s).value
    report = {
        "schema": SCHEMA,
        "command": "explore nonadditive",
        "config": {"d": d},
        "records": [
            _record(
                "direct sum of states is not norm-additive",
                "pass" if vs < v1 + v2 - 0.5 else "fail",
                vs,
                v1 + v2,
                0.0,
            )
        ],
        "values": {"norm_phi1": v1, "norm_phi2": v2, "norm_direct_sum": vs},
    }
    _emit(report, out, t0)


if __name__ == "__main__":
    main()
