"""The executable property suite behind the ``verify`` subcommand.

Every check quantifies one contract over the worked fixtures plus a batch of
seeded instances; failures carry the canonical JSON of the offending instance
so a run can be replayed.  Output is fully deterministic for a fixed argument
set: no timings, no environment data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import generators, io, lattice
from .embedding import (
    CarlesonData,
    carleson_condition_constant,
    disjointness_inequality,
    embedding_ratio_search,
    stopping_embedding_report,
)
from .forms import (
    Instance,
    apply_adjoint_operator,
    apply_box_operator,
    lambda_form,
    lambda_form_local,
    phi_identity_check,
    test_function,
)
from .measures import (
    conjugate,
    ksum,
    lp_norm,
    mass,
    mixed_norm,
    average,
    box_integral,
    cube_integral,
)
from .normest import (
    alternating_maximization,
    best_f_given_g,
    best_g_given_f,
    spectral_oracle_p2,
    testing_norm_ratios,
)
from .stopping import (
    build_average_family,
    build_ratio_family,
    carleson_constant,
    child_mass_bound,
    collapse_atom_function,
    collapse_scale_function,
    default_ratio_constants,
    project,
    subfamily_mass_bound,
)
from .testing_constants import testing_report


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    counterexample: str | None = None


class _Suite:
    def __init__(self, seed: int, instances: int, p: float, dimension: int, depth: int,
                 restarts: int, tol: float):
        self.seed = seed
        self.p = p
        self.dimension = dimension
        self.depth = depth
        self.restarts = restarts
        self.tol = tol
        self.instances = [
            generators.generate(
                generators.GenSpec(seed=seed + k, dimension=dimension, depth=depth, p=p)
            )
            for k in range(instances)
        ]
        worked = generators.worked_instances()
        self.fixtures = [worked["w1"], worked["w2"]]
        self.results: list[CheckResult] = []

    # every instance paired with a reproducible (f, g) draw
    def draws(self):
        for k, inst in enumerate(self.instances):
            f = generators.random_scale_function(inst.sys, self.seed + k)
            g = generators.random_atom_function(inst.sys, self.seed + k)
            yield inst, f, g

    def record(self, name: str, failures: list[tuple[Instance | None, str]], checked: int):
        if failures:
            inst, detail = failures[0]
            ce = io.canonical_bytes(inst).decode() if inst is not None else None
            self.results.append(CheckResult(name, False, f"{len(failures)}/{checked} failed: {detail}", ce))
        else:
            self.results.append(CheckResult(name, True, f"checked={checked}"))


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b), 1e-300)
    return abs(a - b) / scale


def run_suite(
    seed: int = 1,
    instances: int = 50,
    p: float = 2.0,
    dimension: int = 1,
    depth: int = 3,
    restarts: int = 4,
    tol: float = 1e-10,
) -> tuple[list[CheckResult], bool]:
    s = _Suite(seed, instances, p, dimension, depth, restarts, tol)
    _check_lattice(s)
    _check_measures(s)
    _check_forms(s)
    _check_testing(s)
    _check_stopping(s)
    _check_embedding(s)
    _check_normest(s)
    _check_io(s)
    ok = all(r.passed for r in s.results)
    return s.results, ok


def _check_lattice(s: _Suite):
    fails, checked = [], 0
    sys = s.instances[0].sys if s.instances else generators.worked_instances()["w1"].sys
    for lin in range(sys.num_cubes):
        cube = sys.cube_at(lin)
        box = lattice.box_members(sys, cube)
        own = {(int(a), cube.level) for a in sys.atoms_of(cube)}
        rest = set()
        for child in lattice.children(sys, cube):
            rest |= lattice.box_members(sys, child)
        checked += 1
        if box != own | rest or own & rest:
            fails.append((None, f"box partition broken at {cube}"))
    s.record("lattice-box-partition", fails, checked)

    fails, checked = [], 0
    rng = np.random.Generator(np.random.Philox(key=[s.seed, 100]))
    for _ in range(50):
        a = int(rng.integers(sys.num_atoms))
        chain = [sys.cube_at(lin) for lin in range(sys.num_cubes) if sys.contains(sys.cube_at(lin), a)]
        checked += 1
        ordered = all(
            set(sys.atoms_of(chain[i + 1])) <= set(sys.atoms_of(chain[i]))
            for i in range(len(chain) - 1)
        )
        if len(chain) != sys.num_levels or not ordered:
            fails.append((None, f"containment chain broken at atom {a}"))
    s.record("lattice-chain-property", fails, checked)


def _check_measures(s: _Suite):
    fails, checked = [], 0
    for k, (inst, f, g) in enumerate(s.draws()):
        f2 = generators.random_scale_function(inst.sys, s.seed + 7 + k, stream=21)
        n1 = mixed_norm(f, inst.sigma, inst.p)
        n2 = mixed_norm(f2, inst.sigma, inst.p)
        nsum = mixed_norm(f + f2, inst.sigma, inst.p)
        hom = mixed_norm(3.0 * f, inst.sigma, inst.p)
        checked += 1
        if nsum > (n1 + n2) * (1 + 1e-12) or _rel(hom, 3.0 * n1) > 1e-12:
            fails.append((inst, "triangle/homogeneity violated"))
    s.record("mixed-norm-triangle-homogeneity", fails, checked)

    fails, checked = [], 0
    for inst, f, g in s.draws():
        sys = inst.sys
        for lin in range(0, sys.num_cubes, max(1, sys.num_cubes // 8)):
            cube = sys.cube_at(lin)
            bm = sys.box_mask(cube)
            lhs = box_integral(sys, f, inst.mu, inst.sigma, cube)
            rhs = mixed_norm(f * bm, inst.sigma, inst.p) * mixed_norm(
                inst.mu * bm, inst.sigma, conjugate(inst.p)
            )
            checked += 1
            if lhs > rhs * (1 + 1e-12):
                fails.append((inst, f"Hoelder violated at {cube}"))
    s.record("box-integral-hoelder", fails, checked)

    fails, checked = [], 0
    for inst, f, g in s.draws():
        sys = inst.sys
        cube = sys.root
        avg = average(sys, g, inst.omega, cube)
        checked += 1
        if avg > g.max() * (1 + 1e-12):
            fails.append((inst, "average exceeds max"))
        if mass(sys, inst.omega, cube) > 0:
            const_avg = average(sys, np.full(sys.num_atoms, 2.5), inst.omega, cube)
            if _rel(const_avg, 2.5) > 1e-12:
                fails.append((inst, "constant average broken"))
    s.record("average-bounds", fails, checked)


def _check_forms(s: _Suite):
    fails, checked = [], 0
    for inst, f, g in s.draws():
        form = lambda_form(inst, f, g)
        via_g = ksum(inst.omega * g * apply_box_operator(inst, f))
        via_f = ksum(inst.sigma[None, :] * f * apply_adjoint_operator(inst, g))
        checked += 1
        if _rel(form, via_g) > 1e-12 or _rel(form, via_f) > 1e-12:
            fails.append((inst, f"adjointness broken: {form} vs {via_g} vs {via_f}"))
    s.record("adjointness-triple-identity", fails, checked)

    fails, checked = [], 0
    for inst in s.instances + s.fixtures:
        for lin in range(inst.sys.num_cubes):
            rep = phi_identity_check(inst, inst.sys.cube_at(lin))
            checked += 1
            if rep.max_rel_spread > 1e-10:
                fails.append((inst, f"identity chain spread {rep.max_rel_spread:.2e}"))
    s.record("test-input-identity-chain", fails, checked)

    fails, checked = [], 0
    for inst, f, g in s.draws():
        lam2 = inst.lam.copy()
        lam2[inst.sys.num_cubes // 2] += 1.0
        bumped = Instance(inst.sys, inst.p, inst.sigma, inst.omega, inst.mu, lam2)
        checked += 1
        if lambda_form(bumped, f, g) < lambda_form(inst, f, g) * (1 - 1e-12):
            fails.append((inst, "form not monotone in lambda"))
    s.record("lambda-monotonicity", fails, checked)


def _check_testing(s: _Suite):
    fails, checked = [], 0
    for inst, f, g in s.draws():
        rep = testing_report(inst)
        checked += 1
        if rep.forward > 0:
            cube = rep.forward_cube
            phi = test_function(inst, cube)
            attained = lambda_form_local(inst, cube, phi, rep.witness_g)
            target = rep.forward * mixed_norm(phi, inst.sigma, inst.p) * lp_norm(
                rep.witness_g, inst.omega, conjugate(inst.p)
            )
            if _rel(attained, target) > 1e-10:
                fails.append((inst, f"forward witness off: {attained} vs {target}"))
        if rep.dual > 0:
            cube = rep.dual_cube
            ind = inst.sys.atom_mask(cube).astype(float)
            attained = lambda_form_local(inst, cube, rep.witness_f, ind)
            target = rep.dual * mixed_norm(rep.witness_f, inst.sigma, inst.p) * lp_norm(
                ind, inst.omega, conjugate(inst.p)
            )
            if _rel(attained, target) > 1e-10:
                fails.append((inst, f"dual witness off: {attained} vs {target}"))
        # random testing-type ratios never beat the constants
        best = max(rep.forward, rep.dual)
        for lin in range(0, inst.sys.num_cubes, max(1, inst.sys.num_cubes // 4)):
            cube = inst.sys.cube_at(lin)
            phi = test_function(inst, cube)
            d1 = mixed_norm(phi, inst.sigma, inst.p) * lp_norm(g, inst.omega, conjugate(inst.p))
            if d1 > 0 and lambda_form_local(inst, cube, phi, g) > best * d1 * (1 + 1e-12):
                fails.append((inst, f"forward ratio beats constant at {cube}"))
            ind = inst.sys.atom_mask(cube).astype(float)
            d2 = mixed_norm(f, inst.sigma, inst.p) * lp_norm(ind, inst.omega, conjugate(inst.p))
            if d2 > 0 and lambda_form_local(inst, cube, f, ind) > best * d2 * (1 + 1e-12):
                fails.append((inst, f"dual ratio beats constant at {cube}"))
    s.record("testing-witness-attainment", fails, checked)

    fails, checked = [], 0
    for inst in s.instances[: max(1, len(s.instances) // 5)]:
        rep = testing_report(inst)
        scaled = Instance(inst.sys, inst.p, inst.sigma, inst.omega, inst.mu, 4.0 * inst.lam)
        rep2 = testing_report(scaled)
        checked += 1
        if _rel(rep2.forward, 4.0 * rep.forward) > 1e-12 or _rel(rep2.dual, 4.0 * rep.dual) > 1e-12:
            fails.append((inst, "testing constants not 1-homogeneous in lambda"))
    s.record("testing-lambda-scaling", fails, checked)


def _check_stopping(s: _Suite):
    fails_c, fails_p, fails_s, fails_g, checked = [], [], [], [], 0
    for inst, f, g in s.draws():
        sys = inst.sys
        gfam = build_average_family(inst, sys.root, g)
        if carleson_constant(sys, gfam, inst.omega) > 2.0:
            fails_c.append((inst, "average family exceeds the 2-Carleson bound"))
        ffam = build_ratio_family(inst, sys.root, f)
        a_const, _ = default_ratio_constants(inst.p)
        for lin in range(0, sys.num_cubes, max(1, sys.num_cubes // 6)):
            cube = sys.cube_at(lin)
            member = project(sys, ffam, cube)
            phi = test_function(inst, member)
            den_q = box_integral(sys, phi, inst.mu, inst.sigma, cube)
            num_q = box_integral(sys, f, inst.mu, inst.sigma, cube)
            den_m = box_integral(sys, phi, inst.mu, inst.sigma, member)
            num_m = box_integral(sys, f, inst.mu, inst.sigma, member)
            lhs = num_q / den_q if den_q > 0 else 0.0
            rhs = a_const * (num_m / den_m if den_m > 0 else 0.0)
            if lhs > rhs * (1 + 1e-12):
                fails_p.append((inst, f"stopping bound broken at {cube}"))
        if inst.p >= 2.0:
            # the geometric mass decay is a consequence of the default
            # constants only in the p >= 2 regime
            if child_mass_bound(ffam) > 0.5:
                fails_s.append((inst, "child test-input mass above half the parent"))
            if subfamily_mass_bound(ffam) > 2.0:
                fails_g.append((inst, "subfamily test-input mass above twice the parent"))
        checked += 1
    s.record("average-family-2-carleson", fails_c, checked)
    s.record("ratio-family-stopping-bound", fails_p, checked)
    s.record("ratio-family-child-mass-half", fails_s, checked)
    s.record("ratio-family-subtree-mass-double", fails_g, checked)

    fails, checked = [], 0
    for inst in generators.adversarial_family(
        "deep-chain", depth=min(5, lattice.MAX_DEPTH[s.dimension]), dimension=s.dimension, p=max(s.p, 2.0)
    ):
        sys = inst.sys
        f, g = generators.deep_chain_profiles(sys)
        gfam = build_average_family(inst, sys.root, g)
        ffam = build_ratio_family(inst, sys.root, f)
        for lin in range(sys.num_cubes):
            cube = sys.cube_at(lin)
            fm = project(sys, ffam, cube)
            gm = project(sys, gfam, cube)
            fa, ga = set(sys.atoms_of(fm)), set(sys.atoms_of(gm))
            checked += 1
            if not (fa <= ga or ga <= fa):
                fails.append((inst, f"projections not nested at {cube}"))
                continue
            if fm.level >= gm.level and fm != gm:  # f-member strictly inside g-member
                fg = collapse_scale_function(inst, f, gfam, ffam, sys.linear(gm))
                a = box_integral(sys, f, inst.mu, inst.sigma, cube)
                b = box_integral(sys, fg, inst.mu, inst.sigma, cube)
                if _rel(a, b) > 1e-12:
                    fails.append((inst, f"scale collapse changes box mass at {cube}"))
            if gm.level >= fm.level:  # g-member inside f-member (or equal)
                gf = collapse_atom_function(inst, g, gfam, ffam, sys.linear(fm))
                a = cube_integral(sys, g, inst.omega, cube)
                b = cube_integral(sys, gf, inst.omega, cube)
                if _rel(a, b) > 1e-12:
                    fails.append((inst, f"atom collapse changes cube mass at {cube}"))
    s.record("collapse-substitution-identities", fails, checked)


def _check_embedding(s: _Suite):
    fails, checked = [], 0
    rng = np.random.Generator(np.random.Philox(key=[s.seed, 200]))
    for inst, f, g in s.draws():
        sys = inst.sys
        nu = np.exp(rng.random(sys.num_atoms) * 2.0 - 1.0)
        a = np.exp(rng.random(sys.num_cubes)) * (rng.random(sys.num_cubes) >= 0.4)
        data = CarlesonData(a, nu)
        cprime = carleson_condition_constant(sys, data)
        found = embedding_ratio_search(sys, data, inst.p, restarts=2, seed=s.seed).value
        checked += 1
        if found < cprime * (1 - 1e-12):
            fails.append((inst, f"search {found} below condition constant {cprime}"))
    s.record("embedding-indicator-necessity", fails, checked)

    fails, checked = [], 0
    if s.p >= 2:
        for inst, f, g in s.draws():
            fam = build_ratio_family(inst, inst.sys.root, f)
            rep = stopping_embedding_report(inst, f, fam)
            checked += 1
            if rep.alpha_identity_rel_err > 1e-12:
                fails.append((inst, f"exclusive-box reconstruction err {rep.alpha_identity_rel_err:.2e}"))
            if rep.nu_carleson_factor > 4.0:
                fails.append((inst, f"lifted Carleson factor {rep.nu_carleson_factor}"))
            if not np.isfinite(rep.ratio):
                fails.append((inst, "embedding ratio not finite"))
    s.record("stopping-embedding-report", fails, checked)

    fails, checked = [], 0
    rng = np.random.Generator(np.random.Philox(key=[s.seed, 201]))
    for inst, f, g in s.draws():
        if inst.p < 2:
            continue
        sys = inst.sys
        labels = rng.integers(0, 4, size=(sys.num_levels, sys.num_atoms))
        parts = []
        for part_id in range(3):
            cells = np.argwhere(labels == part_id)
            parts.append({(int(a), int(j)) for j, a in cells})
        rep = disjointness_inequality(f, inst.sigma, inst.p, parts)
        checked += 1
        if not rep.holds:
            fails.append((inst, f"disjoint power sums {rep.lhs} exceed {rep.rhs}"))
    inst, f, parts = generators.lemma_violation_fixture()
    rep = disjointness_inequality(f, inst.sigma, inst.p, parts)
    checked += 1
    if rep.holds or _rel(rep.lhs, 2.0) > 1e-12 or _rel(rep.rhs, 2.0**0.75) > 1e-12:
        fails.append((inst, "below-2 witness did not violate as expected"))
    s.record("disjoint-power-sums", fails, checked)


def _check_normest(s: _Suite):
    fails, checked = [], 0
    sample = s.instances[: max(1, len(s.instances) // 5)] + s.fixtures
    for inst in sample:
        rep = testing_report(inst)
        est = alternating_maximization(
            inst, restarts=s.restarts, tol=s.tol, seed=s.seed, report=rep
        )
        checked += 1
        if est.degenerate:
            if rep.forward + rep.dual > 0:
                fails.append((inst, "degenerate estimate with positive testing constants"))
            continue
        witnessed = lambda_form(inst, est.witness_f, est.witness_g)
        nf = mixed_norm(est.witness_f, inst.sigma, inst.p)
        ng = lp_norm(est.witness_g, inst.omega, conjugate(inst.p))
        if _rel(witnessed / (nf * ng), est.value) > 1e-12:
            fails.append((inst, "witness ratio disagrees with value"))
        if est.value < max(rep.forward, rep.dual) - 1e-9:
            fails.append((inst, "estimate below a testing constant"))
        if inst.p >= 2 and rep.forward + rep.dual > 0:
            ratios = testing_norm_ratios(inst, estimate=est, report=rep)
            if ratios.upper < 0.5 - 1e-9 or ratios.lower > 1.0 + 1e-9:
                fails.append((inst, f"ratios out of range: {ratios}"))
        small = inst.sys.num_levels * inst.sys.num_atoms**2 <= 4_000_000
        if inst.p == 2.0 and small:
            oracle = spectral_oracle_p2(inst)
            if oracle > 0 and abs(est.value - oracle) / oracle > 1e-6:
                fails.append((inst, f"alternating {est.value} vs spectral {oracle}"))
        g1, v1 = best_g_given_f(inst, est.witness_f)
        if g1 is not None and v1 < est.value * (1 - 1e-12):
            fails.append((inst, "half-step decreased the ratio"))
        f1, v2 = best_f_given_g(inst, est.witness_g)
        if f1 is not None and v2 < est.value * (1 - 1e-12):
            fails.append((inst, "half-step decreased the ratio"))
    s.record("norm-estimate-contracts", fails, checked)


def _check_io(s: _Suite):
    import io as _io

    fails, checked = [], 0
    for inst in s.instances[:10] + s.fixtures:
        buf = _io.StringIO()
        io.write_instance(inst, buf)
        buf.seek(0)
        back = io.read_instance(buf)
        checked += 1
        same = (
            back.p == inst.p
            and np.array_equal(back.sigma, inst.sigma)
            and np.array_equal(back.omega, inst.omega)
            and np.array_equal(back.mu, inst.mu)
            and np.array_equal(back.lam, inst.lam)
        )
        if not same:
            fails.append((inst, "round-trip not bit-identical"))
    s.record("instance-roundtrip-bit-exact", fails, checked)

    fails, checked = [], 0
    for k in range(3):
        spec = generators.GenSpec(seed=s.seed + k, dimension=s.dimension, depth=s.depth, p=s.p)
        checked += 1
        if io.digest(generators.generate(spec)) != io.digest(generators.generate(spec)):
            fails.append((None, f"generation not deterministic at seed {spec.seed}"))
    s.record("generation-determinism", fails, checked)


def format_report(results: list[CheckResult], header: str) -> str:
    lines = [header]
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        lines.append(f"{mark} {r.name}: {r.detail}")
        if not r.passed and r.counterexample:
            lines.append(f"  instance: {r.counterexample}")
    passed = sum(r.passed for r in results)
    lines.append(f"SUMMARY {passed}/{len(results)} properties passed")
    return "\n".join(lines) + "\n"
