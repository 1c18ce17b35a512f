import math

import numpy as np
import pytest

from dyadlab import Cube, Instance, build_system, lambda_array, worked_instances
from dyadlab.forms import lambda_form_local, test_function as make_test_input
from dyadlab.measures import conjugate, lp_norm, mixed_norm
from dyadlab.testing_constants import (
    dual_kernel,
    dual_testing_constant,
    forward_testing_constant,
    testing_report,
)

W = worked_instances()
ROOT2 = math.sqrt(2.0)


def _w1_variant(lam_map):
    w1 = W["w1"]
    return Instance(w1.sys, 2.0, w1.sigma, w1.omega, w1.mu, lambda_array(w1.sys, lam_map))


def test_forward_constant_on_w1():
    side = forward_testing_constant(W["w1"])
    assert side.value == pytest.approx(2 * ROOT2, rel=1e-12)
    assert side.cube == W["w1"].sys.root
    assert side.witness == pytest.approx(np.full(2, 1 / ROOT2), rel=1e-12)


def test_forward_zero_lambda():
    assert forward_testing_constant(_w1_variant({})).value == 0.0


def test_forward_argmax_at_left_child():
    inst = _w1_variant({"0": 1.0})
    side = forward_testing_constant(inst)
    assert side.value == pytest.approx(1.0, rel=1e-12)
    assert side.cube == Cube(1, (0,))


def test_dual_constant_on_w1():
    w1 = W["w1"]
    kernel = dual_kernel(w1, w1.sys.root)
    assert np.array_equal(kernel, np.full((2, 2), 2.0))
    side = dual_testing_constant(w1)
    assert side.value == pytest.approx(2 * ROOT2, rel=1e-12)
    assert side.cube == w1.sys.root


def test_dual_zero_cases():
    w1 = W["w1"]
    no_omega = Instance(w1.sys, 2.0, w1.sigma, np.zeros(2), w1.mu, w1.lam)
    assert dual_testing_constant(no_omega).value == 0.0
    assert dual_testing_constant(_w1_variant({})).value == 0.0


def test_w2_constants():
    rep = testing_report(W["w2"])
    assert rep.forward == pytest.approx(8.0, rel=1e-12)
    assert rep.dual == pytest.approx(8.0, rel=1e-12)


def _random_instance(seed, p, d=3):
    s = build_system(1, d)
    rng = np.random.Generator(np.random.Philox(key=[seed, 50]))
    return Instance(
        s,
        p,
        rng.random(s.num_atoms) * (rng.random(s.num_atoms) > 0.15),
        rng.random(s.num_atoms) * (rng.random(s.num_atoms) > 0.15),
        rng.random((s.num_levels, s.num_atoms)) * (rng.random((s.num_levels, s.num_atoms)) > 0.15),
        rng.random(s.num_cubes) * (rng.random(s.num_cubes) > 0.3),
    )


@pytest.mark.parametrize("seed,p", [(0, 2.0), (1, 2.5), (2, 3.0), (3, 4.0), (4, 2.0)])
def test_witnesses_attain_the_constants(seed, p):
    inst = _random_instance(seed, p)
    rep = testing_report(inst)
    q = conjugate(p)
    if rep.forward > 0:
        cube = rep.forward_cube
        phi = make_test_input(inst, cube)
        lhs = lambda_form_local(inst, cube, phi, rep.witness_g)
        rhs = rep.forward * mixed_norm(phi, inst.sigma, p) * lp_norm(rep.witness_g, inst.omega, q)
        assert lhs == pytest.approx(rhs, rel=1e-10)
        assert lp_norm(rep.witness_g, inst.omega, q) == pytest.approx(1.0, rel=1e-12)
    if rep.dual > 0:
        cube = rep.dual_cube
        ind = inst.sys.atom_mask(cube).astype(float)
        lhs = lambda_form_local(inst, cube, rep.witness_f, ind)
        rhs = rep.dual * mixed_norm(rep.witness_f, inst.sigma, p) * lp_norm(ind, inst.omega, q)
        assert lhs == pytest.approx(rhs, rel=1e-10)
        assert mixed_norm(rep.witness_f, inst.sigma, p) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("seed,p", [(5, 2.0), (6, 3.0), (7, 4.0)])
def test_constants_dominate_probe_ratios(seed, p):
    # the constants are suprema: no probe input may beat them on any cube
    inst = _random_instance(seed, p)
    rep = testing_report(inst)
    q = conjugate(p)
    rng = np.random.Generator(np.random.Philox(key=[seed, 51]))
    for _ in range(20):
        g = rng.random(inst.sys.num_atoms)
        f = rng.random((inst.sys.num_levels, inst.sys.num_atoms))
        lin = int(rng.integers(inst.sys.num_cubes))
        cube = inst.sys.cube_at(lin)
        phi = make_test_input(inst, cube)
        den_f = mixed_norm(phi, inst.sigma, p) * lp_norm(g, inst.omega, q)
        if den_f > 0:
            assert lambda_form_local(inst, cube, phi, g) <= rep.forward * den_f * (1 + 1e-12)
        ind = inst.sys.atom_mask(cube).astype(float)
        den_d = mixed_norm(f, inst.sigma, p) * lp_norm(ind, inst.omega, q)
        if den_d > 0:
            assert lambda_form_local(inst, cube, f, ind) <= rep.dual * den_d * (1 + 1e-12)


def test_constants_scale_linearly_in_lambda():
    inst = _random_instance(8, 2.0)
    rep = testing_report(inst)
    scaled = Instance(inst.sys, inst.p, inst.sigma, inst.omega, inst.mu, 4.0 * inst.lam)
    rep4 = testing_report(scaled)
    # powers of two scale exactly through every p = 2 norm computation
    assert rep4.forward == 4.0 * rep.forward
    assert rep4.dual == 4.0 * rep.dual
    inst3 = _random_instance(9, 3.0)
    rep3 = testing_report(inst3)
    rep3s = testing_report(
        Instance(inst3.sys, 3.0, inst3.sigma, inst3.omega, inst3.mu, 2.0 * inst3.lam)
    )
    assert rep3s.forward == pytest.approx(2.0 * rep3.forward, rel=1e-13)
    assert rep3s.dual == pytest.approx(2.0 * rep3.dual, rel=1e-13)


def test_dual_witness_is_true_norming_function():
    # brute check on a 2-atom system: no nonnegative f beats the dual witness
    inst = _random_instance(10, 4.0, d=1)
    rep = testing_report(inst)
    assert rep.dual > 0
    cube = rep.dual_cube
    ind = inst.sys.atom_mask(cube).astype(float)
    q = conjugate(inst.p)
    rng = np.random.Generator(np.random.Philox(key=[10, 52]))
    best = 0.0
    for _ in range(4000):
        f = rng.random((inst.sys.num_levels, inst.sys.num_atoms))
        den = mixed_norm(f, inst.sigma, inst.p) * lp_norm(ind, inst.omega, q)
        if den > 0:
            best = max(best, lambda_form_local(inst, cube, f, ind) / den)
    assert best <= rep.dual * (1 + 1e-10)
    assert best >= rep.dual * 0.95  # random probes come close on 4 cells
