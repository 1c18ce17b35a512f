"""Exact testing constants of the localized form, via Lp duality.

Both constants are suprema over cubes of a ratio whose inner supremum (over
the free function) has a closed form:

* forward: feed the optimal test input on the box of Q to the localized box
  operator and measure it in Lp(omega); the free atom function is eliminated
  by scalar Lp duality.
* dual: feed the indicator of Q on the atom side; the free scale function is
  eliminated by mixed-norm duality against the kernel assembled from
  lam and the omega-masses of the subcubes of Q.

The recorded witnesses are the norming functions, so plugging them back into
the localized form reproduces ``constant * norm * norm`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lattice
from .forms import Instance, all_box_integrals, test_function
from .lattice import Cube
from .measures import (
    ell2_slice,
    lp_norm,
    mass,
    mixed_norm,
    zero_preserving_power,
)


@dataclass(frozen=True)
class TestingSide:
    value: float
    cube: Cube | None
    witness: np.ndarray  # atom function (forward) or scale function (dual)


@dataclass(frozen=True)
class TestingReport:
    forward: float
    dual: float
    forward_cube: Cube | None
    dual_cube: Cube | None
    witness_g: np.ndarray
    witness_f: np.ndarray


def norming_atom_function(h: np.ndarray, w: np.ndarray, p: float) -> np.ndarray:
    """Unit-Lq(w) maximizer of the pairing against h; zero if h vanishes."""
    n = lp_norm(h, w, p)
    if n == 0.0:
        return np.zeros_like(h)
    return (h / n) ** (p - 1.0)


def norming_scale_function(k: np.ndarray, sigma: np.ndarray, p: float, q: float) -> np.ndarray:
    """Unit mixed-p-norm maximizer of the sigma-pairing against k."""
    s = ell2_slice(k)
    shaped = zero_preserving_power(s, q - 2.0)[None, :] * k if q != 2.0 else k
    n = mixed_norm(shaped, sigma, p)
    if n == 0.0:
        return np.zeros_like(k)
    return shaped / n


def forward_testing_constant(inst: Instance) -> TestingSide:
    sys = inst.sys
    best = 0.0
    best_cube: Cube | None = None
    best_witness = np.zeros(sys.num_atoms)
    for lin in range(sys.num_cubes):
        cube = sys.cube_at(lin)
        phi = test_function(inst, cube)
        phinorm = mixed_norm(phi, inst.sigma, inst.p)
        if phinorm == 0.0:
            continue
        contrib = inst.lam * all_box_integrals(inst, phi)
        running = lattice.chain_running(sys, contrib, start_level=cube.level)
        h = running[sys.depth] * sys.atom_mask(cube)
        ratio = lp_norm(h, inst.omega, inst.p) / phinorm
        if ratio > best:
            best = ratio
            best_cube = cube
            best_witness = norming_atom_function(h, inst.omega, inst.p)
    return TestingSide(best, best_cube, best_witness)


def dual_kernel(inst: Instance, cube: Cube) -> np.ndarray:
    """Scale-function kernel representing f -> localized form of (f, 1_cube)."""
    sys = inst.sys
    level, _ = sys.validate(cube)
    contrib = inst.lam * lattice.cube_sums(sys, inst.omega)
    running = lattice.chain_running(sys, contrib, start_level=level)
    return inst.mu * running * sys.atom_mask(cube)[None, :]


def dual_testing_constant(inst: Instance) -> TestingSide:
    sys = inst.sys
    best = 0.0
    best_cube: Cube | None = None
    best_witness = np.zeros((sys.num_levels, sys.num_atoms))
    for lin in range(sys.num_cubes):
        cube = sys.cube_at(lin)
        denom = mass(sys, inst.omega, cube) ** (1.0 / inst.q)
        if denom == 0.0:
            continue
        kernel = dual_kernel(inst, cube)
        ratio = mixed_norm(kernel, inst.sigma, inst.q) / denom
        if ratio > best:
            best = ratio
            best_cube = cube
            best_witness = norming_scale_function(kernel, inst.sigma, inst.p, inst.q)
    return TestingSide(best, best_cube, best_witness)


def testing_report(inst: Instance) -> TestingReport:
    fwd = forward_testing_constant(inst)
    dua = dual_testing_constant(inst)
    return TestingReport(
        forward=fwd.value,
        dual=dua.value,
        forward_cube=fwd.cube,
        dual_cube=dua.cube,
        witness_g=fwd.witness,
        witness_f=dua.witness,
    )
