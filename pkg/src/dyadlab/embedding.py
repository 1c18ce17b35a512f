"""Carleson embedding checks: condition constant, empirical embedding
constant, the disjoint-set power inequality, and the stopping-family
embedding report.

The embedding inequality bounds a weighted sum of p-th powers of cube
averages by the p-th power of the Lp norm; its smallest constant is
comparable (p-dependently) to the smallest constant in the cube-mass
condition.  The condition side is exact arithmetic; the embedding side is a
seeded ratio maximization whose indicator seeds already certify that the
empirical constant dominates the condition constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lattice
from .errors import GuardError
from .forms import Instance, all_box_integrals
from .lattice import DyadicSystem
from .measures import ksum, lp_norm, mixed_norm
from .stopping import StoppingFamily, _exclusive_box_mask


@dataclass(frozen=True)
class CarlesonData:
    """A cube mass collection and an atom measure to test embedding against."""

    a: np.ndarray   # per-cube, shape (num_cubes,)
    nu: np.ndarray  # per-atom, shape (num_atoms,)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        nu = np.asarray(self.nu, dtype=np.float64)
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ValueError("cube masses must be finite and nonnegative")
        if np.any(nu < 0) or not np.all(np.isfinite(nu)):
            raise ValueError("measure must be finite and nonnegative")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "nu", nu)


def carleson_condition_constant(sys: DyadicSystem, data: CarlesonData) -> float:
    """Smallest constant bounding subtree cube mass by measure mass.

    Returns inf when some cube carries zero measure but positive cube mass
    at or below it (the condition cannot hold at any constant).
    """
    sub = lattice.subtree_sums(sys, data.a)
    masses = lattice.cube_sums(sys, data.nu)
    if np.any((masses == 0) & (sub > 0)):
        return float("inf")
    positive = masses > 0
    if not np.any(positive):
        return 0.0
    return float(np.max(sub[positive] / masses[positive]))


def embedding_sum(sys: DyadicSystem, data: CarlesonData, h: np.ndarray, p: float) -> float:
    """Left side of the embedding: sum over cubes of a * (average of h)**p."""
    masses = lattice.cube_sums(sys, data.nu)
    integrals = lattice.cube_sums(sys, data.nu * np.asarray(h, dtype=np.float64))
    avg = np.divide(integrals, masses, out=np.zeros_like(integrals), where=masses > 0)
    return ksum(data.a * avg**p)


def _embedding_ratio(sys: DyadicSystem, data: CarlesonData, h: np.ndarray, p: float) -> float:
    den = lp_norm(h, data.nu, p) ** p
    if den == 0.0:
        return 0.0
    return embedding_sum(sys, data, h, p) / den


@dataclass(frozen=True)
class RatioSearchResult:
    value: float
    witness: np.ndarray
    evaluations: int


def embedding_ratio_search(
    sys: DyadicSystem,
    data: CarlesonData,
    p: float,
    restarts: int = 4,
    iterations: int = 40,
    seed: int = 0,
) -> RatioSearchResult:
    """Empirical embedding constant by seeded fixed-point ascent.

    Seeds: the indicator of every cube (these certify that the result
    dominates the condition constant), the constant function, and ``restarts``
    random starts.  From each seed the update replaces h by the (1/(p-1))-th
    power of the collected average-gradient, which is the stationarity shape
    of the ratio; the best ratio over every iterate is kept.
    """
    masses = lattice.cube_sums(sys, data.nu)
    best = 0.0
    best_h = np.zeros(sys.num_atoms)
    evals = 0

    def consider(h: np.ndarray) -> float:
        nonlocal best, best_h, evals
        evals += 1
        r = _embedding_ratio(sys, data, h, p)
        if r > best:
            best = r
            n = lp_norm(h, data.nu, p)
            best_h = h / n if n > 0 else h
        return r

    def ascend(h: np.ndarray):
        for _ in range(iterations):
            integrals = lattice.cube_sums(sys, data.nu * h)
            avg = np.divide(
                integrals, masses, out=np.zeros_like(integrals), where=masses > 0
            )
            t = np.divide(
                data.a * avg ** (p - 1.0),
                masses,
                out=np.zeros_like(avg),
                where=masses > 0,
            )
            grad = lattice.chain_total(sys, t)
            h_new = grad ** (1.0 / (p - 1.0))
            top = h_new.max()
            if top == 0.0:
                return
            h_new /= top
            consider(h_new)
            if np.allclose(h_new, h, rtol=1e-13, atol=0.0):
                return
            h = h_new

    seeds = [np.ones(sys.num_atoms)]
    indicator_best = None
    for lin in range(sys.num_cubes):
        if masses[lin] == 0:
            continue
        h = sys.atom_mask(sys.cube_at(lin)).astype(np.float64)
        r = consider(h)
        if indicator_best is None or r > indicator_best[0]:
            indicator_best = (r, h)
    if indicator_best is not None:
        seeds.append(indicator_best[1])
    for k in range(restarts):
        rng = np.random.Generator(np.random.Philox(key=[seed, k]))
        seeds.append(rng.random(sys.num_atoms))
    for h in seeds:
        consider(h)
        ascend(h)
    return RatioSearchResult(best, best_h, evals)


@dataclass(frozen=True)
class DisjointnessReport:
    lhs: float
    rhs: float
    holds: bool


def disjointness_inequality(
    f: np.ndarray, sigma: np.ndarray, p: float, parts
) -> DisjointnessReport:
    """Compare the summed p-th power mixed norms over disjoint cell sets with
    the global one.  Guaranteed to hold for p >= 2; fails in general below."""
    f = np.asarray(f, dtype=np.float64)
    levels, atoms = f.shape
    cover = np.zeros(f.shape, dtype=np.int64)
    masks = []
    for part in parts:
        mask = np.zeros(f.shape, dtype=bool)
        for atom, level in part:
            mask[level, atom] = True
        cover += mask
        masks.append(mask)
    if np.any(cover > 1):
        raise ValueError("cell sets overlap")
    lhs = ksum([mixed_norm(f * m, sigma, p) ** p for m in masks])
    rhs = mixed_norm(f, sigma, p) ** p
    return DisjointnessReport(lhs, rhs, lhs <= rhs + 1e-12 * rhs)


@dataclass(frozen=True)
class LiftedMeasure:
    """Test-input masses of a ratio family, read as a measure whose box
    masses nest along the stopping tree."""

    point_mass: dict[int, float]  # member -> own test-input mass
    box_mass: dict[int, float]    # member -> subtree total

    @property
    def total(self) -> float:
        return ksum(list(self.point_mass.values()))


def lifted_measure(family: StoppingFamily) -> LiftedMeasure:
    if family.kind != "ratio":
        raise ValueError("lifted measure requires a ratio family")
    box: dict[int, float] = {}
    for member in reversed(family.members):
        box[member] = family.phi_mass[member] + sum(
            box[c] for c in family.children[member]
        )
    return LiftedMeasure(dict(family.phi_mass), box)


@dataclass(frozen=True)
class StoppingEmbeddingReport:
    lhs: float
    rhs: float
    ratio: float
    nu_carleson_factor: float
    alpha_identity_rel_err: float


def stopping_embedding_report(
    inst: Instance, f: np.ndarray, family: StoppingFamily
) -> StoppingEmbeddingReport:
    """Embedding sum of bracket averages against test-input masses, plus the
    two structural facts its proof runs on: the lifted measure is a Carleson
    family with factor at most 4, and box masses of f reconstruct exactly
    from the exclusive boxes of the stopping subtree."""
    if inst.p < 2.0:
        raise GuardError(f"stopping embedding requires p >= 2, got {inst.p}")
    if family.kind != "ratio":
        raise ValueError("stopping embedding requires a ratio family")
    sys = inst.sys

    num = all_box_integrals(inst, f)
    brackets = {
        m: (num[m] / family.phi_mass[m] if family.phi_mass[m] > 0 else 0.0)
        for m in family.members
    }
    lhs = ksum([brackets[m] ** inst.p * family.phi_mass[m] for m in family.members])
    rhs = mixed_norm(f, inst.sigma, inst.p) ** inst.p
    ratio = lhs / rhs if rhs > 0 else 0.0

    lifted = lifted_measure(family)
    nested: dict[int, float] = {}
    factor = 0.0
    for member in reversed(family.members):
        nested[member] = lifted.box_mass[member] + sum(
            nested[c] for c in family.children[member]
        )
        if lifted.box_mass[member] > 0:
            factor = max(factor, nested[member] / lifted.box_mass[member])

    weights = inst.sigma[None, :] * f * inst.mu
    exclusive: dict[int, float] = {
        m: ksum(weights[_exclusive_box_mask(sys, family, m)]) for m in family.members
    }
    err = 0.0
    acc: dict[int, float] = {}
    for member in reversed(family.members):
        acc[member] = exclusive[member] + sum(acc[c] for c in family.children[member])
        target = num[member]
        scale = max(abs(target), abs(acc[member]), 1e-300)
        err = max(err, abs(acc[member] - target) / scale)

    return StoppingEmbeddingReport(lhs, rhs, ratio, factor, err)
