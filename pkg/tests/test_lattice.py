"""Noise-propagation geometry: shells, reachability, generation criterion."""
import math

import numpy as np
import pytest

from vortexlab.lattice import (ForcingGeometry, admissible, is_generating,
                               next_shell, reachable_modes, symmetric_part)

from conftest import Z_STAR


def ball(radius):
    r2 = radius * radius
    rmax = int(math.floor(radius))
    return {(a, b)
            for a in range(-rmax, rmax + 1)
            for b in range(-rmax, rmax + 1)
            if (a, b) != (0, 0) and a * a + b * b <= r2}


# ------------------------------------------------------------ basic sets

def test_symmetric_part():
    assert symmetric_part({(1, 0), (-1, 0), (2, 3)}) == {(1, 0), (-1, 0)}
    assert symmetric_part({(1, 0), (0, 1)}) == set()
    assert symmetric_part(set()) == set()


def test_forcing_geometry_derives_symmetric_part():
    g = ForcingGeometry(frozenset({(1, 0), (-1, 0), (5, 5)}))
    assert g.z_zero == frozenset({(1, 0), (-1, 0)})
    assert g.max_norm() == pytest.approx(math.sqrt(50.0))
    assert ForcingGeometry(frozenset()).max_norm() == 0.0


def test_admissible_conditions():
    # non-collinear and unequal norms
    assert admissible((1, 0), (1, 1))
    # collinear
    assert not admissible((1, 0), (2, 0))
    assert not admissible((1, 0), (-1, 0))
    # equal norms
    assert not admissible((1, 0), (0, 1))
    assert not admissible((2, 1), (1, 2))


def test_next_shell_of_canonical_forcing():
    shell = next_shell(set(Z_STAR), set(Z_STAR))
    # l=(1,0), j=(1,1) -> (2,1); l=(1,1), j=(1,0) -> (2,1); with negatives
    # and l=(1,0)+j=(-1,-1) -> (0,-1) etc.
    assert (2, 1) in shell and (-2, -1) in shell
    assert (0, 1) in shell and (0, -1) in shell
    # parallel or equal-norm sums never appear
    assert (2, 0) not in shell and (2, 2) not in shell


# ---------------------------------------------------------- reachability

def test_canonical_forcing_reaches_large_ball():
    g = ForcingGeometry(frozenset(Z_STAR))
    res = reachable_modes(g, radius=10.0)
    assert res.saturated
    assert res.covers_ball(10.0)
    assert res.reached == ball(10.0)


def test_equal_norm_forcing_goes_nowhere():
    # {+-(1,0), +-(0,1)}: all norms equal, first shell is empty.
    g = ForcingGeometry(frozenset({(1, 0), (-1, 0), (0, 1), (0, -1)}))
    res = reachable_modes(g, radius=8.0)
    assert res.saturated
    assert res.shells[0] == set()
    assert res.reached == set(g.z_star)


def test_sublattice_forcing_stays_on_sublattice():
    g = ForcingGeometry(frozenset({(2, 0), (-2, 0), (2, 2), (-2, -2)}))
    res = reachable_modes(g, radius=10.0)
    assert res.saturated
    for k in res.reached:
        assert k[0] % 2 == 0 and k[1] % 2 == 0
    assert not res.covers_ball(2.0)


def test_witness_paths_are_valid_certificates():
    g = ForcingGeometry(frozenset(Z_STAR))
    res = reachable_modes(g, radius=6.0)
    for mode, chain in res.witness_paths.items():
        if not chain:
            assert mode in g.z_star or mode in g.z_zero
            continue
        cur = chain[0][0]
        assert cur in g.z_zero
        for l, j in chain:
            assert l == cur
            assert j in g.z_zero
            assert admissible(l, j)
            cur = (l[0] + j[0], l[1] + j[1])
        assert cur == mode


def test_radius_must_cover_forcing():
    g = ForcingGeometry(frozenset(Z_STAR))
    with pytest.raises(ValueError):
        reachable_modes(g, radius=1.0)


def test_wide_gap_forcing_with_buffered_radius():
    # Forcing on two distant coordinate rays. Coverage of a moderate ball
    # requires working room beyond the target radius.
    g = ForcingGeometry(frozenset({(6, 0), (-6, 0), (5, 0), (-5, 0),
                                   (0, 10), (0, -10), (0, 9), (0, -9)}))
    flag, reason = is_generating(g)
    assert flag, reason
    res = reachable_modes(g, radius=15.0)
    assert res.saturated
    assert res.covers_ball(12.0)


# ----------------------------------------------------------- generation

def test_generation_criterion_examples():
    assert is_generating(ForcingGeometry(frozenset(Z_STAR)))[0]

    flag, reason = is_generating(
        ForcingGeometry(frozenset({(1, 0), (-1, 0), (0, 1), (0, -1)})))
    assert not flag and "equal norms" in reason

    flag, reason = is_generating(
        ForcingGeometry(frozenset({(2, 0), (-2, 0), (2, 2), (-2, -2)})))
    assert not flag and "index-4" in reason

    flag, reason = is_generating(
        ForcingGeometry(frozenset({(1, 0), (0, 1)})))   # not symmetric
    assert not flag and "empty symmetric part" in reason

    flag, reason = is_generating(
        ForcingGeometry(frozenset({(1, 0), (-1, 0), (3, 0), (-3, 0)})))
    assert not flag and "rank-deficient" in reason


def test_generation_agrees_with_brute_force_reachability():
    rng = np.random.default_rng(0)
    candidates = [(a, b) for a in range(-4, 5) for b in range(-4, 5)
                  if (a, b) != (0, 0)]
    for _ in range(60):
        size = rng.integers(1, 5)
        picks = rng.choice(len(candidates), size=size, replace=False)
        z = set()
        for p in picks:
            k = candidates[p]
            z.add(k)
            z.add((-k[0], -k[1]))
        g = ForcingGeometry(frozenset(z))
        flag, _ = is_generating(g)
        # brute force: saturate with generous working room, then ask whether
        # a small ball is fully generated
        room = g.max_norm() + 8.0
        res = reachable_modes(g, radius=room, max_shells=256)
        assert res.saturated
        brute = all(k in res.reached for k in ball(2.0))
        assert flag == brute, (sorted(z), flag, brute)
