"""Noise-propagation sets on the integer lattice and the nondegeneracy test.

The symmetric part of a forcing set spreads through the quadratic nonlinearity
in shells: a new mode l+j is admissible when the step j and the current mode l
are non-collinear and have unequal Euclidean norm. Saturating that recursion
inside a truncation radius yields the set of modes the noise can reach, and
the generation criterion (unimodular integer span plus two unequal norms)
characterizes when it reaches everything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .modes import Mode, check_mode, dot, negate, norm2, perp

DEFAULT_MAX_SHELLS = 64


def symmetric_part(z_star: set[Mode]) -> set[Mode]:
    """The symmetric part Z* intersected with -Z*."""
    z_star = {check_mode(k) for k in z_star}
    return {k for k in z_star if negate(k) in z_star}


@dataclass(frozen=True)
class ForcingGeometry:
    """A finite forced mode set with its derived symmetric part."""

    z_star: frozenset
    z_zero: frozenset = field(init=False)

    def __post_init__(self):
        z_star = frozenset(check_mode(k) for k in self.z_star)
        object.__setattr__(self, "z_star", z_star)
        object.__setattr__(self, "z_zero", frozenset(symmetric_part(set(z_star))))

    def max_norm(self) -> float:
        if not self.z_star:
            return 0.0
        return max(math.sqrt(norm2(k)) for k in self.z_star)


def admissible(l: Mode, j: Mode) -> bool:
    """Both propagation conditions, on exact integers: l^perp.j != 0, |j| != |l|."""
    return dot(perp(l), j) != 0 and norm2(j) != norm2(l)


def next_shell(prev: set[Mode], z_zero: set[Mode]) -> set[Mode]:
    """All admissible sums l+j in Z^2_0 with l in prev and j in z_zero."""
    out = set()
    for l in prev:
        for j in z_zero:
            s = (l[0] + j[0], l[1] + j[1])
            if s == (0, 0):
                continue
            if admissible(l, j):
                out.add(s)
    return out


@dataclass
class ReachabilityResult:
    shells: list  # list[set[Mode]], shell n holds Z_n
    reached: set  # union of shells and z_star
    saturated: bool
    witness_paths: dict  # mode -> list of (l, j) generation steps

    def covers_ball(self, radius: float) -> bool:
        r2 = radius * radius
        rmax = int(math.floor(radius))
        for k1 in range(-rmax, rmax + 1):
            for k2 in range(-rmax, rmax + 1):
                if (k1, k2) == (0, 0) or k1 * k1 + k2 * k2 > r2:
                    continue
                if (k1, k2) not in self.reached:
                    return False
        return True


def reachable_modes(geometry: ForcingGeometry, radius: float,
                    max_shells: int = DEFAULT_MAX_SHELLS) -> ReachabilityResult:
    """Iterate the shell recursion restricted to |k| <= radius until saturation.

    Modes generated outside the radius are discarded (truncation semantic).
    Witness paths record the first-found (l, j) generation step under
    lexicographic iteration, giving a reproducible certificate chain.
    """
    if geometry.z_star and radius < geometry.max_norm():
        raise ValueError("radius must cover the forcing set")
    r2 = radius * radius
    z_zero = sorted(geometry.z_zero)
    shells: list[set[Mode]] = []
    parent: dict[Mode, tuple[Mode, Mode]] = {}
    seen: set[Mode] = set(geometry.z_zero)
    prev: set[Mode] = set(geometry.z_zero)
    saturated = False
    for _ in range(max_shells):
        shell = set()
        for l in sorted(prev):
            for j in z_zero:
                s = (l[0] + j[0], l[1] + j[1])
                if s == (0, 0) or norm2(s) > r2:
                    continue
                if not admissible(l, j):
                    continue
                shell.add(s)
                if s not in parent and s not in geometry.z_zero:
                    parent[s] = (l, j)
        shells.append(shell)
        new = shell - seen
        seen |= shell
        if not new:
            saturated = True
            # the recursion has hit a fixed point within the radius; any
            # further shell is a subset of what was already generated
            break
        prev = shell

    reached = set(geometry.z_star)
    for shell in shells:
        reached |= shell

    witness: dict[Mode, list[tuple[Mode, Mode]]] = {}
    for mode in reached:
        chain = []
        cur = mode
        while cur in parent:
            l, j = parent[cur]
            chain.append((l, j))
            cur = l
        chain.reverse()
        witness[mode] = chain
    return ReachabilityResult(shells=shells, reached=reached,
                              saturated=saturated, witness_paths=witness)


def _hnf_index(vectors: list[Mode]) -> int:
    """Index of the integer lattice spanned by vectors inside Z^2.

    Exact Euclidean row reduction into an upper-triangular (Hermite) basis.
    Returns 0 when the span has rank < 2, else |det| of the reduced basis.
    """
    pivot = None   # row with nonzero first entry
    tail = 0       # gcd of second entries of rows with zero first entry
    for v in vectors:
        r = [v[0], v[1]]
        while r[0] != 0:
            if pivot is None:
                pivot, r = r, [0, 0]
                break
            q = r[0] // pivot[0]
            r = [r[0] - q * pivot[0], r[1] - q * pivot[1]]
            if r[0] != 0:
                pivot, r = r, pivot
        if r[1] != 0:
            tail = math.gcd(tail, r[1])
    if pivot is None or tail == 0:
        return 0
    return abs(pivot[0] * tail)


def is_generating(geometry: ForcingGeometry) -> tuple[bool, str]:
    """Nondegeneracy criterion: unimodular integer span and two unequal norms.

    Returns (flag, reason). The reason names the failed condition(s) when the
    geometry is degenerate.
    """
    z_zero = sorted(geometry.z_zero)
    if not z_zero:
        return False, "empty symmetric part"
    reasons = []
    index = _hnf_index(z_zero)
    if index != 1:
        if index == 0:
            reasons.append("does not generate Z^2_0 (rank-deficient span)")
        else:
            reasons.append(
                f"does not generate Z^2_0 (index-{index} sublattice)")
    norms = {norm2(k) for k in z_zero}
    if len(norms) < 2:
        reasons.append("equal norms")
    if reasons:
        return False, " and ".join(reasons)
    return True, "generating"
