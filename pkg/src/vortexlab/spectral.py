"""Real Fourier basis, spectral fields, Biot-Savart, and the bilinear term.

Basis functions are unnormalized sines and cosines on the 2-pi torus, so
every basis function has squared L2 norm 2*pi^2 and the inner product of two
fields is 2*pi^2 times the coefficient dot product. The advective bilinear
term B(w, v) = (K(w) . grad) v is evaluated through a precomputed table of
admissible triples (j, k -> l), each carrying the exact signed coefficient
produced by the product-to-sum expansion of the two trigonometric factors.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .modes import Mode, canonical, check_mode, dot, is_plus, norm2, perp

TWO_PI_SQ = 2.0 * math.pi ** 2


@dataclass(frozen=True)
class Basis:
    """All canonical modes with |k| <= radius, in lexicographic order."""

    radius: float
    modes: tuple
    index: dict

    @classmethod
    def build(cls, radius: float) -> "Basis":
        if radius <= 0:
            raise ValueError("radius must be positive")
        r2 = radius * radius
        rmax = int(math.floor(radius))
        modes = []
        for k1 in range(-rmax, rmax + 1):
            for k2 in range(-rmax, rmax + 1):
                if (k1, k2) == (0, 0) or k1 * k1 + k2 * k2 > r2:
                    continue
                modes.append((k1, k2))
        modes.sort()
        index = {k: i for i, k in enumerate(modes)}
        return cls(radius=radius, modes=tuple(modes), index=index)

    def __len__(self) -> int:
        return len(self.modes)

    def __contains__(self, k) -> bool:
        return tuple(k) in self.index

    def laplacian_symbol(self) -> np.ndarray:
        """|k|^2 per mode, the symbol of -Delta on the truncation."""
        return np.array([norm2(k) for k in self.modes], dtype=float)


class SpectralField:
    """Real coefficient vector over the canonical modes of a basis."""

    __slots__ = ("basis", "coeffs")

    def __init__(self, basis: Basis, coeffs=None):
        self.basis = basis
        if coeffs is None:
            coeffs = np.zeros(len(basis))
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (len(basis),):
            raise ValueError("coefficient length does not match basis size")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("non-finite coefficient")
        self.coeffs = coeffs

    @classmethod
    def single_mode(cls, basis: Basis, k: Mode, amplitude: float = 1.0):
        k = check_mode(k)
        f = cls(basis)
        f.coeffs[basis.index[k]] = amplitude
        return f

    def copy(self) -> "SpectralField":
        return SpectralField(self.basis, self.coeffs.copy())

    def __add__(self, other):
        _check_same_basis(self, other)
        return SpectralField(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_same_basis(self, other)
        return SpectralField(self.basis, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float):
        return SpectralField(self.basis, self.coeffs * scalar)

    __rmul__ = __mul__

    def to_json(self) -> str:
        entries = [{"mode": list(k), "coeff": float(c)}
                   for k, c in zip(self.basis.modes, self.coeffs) if c != 0.0]
        return json.dumps(entries)

    @classmethod
    def from_json(cls, basis: Basis, text: str) -> "SpectralField":
        f = cls(basis)
        for entry in json.loads(text):
            k = check_mode(entry["mode"])
            f.coeffs[basis.index[k]] = float(entry["coeff"])
        return f


@dataclass
class VelocityField:
    """Divergence-free velocity, two coefficient vectors on the same basis."""

    basis: Basis
    u1: np.ndarray
    u2: np.ndarray


def _check_same_basis(a, b):
    if a.basis is not b.basis and a.basis.modes != b.basis.modes:
        raise ValueError("fields live on different bases")


def inner(f: SpectralField, g: SpectralField) -> float:
    """Continuum L2 pairing: 2*pi^2 times the coefficient dot product."""
    _check_same_basis(f, g)
    return TWO_PI_SQ * float(np.dot(f.coeffs, g.coeffs))


def sobolev_norm(f: SpectralField, s: float = 0.0) -> float:
    """H^s norm (sum of |k|^{2s} a_k^2 |e_k|^2)^{1/2}."""
    lam = f.basis.laplacian_symbol()
    return math.sqrt(TWO_PI_SQ * float(np.sum(lam ** s * f.coeffs ** 2)))


def interaction_coeff(j: Mode, k: Mode) -> float:
    """The triad scalar c(j,k) = (j^perp . k)(|j|^-2 - |k|^-2)/2."""
    j = check_mode(j)
    k = check_mode(k)
    return 0.5 * dot(perp(j), k) * (1.0 / norm2(j) - 1.0 / norm2(k))


def biot_savart(w: SpectralField) -> VelocityField:
    """Velocity from vorticity: mode k of w feeds (k^perp/|k|^2) on mode -k."""
    basis = w.basis
    u1 = np.zeros(len(basis))
    u2 = np.zeros(len(basis))
    for i, k in enumerate(basis.modes):
        a = w.coeffs[i]
        if a == 0.0:
            continue
        m = basis.index[(-k[0], -k[1])]
        n2 = norm2(k)
        u1[m] += -k[1] / n2 * a
        u2[m] += k[0] / n2 * a
    return VelocityField(basis=basis, u1=u1, u2=u2)


def _product_terms(j: Mode, k: Mode):
    """Expand B(e_j, e_k) = sum of coeff * e_l exactly.

    The velocity factor is e_{-j} scaled by (j^perp . k)/|j|^2 and the
    gradient factor is the derivative trig of e_k; the product of two trig
    functions splits into modes j+k and j-k with half weights.
    """
    f = dot(perp(j), k) / norm2(j)
    if f == 0.0:
        return []
    # velocity trig factor e_{-j}: sin class gives cos(j.x), cos class -sin(j.x)
    if is_plus(j):
        t1_cos, a1 = True, 1.0
    else:
        t1_cos, a1 = False, -1.0
    # gradient trig factor of e_k: sin class gives cos(k.x), cos class -sin(k.x)
    if is_plus(k):
        t2_cos, a2 = True, 1.0
    else:
        t2_cos, a2 = False, -1.0
    amp = 0.5 * f * a1 * a2
    plus = (j[0] + k[0], j[1] + k[1])
    minus = (j[0] - k[0], j[1] - k[1])
    # product-to-sum on arguments (j.x) and (k.x)
    if t1_cos and t2_cos:        # cos cos = [cos(minus) + cos(plus)]/2
        raw = [("cos", minus, amp), ("cos", plus, amp)]
    elif t1_cos and not t2_cos:  # cos sin = [sin(plus) - sin(minus)]/2
        raw = [("sin", plus, amp), ("sin", minus, -amp)]
    elif not t1_cos and t2_cos:  # sin cos = [sin(plus) + sin(minus)]/2
        raw = [("sin", plus, amp), ("sin", minus, amp)]
    else:                        # sin sin = [cos(minus) - cos(plus)]/2
        raw = [("cos", minus, amp), ("cos", plus, -amp)]
    out = []
    for kind, m, a in raw:
        if m == (0, 0) or a == 0.0:
            continue  # constants and vanishing sines drop from the zero-mean space
        if kind == "sin":
            # sin(m.x) = e_m for m in the plus class, -e_{-m} otherwise
            out.append((m, a) if is_plus(m) else ((-m[0], -m[1]), -a))
        else:
            # cos(m.x) = e_{-m} for m in the plus class, e_m otherwise
            out.append(((-m[0], -m[1]), a) if is_plus(m) else (m, a))
    return out


class InteractionTable:
    """All admissible triples (j, k -> l) within a basis, with coefficients.

    Entry arrays are parallel: B(w, v) sums coeff * w[j] * v[k] into l.
    The table is the single source of truth for the nonlinearity, its
    adjoint, and the tangent linearization.
    """

    def __init__(self, basis: Basis):
        self.basis = basis
        j_idx, k_idx, l_idx, coeff = [], [], [], []
        for j in basis.modes:
            for k in basis.modes:
                for l, a in _product_terms(j, k):
                    if l not in basis.index:
                        continue  # Galerkin projection discards out-of-band output
                    j_idx.append(basis.index[j])
                    k_idx.append(basis.index[k])
                    l_idx.append(basis.index[l])
                    coeff.append(a)
        order = np.lexsort((np.array(l_idx), np.array(k_idx), np.array(j_idx)))
        self.j = np.array(j_idx, dtype=np.intp)[order]
        self.k = np.array(k_idx, dtype=np.intp)[order]
        self.l = np.array(l_idx, dtype=np.intp)[order]
        self.coeff = np.array(coeff, dtype=float)[order]

    def __len__(self) -> int:
        return len(self.coeff)

    def apply(self, w: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Coefficients of B(w, v)."""
        n = len(self.basis)
        vals = self.coeff * w[self.j] * v[self.k]
        return np.bincount(self.l, weights=vals, minlength=n)

    def apply_many_second(self, w: np.ndarray, V: np.ndarray) -> np.ndarray:
        """B(w, V[:, m]) for every column m of V, as one array."""
        n = len(self.basis)
        out = np.zeros((n, V.shape[1]))
        np.add.at(out, self.l, (self.coeff * w[self.j])[:, None] * V[self.k, :])
        return out

    def apply_many_first(self, V: np.ndarray, w: np.ndarray) -> np.ndarray:
        """B(V[:, m], w) for every column m of V."""
        n = len(self.basis)
        out = np.zeros((n, V.shape[1]))
        np.add.at(out, self.l, (self.coeff * w[self.k])[:, None] * V[self.j, :])
        return out

    def adjoint_apply(self, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Coefficients of C(v, w), the first-slot adjoint of B(., w).

        Direct triadic contraction: the same table summed into the j slot,
        so that <B(u,w), v> = <C(v,w), u> for every u on the basis.
        """
        n = len(self.basis)
        vals = self.coeff * w[self.k] * v[self.l]
        return np.bincount(self.j, weights=vals, minlength=n)

    def adjoint_apply_many(self, V: np.ndarray, w: np.ndarray) -> np.ndarray:
        """C(V[:, m], w) for every column m of V."""
        n = len(self.basis)
        out = np.zeros((n, V.shape[1]))
        np.add.at(out, self.j, (self.coeff * w[self.k])[:, None] * V[self.l, :])
        return out

    def b_matrix_first_slot(self, w: np.ndarray) -> np.ndarray:
        """Dense matrix of u -> B(u, w)."""
        n = len(self.basis)
        m = np.zeros((n, n))
        np.add.at(m, (self.l, self.j), self.coeff * w[self.k])
        return m

    def linearization(self, w: np.ndarray) -> np.ndarray:
        """Dense matrix of v -> -B(w, v) - B(v, w), the tangent operator's
        non-diagonal part."""
        n = len(self.basis)
        m = np.zeros((n, n))
        np.add.at(m, (self.l, self.k), -self.coeff * w[self.j])
        np.add.at(m, (self.l, self.j), -self.coeff * w[self.k])
        return m

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["j1", "j2", "k1", "k2", "l1", "l2", "coeff"])
            modes = self.basis.modes
            for j, k, l, c in zip(self.j, self.k, self.l, self.coeff):
                writer.writerow([*modes[j], *modes[k], *modes[l], repr(c)])


_TABLE_CACHE: dict[tuple, InteractionTable] = {}


def build_interaction_table(basis: Basis) -> InteractionTable:
    key = basis.modes
    table = _TABLE_CACHE.get(key)
    if table is None or table.basis is not basis:
        table = InteractionTable(basis)
        _TABLE_CACHE[key] = table
    return table


def nonlinearity_B(w: SpectralField, v: SpectralField) -> SpectralField:
    """Galerkin projection of (K(w) . grad) v."""
    _check_same_basis(w, v)
    table = build_interaction_table(w.basis)
    return SpectralField(w.basis, table.apply(w.coeffs, v.coeffs))


def adjoint_C(v: SpectralField, w: SpectralField) -> SpectralField:
    """The L2-adjoint of u -> B(u, w), applied to v."""
    _check_same_basis(v, w)
    table = build_interaction_table(v.basis)
    return SpectralField(v.basis, table.adjoint_apply(v.coeffs, w.coeffs))
