"""
Quadrature rules: Gauss-Legendre, Gauss-Jacobi and geometrically graded rules
for integrands that behave like t**alpha near an endpoint, symmetric rules
on triangles and collapsed (Duffy) rules.
"""
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.special import roots_jacobi

from config import HarnessConfig
from .errors import NumericError

Rule = Tuple[np.ndarray, np.ndarray]


@lru_cache(maxsize=64)
def _legendre(n: int) -> Rule:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gauss_legendre(n: int, a: float = 0.0, b: float = 1.0) -> Rule:
    """n-point Gauss-Legendre rule on [a, b]."""
    if n < 1:
        raise NumericError(f"need at least one Gauss point, got {n}")
    x, w = _legendre(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def gauss_jacobi_endpoint(n: int, alpha: float, c: float) -> Rule:
    """
    Rule on (0, c) for g(t) = t**alpha * h(t) with h smooth.

    Nodes come from Gauss-Jacobi with weight (1+x)**alpha; the returned weights
    already divide out t**alpha so the rule is applied to g directly.
    """
    if not alpha > -1.0:
        raise NumericError(f"Gauss-Jacobi needs alpha > -1, got {alpha}")
    x, w = roots_jacobi(n, 0.0, alpha)
    t = 0.5 * c * (x + 1.0)
    weights = (0.5 * c) ** (1.0 + alpha) * w / t ** alpha
    return t, weights


@lru_cache(maxsize=128)
def graded_rule(alpha: float, ratio: float = None, depth: int = None, points: int = None) -> Rule:
    """
    Rule on [0, 1] graded geometrically toward t = 0.

    Cells [ratio**(k+1), ratio**k] get Gauss-Legendre; the last cell
    [0, ratio**depth] gets the Jacobi endpoint rule for exponent alpha.
    """
    ratio = HarnessConfig.GRADED_RATIO if ratio is None else ratio
    depth = HarnessConfig.GRADED_DEPTH if depth is None else depth
    points = HarnessConfig.GRADED_POINTS if points is None else points
    nodes, weights = [], []
    for k in range(depth):
        t, w = gauss_legendre(points, ratio ** (k + 1), ratio ** k)
        nodes.append(t)
        weights.append(w)
    t, w = gauss_jacobi_endpoint(points, alpha, ratio ** depth)
    nodes.append(t)
    weights.append(w)
    out = np.concatenate(nodes), np.concatenate(weights)
    out[0].setflags(write=False)
    out[1].setflags(write=False)
    return out


@lru_cache(maxsize=32)
def two_sided_graded_rule(ratio: float = None, depth: int = None, points: int = None) -> Rule:
    """Rule on [0, 1] graded toward both endpoints (no endpoint singularity assumed)."""
    ratio = HarnessConfig.GRADED_RATIO if ratio is None else ratio
    depth = max(1, (HarnessConfig.GRADED_DEPTH // 2) if depth is None else depth)
    points = HarnessConfig.GAUSS_ORDER if points is None else points
    t, w = graded_rule(0.0, ratio, depth, points)
    left_t, left_w = 0.5 * t, 0.5 * w
    nodes = np.concatenate((left_t, 1.0 - left_t[::-1]))
    weights = np.concatenate((left_w, left_w[::-1]))
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights




def collapsed_reference(lam: Rule, eta: Rule) -> Rule:
    """
    Collapsed (Duffy) rule on the reference triangle with roles (apex, a, b).

    P = apex + lam * ((a - apex) + eta * (b - a)); returns barycentric
    coordinates (Q, 3) in role order and weights (Q,) summing to 1/2, so the
    physical rule is obtained by scaling with 2|T|.
    """
    L, E = np.meshgrid(lam[0], eta[0], indexing="ij")
    W = np.outer(lam[1], eta[1]) * L
    L, E = L.ravel(), E.ravel()
    bary = np.column_stack((1.0 - L, L * (1.0 - E), L * E))
    return bary, W.ravel()


# Symmetric (Dunavant) rules on the triangle, all weights positive. Each orbit
# is (weight, a, b): a == b == 1/3 is the centroid, a == b a 3-point orbit,
# otherwise the 6 permutations of (a, b, 1 - a - b). Weights sum to 1.
_DUNAVANT = {
    1: ((1.0, 1.0 / 3.0, 1.0 / 3.0),),
    2: ((1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0),),
    4: ((0.223381589678011, 0.445948490915965, 0.445948490915965),
        (0.109951743655322, 0.091576213509771, 0.091576213509771)),
    5: ((0.225, 1.0 / 3.0, 1.0 / 3.0),
        (0.132394152788506, 0.470142064105115, 0.470142064105115),
        (0.125939180544827, 0.101286507323456, 0.101286507323456)),
    6: ((0.116786275726379, 0.249286745170910, 0.249286745170910),
        (0.050844906370207, 0.063089014491502, 0.063089014491502),
        (0.082851075618374, 0.310352451033784, 0.053145049844817)),
    8: ((0.144315607677787, 1.0 / 3.0, 1.0 / 3.0),
        (0.095091634267285, 0.459292588292723, 0.459292588292723),
        (0.103217370534718, 0.170569307751760, 0.170569307751760),
        (0.032458497623198, 0.050547228317031, 0.050547228317031),
        (0.027230314174435, 0.263112829634638, 0.008394777409958)),
}


def _orbit(a: float, b: float) -> list:
    c = 1.0 - a - b
    if np.isclose(a, 1.0 / 3.0) and np.isclose(b, 1.0 / 3.0):
        return [(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)]
    if a == b:
        return [(c, a, a), (a, c, a), (a, a, c)]
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


@lru_cache(maxsize=16)
def triangle_rule(degree: int = None) -> Rule:
    """
    Smooth-integrand rule exact for polynomials of total degree `degree`
    (the lowest tabulated symmetric rule at or above it, up to 8).
    Barycentric points (Q, 3) and weights summing to 1/2.
    """
    degree = HarnessConfig.TRIANGLE_DEGREE if degree is None else degree
    available = [d for d in sorted(_DUNAVANT) if d >= degree]
    if degree < 1 or not available:
        raise NumericError(f"no symmetric triangle rule of degree {degree}; supported 1..{max(_DUNAVANT)}")
    bary, weights = [], []
    for w, a, b in _DUNAVANT[available[0]]:
        points = _orbit(a, b)
        bary.extend(points)
        weights.extend([0.5 * w] * len(points))
    bary, weights = np.array(bary), np.array(weights)
    bary.setflags(write=False)
    weights.setflags(write=False)
    return bary, weights


@lru_cache(maxsize=16)
def tensor_triangle_rule(points: int) -> Rule:
    """Collapsed tensor Gauss with `points` per direction, for weights that vary quickly across a triangle."""
    lam = gauss_legendre(points)
    bary, w = collapsed_reference(lam, lam)
    bary.setflags(write=False)
    w.setflags(write=False)
    return bary, w


def edge_rule(p0: np.ndarray, p1: np.ndarray, n: int = None) -> Rule:
    """Gauss rule along straight segments (B, 2) -> points (B, n, 2), weights (B, n)."""
    n = HarnessConfig.EDGE_GAUSS_POINTS if n is None else n
    t, w = gauss_legendre(n)
    p0, p1 = np.atleast_2d(p0), np.atleast_2d(p1)
    length = np.linalg.norm(p1 - p0, axis=1)
    pts = p0[:, None, :] + t[None, :, None] * (p1 - p0)[:, None, :]
    return pts, length[:, None] * w[None, :]
