"""Fixed quadrature rules: symmetric triangle rules and Gauss rules on edges.

Triangle rules are given in barycentric-derived reference coordinates
(xi, eta) on the triangle {xi >= 0, eta >= 0, xi + eta <= 1}, with weights
summing to 1 (i.e. normalised by the reference area 1/2 times 2).
"""

from __future__ import annotations

import numpy as np

# Dunavant rule 4: 6 points, exact for polynomials up to degree 4.
_TRI4_BARY = [
    (0.108103018168070, 0.445948490915965, 0.223381589678011),
    (0.816847572980459, 0.091576213509771, 0.109951743655322),
]

# Dunavant rule 6: 12 points, exact up to degree 6. Used for error norms.
_TRI6_BARY = [
    (0.501426509658179, 0.249286745170910, 0.116786275726379),
    (0.873821971016996, 0.063089014491502, 0.050844906370207),
]
_TRI6_ASYM = (0.053145049844817, 0.310352451033784, 0.636502499121399, 0.082851075618374)


def _expand_symmetric(groups):
    pts, wts = [], []
    for a, b, w in groups:
        for lam in ((a, b, b), (b, a, b), (b, b, a)):
            pts.append((lam[1], lam[2]))
            wts.append(w)
    return pts, wts


def _triangle_rule(groups, asym=None):
    pts, wts = _expand_symmetric(groups)
    if asym is not None:
        a, b, c, w = asym
        for lam in ((a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)):
            pts.append((lam[1], lam[2]))
            wts.append(w)
    return np.array(pts), np.array(wts)


TRI_POINTS_DEG4, TRI_WEIGHTS_DEG4 = _triangle_rule(_TRI4_BARY)
TRI_POINTS_DEG6, TRI_WEIGHTS_DEG6 = _triangle_rule(_TRI6_BARY, _TRI6_ASYM)


def triangle_rule(degree: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Return (points, weights) on the reference triangle; weights sum to 1."""
    if degree <= 4:
        return TRI_POINTS_DEG4, TRI_WEIGHTS_DEG4
    return TRI_POINTS_DEG6, TRI_WEIGHTS_DEG6


def gauss_rule(npoints: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule on [-1, 1]; exact up to degree 2*npoints - 1."""
    if npoints < 1:
        raise ValueError(f"need at least one Gauss point, got {npoints}")
    return np.polynomial.legendre.leggauss(npoints)
