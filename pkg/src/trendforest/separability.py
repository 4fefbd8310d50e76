"""2-D linear separability check: z-score, PCA to two axes, per-class convex hulls.

If the two class hulls in the projected plane touch or overlap, the classes
are reported as not linearly separable there.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SingleClassData, TooFewRows
from .indicators import FeatureMatrix


@dataclass
class Projection2D:
    points: np.ndarray  # (n, 2)
    labels: np.ndarray
    components: np.ndarray  # (2, n_features), orthonormal rows
    explained_variance: np.ndarray


@dataclass
class ConvexHull2D:
    vertices: list[tuple[float, float]]  # counter-clockwise

    def __len__(self):
        return len(self.vertices)

    def area(self) -> float:
        v = self.vertices
        if len(v) < 3:
            return 0.0
        s = 0.0
        for (x1, y1), (x2, y2) in zip(v, v[1:] + v[:1]):
            s += x1 * y2 - x2 * y1
        return s / 2.0


def standardize(X) -> np.ndarray:
    """Column z-scores with the sample (n - 1) standard deviation.

    Constant columns become zeros and trigger a warning.
    """
    X = np.asarray(getattr(X, "X", X), dtype=float)
    if len(X) < 2:
        raise TooFewRows("standardize needs at least 2 rows")
    mean = X.mean(axis=0)
    sd = X.std(axis=0, ddof=1)
    flat = sd <= 1e-12 * np.maximum(1.0, np.abs(mean))
    if flat.any():
        warnings.warn(f"constant feature column(s) {np.flatnonzero(flat).tolist()} set to 0",
                      RuntimeWarning, stacklevel=2)
    return np.where(flat, 0.0, (X - mean) / np.where(flat, 1.0, sd))


def pca_2d(Z, labels=None) -> Projection2D:
    """Project rows onto the top two eigenvectors of their sample covariance.

    Each component is signed so that its largest-magnitude coordinate is
    positive.
    """
    Z = np.asarray(Z, dtype=float)
    if len(Z) < 3:
        raise TooFewRows("PCA needs at least 3 rows")
    centered = Z - Z.mean(axis=0)
    cov = centered.T @ centered / (len(Z) - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals, kind="stable")[::-1][:2]
    comps = vecs[:, order].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1
    explained = np.clip(vals[order], 0.0, None)
    labels = np.zeros(len(Z), dtype=np.int64) if labels is None else np.asarray(labels)
    return Projection2D(centered @ comps.T, labels, comps, explained)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> ConvexHull2D:
    """Andrew's monotone chain; collinear boundary points are dropped."""
    pts = sorted({(float(x), float(y)) for x, y in points})
    if len(pts) <= 2:
        return ConvexHull2D(pts)
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    # Collinear input collapses to its two extremes.
    return ConvexHull2D(lower[:-1] + upper[:-1])


def _on_segment(p, q, r) -> bool:
    """q lies within the bounding box of segment pr (collinearity checked by caller)."""
    return min(p[0], r[0]) <= q[0] <= max(p[0], r[0]) and min(p[1], r[1]) <= q[1] <= max(p[1], r[1])


def _sign(v: float) -> int:
    return (v > 0) - (v < 0)


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Closed segments p1p2 and q1q2 share at least one point (degenerate ok)."""
    d1 = _sign(_cross(q1, q2, p1))
    d2 = _sign(_cross(q1, q2, p2))
    d3 = _sign(_cross(p1, p2, q1))
    d4 = _sign(_cross(p1, p2, q2))
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True
    if d1 == 0 and _on_segment(q1, p1, q2):
        return True
    if d2 == 0 and _on_segment(q1, p2, q2):
        return True
    if d3 == 0 and _on_segment(p1, q1, p2):
        return True
    if d4 == 0 and _on_segment(p1, q2, p2):
        return True
    return False


def _edges(v):
    if len(v) == 1:
        return [(v[0], v[0])]
    if len(v) == 2:
        return [(v[0], v[1])]
    return list(zip(v, v[1:] + v[:1]))


def point_in_hull(p, hull: ConvexHull2D) -> bool:
    """Closed containment test; 1- and 2-vertex hulls act as point/segment."""
    v = hull.vertices
    if len(v) < 3:
        return any(segments_intersect(a, b, p, p) for a, b in _edges(v))
    return all(_cross(a, b, p) >= 0 for a, b in _edges(v))


def hulls_intersect(a: ConvexHull2D, b: ConvexHull2D) -> bool:
    """True when the closed hulls share any point (edge crossing or nesting)."""
    va, vb = a.vertices, b.vertices
    if not va or not vb:
        return False
    for p1, p2 in _edges(va):
        for q1, q2 in _edges(vb):
            if segments_intersect(p1, p2, q1, q2):
                return True
    return point_in_hull(va[0], b) or point_in_hull(vb[0], a)


def lp_separable(points_a, points_b) -> bool:
    """Independent check: does some line strictly separate the two point sets?

    Solves the feasibility problem w.a - c >= 1, w.b - c <= -1.
    """
    from scipy.optimize import linprog

    a = np.asarray(points_a, dtype=float).reshape(-1, 2)
    b = np.asarray(points_b, dtype=float).reshape(-1, 2)
    # variables (w0, w1, c); constraints written as A_ub @ v <= b_ub
    A = np.vstack([np.column_stack([-a, np.ones(len(a))]),
                   np.column_stack([b, -np.ones(len(b))])])
    rhs = -np.ones(len(A))
    res = linprog(np.zeros(3), A_ub=A, b_ub=rhs, bounds=[(None, None)] * 3, method="highs")
    return res.status == 0


@dataclass
class SeparabilityReport:
    separable: bool
    hull_rise: ConvexHull2D
    hull_fall: ConvexHull2D
    projection: Projection2D

    def points_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("x", "y", "label"))
        for (x, y), lab in zip(self.projection.points, self.projection.labels):
            w.writerow((repr(float(x)), repr(float(y)), int(lab)))
        return buf.getvalue()

    def hulls_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("class", "x", "y", "order"))
        for cls, hull in ((1, self.hull_rise), (-1, self.hull_fall)):
            for k, (x, y) in enumerate(hull.vertices):
                w.writerow((cls, repr(x), repr(y), k))
        return buf.getvalue()


def separability_report(matrix: FeatureMatrix) -> SeparabilityReport:
    y = np.asarray(matrix.y)
    if not ((y == 1).any() and (y == -1).any()):
        raise SingleClassData("separability needs both classes")
    proj = pca_2d(standardize(matrix.X), y)
    rise = convex_hull(proj.points[y == 1])
    fall = convex_hull(proj.points[y == -1])
    return SeparabilityReport(not hulls_intersect(rise, fall), rise, fall, proj)
