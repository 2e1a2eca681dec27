"""Independent reference computations used by the tests.

Everything here is written in plain Python (lists, loops, ``math``) and
shares no code with the package, so agreement is evidence rather than
tautology.
"""

import math
from bisect import bisect_right
from collections import Counter


# -- segment features --------------------------------------------------------

def features_bruteforce(vectors, rects):
    """``vectors``: list of (x, y, dx, dy); ``rects``: list of (x, y, w, h) in feature order.

    Returns the flat (P, LX, LY) list with None for the means of empty segments.
    """
    n = len(vectors)
    out = []
    for (rx, ry, rw, rh) in rects:
        inside = [(dx, dy) for (x, y, dx, dy) in vectors if rx <= x < rx + rw and ry <= y < ry + rh]
        k = len(inside)
        out.append(k / n)
        out.append(sum(d[0] for d in inside) / k if k else None)
        out.append(sum(d[1] for d in inside) / k if k else None)
    return out


# -- entropy and information gain -------------------------------------------

def entropy_of(labels):
    n = len(labels)
    h = 0.0
    for c in Counter(labels).values():
        p = c / n
        h -= p * math.log2(p)
    return h


def quantile_linear(sorted_vals, q):
    """Linear-interpolation quantile (the usual 'type 7' definition)."""
    n = len(sorted_vals)
    pos = q * (n - 1)
    lo = math.floor(pos)
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    return sorted_vals[lo] + (sorted_vals[hi] - sorted_vals[lo]) * frac


def equal_frequency_bins(values, bins):
    s = sorted(values)
    edges = sorted(set(quantile_linear(s, k / bins) for k in range(1, bins)))
    return [bisect_right(edges, v) for v in values]


def information_gain(values, labels, bins):
    b = equal_frequency_bins(values, bins)
    n = len(labels)
    cond = 0.0
    for v in set(b):
        sub = [lab for lab, bb in zip(labels, b) if bb == v]
        cond += len(sub) / n * entropy_of(sub)
    return entropy_of(labels) - cond


# -- exhaustive split search -------------------------------------------------

def gini_of(labels):
    n = len(labels)
    return 1.0 - sum((c / n) ** 2 for c in Counter(labels).values())


def best_split_bruteforce(rows, labels, criterion, min_leaf=1):
    """Best (feature, threshold) over every midpoint of every feature.

    Gain ratio for ``"entropy"``, impurity decrease for ``"gini"``; ties go
    to the lower feature, then the lower threshold.
    """
    n = len(rows)
    d = len(rows[0])
    best = None
    for j in range(d):
        vals = sorted(set(r[j] for r in rows))
        for a, b in zip(vals, vals[1:]):
            t = (a + b) / 2
            left = [lab for r, lab in zip(rows, labels) if r[j] <= t]
            right = [lab for r, lab in zip(rows, labels) if r[j] > t]
            if len(left) < min_leaf or len(right) < min_leaf:
                continue
            if criterion == "entropy":
                gain = entropy_of(labels) - (len(left) * entropy_of(left) + len(right) * entropy_of(right)) / n
                split_info = entropy_of(["L"] * len(left) + ["R"] * len(right))
                score = gain / split_info
            else:
                score = gini_of(labels) - (len(left) * gini_of(left) + len(right) * gini_of(right)) / n
            if best is None or score > best[2] + 1e-12:
                best = (j, t, score)
    return best


# -- SVM KKT check -----------------------------------------------------------

def kkt_violation(X, y, alpha, b, C):
    """Largest soft-margin KKT violation of a linear dual solution, plus |sum a_i y_i|."""
    n = len(y)
    d = len(X[0])
    w = [sum(alpha[i] * y[i] * X[i][k] for i in range(n)) for k in range(d)]
    worst = abs(sum(alpha[i] * y[i] for i in range(n)))
    for i in range(n):
        m = y[i] * (sum(w[k] * X[i][k] for k in range(d)) + b)
        if alpha[i] <= 1e-9 * C:
            v = max(0.0, 1.0 - m)
        elif alpha[i] >= C * (1 - 1e-9):
            v = max(0.0, m - 1.0)
        else:
            v = abs(m - 1.0)
        worst = max(worst, v)
    return worst


# -- small dense linear algebra ---------------------------------------------

def mat_inv(A):
    """Gauss-Jordan inverse with partial pivoting (lists of lists)."""
    n = len(A)
    M = [list(map(float, row)) + [1.0 if i == j else 0.0 for j in range(n)] for i, row in enumerate(A)]
    for c in range(n):
        p = max(range(c, n), key=lambda r: abs(M[r][c]))
        M[c], M[p] = M[p], M[c]
        piv = M[c][c]
        M[c] = [v / piv for v in M[c]]
        for r in range(n):
            if r != c:
                f = M[r][c]
                M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return [row[n:] for row in M]


def lda_scores(X, labels, classes, ridge, probes):
    n, d = len(X), len(X[0])
    means, counts = {}, {}
    for c in classes:
        rows = [x for x, lab in zip(X, labels) if lab == c]
        counts[c] = len(rows)
        means[c] = [sum(r[k] for r in rows) / len(rows) for k in range(d)]
    S = [[0.0] * d for _ in range(d)]
    for x, lab in zip(X, labels):
        diff = [x[k] - means[lab][k] for k in range(d)]
        for i in range(d):
            for j in range(d):
                S[i][j] += diff[i] * diff[j]
    dof = n - len(classes)
    S = [[S[i][j] / dof + (ridge if i == j else 0.0) for j in range(d)] for i in range(d)]
    Si = mat_inv(S)
    out = []
    for p in probes:
        row = []
        for c in classes:
            m = means[c]
            Sm = [sum(Si[i][j] * m[j] for j in range(d)) for i in range(d)]
            row.append(sum(p[i] * Sm[i] for i in range(d)) - 0.5 * sum(m[i] * Sm[i] for i in range(d))
                       + math.log(counts[c] / n))
        out.append(row)
    return out


def sym3_eigen(A):
    """Eigenpairs of a symmetric 3x3 matrix from its characteristic polynomial.

    Eigenvalues by the trigonometric solution of the cubic, descending;
    eigenvectors as normalised cross products of rows of ``A - lambda I``.
    """
    a, b, c = A[0][0], A[1][1], A[2][2]
    d, e, f = A[0][1], A[1][2], A[0][2]
    # det(A - x I) = -x^3 + c2 x^2 - c1 x + c0
    c2 = a + b + c
    c1 = a * b + a * c + b * c - d * d - e * e - f * f
    c0 = a * b * c + 2 * d * e * f - a * e * e - b * f * f - c * d * d
    # depressed cubic for x = t + c2/3
    p = c1 - c2 * c2 / 3.0
    q = -2.0 * c2 ** 3 / 27.0 + c2 * c1 / 3.0 - c0
    r = math.sqrt(-p / 3.0)
    arg = max(-1.0, min(1.0, 3.0 * q / (2.0 * p * r)))
    phi = math.acos(arg) / 3.0
    lams = sorted((c2 / 3.0 + 2.0 * r * math.cos(phi - 2.0 * math.pi * k / 3.0) for k in range(3)), reverse=True)
    vecs = []
    for lam in lams:
        M = [[A[i][j] - (lam if i == j else 0.0) for j in range(3)] for i in range(3)]
        best = None
        for i, j in ((0, 1), (0, 2), (1, 2)):
            u, v = M[i], M[j]
            cr = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
            nrm = math.sqrt(sum(t * t for t in cr))
            if best is None or nrm > best[0]:
                best = (nrm, cr)
        vecs.append([t / best[0] for t in best[1]])
    return lams, vecs
