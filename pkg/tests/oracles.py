"""Independent brute-force reference implementations used by the tests.

These stay deliberately naive (all-pairs minimization, direct voxel
enumeration, dense solves) so they share no code path with the package.
"""
import numpy as np


def brute_force_sq_edt(vol):
    """All-pairs minimum squared distance from every voxel to the surface set."""
    coords = vol.surface_coords().astype(np.int64)
    X, Y, Z = vol.dims
    gx, gy, gz = np.meshgrid(np.arange(X), np.arange(Y), np.arange(Z), indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    d2 = np.min(((pts[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2), axis=1)
    return d2.reshape(vol.dims)


def brute_force_volumes(vol, squared_radii):
    """Count voxels within each squared radius of the surface by enumeration."""
    d2 = brute_force_sq_edt(vol)
    return np.array([(d2 <= s).sum() for s in squared_radii], dtype=np.int64)


def legendre_three_square_count(smax):
    """Count integers in [0, smax] expressible as i^2+j^2+k^2.

    By Legendre's theorem the non-representable ones are exactly those of
    the form 4^a (8b + 7).
    """
    excluded = set()
    a = 1
    while a <= smax:
        v = 7 * a
        while v <= smax:
            excluded.add(v)
            v += 8 * a
        a *= 4
    return smax + 1 - len(excluded)


def dense_normal_equation_fit(design, y):
    """Plain dense normal-equation solve, independent of the package's path."""
    return np.linalg.solve(design.T @ design, design.T @ y)


def gaussian_diag_log_posterior(train_rows, train_labels, queries, n_classes):
    """Direct diagonal-Gaussian log posterior, mirroring the documented model."""
    global_var = train_rows.var(axis=0, ddof=1)
    floor = np.maximum(1e-9, 1e-6 * global_var)
    n = train_rows.shape[0]
    out = np.empty((queries.shape[0], n_classes))
    for c in range(n_classes):
        members = train_rows[train_labels == c]
        mu = members.mean(axis=0)
        var = np.maximum(members.var(axis=0, ddof=1), floor)
        ll = np.log(members.shape[0] / n)
        for qi, x in enumerate(queries):
            out[qi, c] = ll + np.sum(-0.5 * np.log(2 * np.pi * var)
                                     - (x - mu) ** 2 / (2 * var))
    return out


def dense_lda_scores(train_rows, train_labels, queries, n_classes, shrinkage):
    """Discriminant values from an explicit matrix inverse."""
    n, _ = train_rows.shape
    means = np.stack([train_rows[train_labels == c].mean(axis=0) for c in range(n_classes)])
    centered = train_rows - means[train_labels]
    pooled = centered.T @ centered / (n - n_classes)
    reg = (1 - shrinkage) * pooled + shrinkage * np.diag(np.diag(pooled))
    inv = np.linalg.inv(reg)
    priors = np.bincount(train_labels, minlength=n_classes) / n
    scores = np.empty((queries.shape[0], n_classes))
    for c in range(n_classes):
        w = inv @ means[c]
        scores[:, c] = queries @ w - 0.5 * means[c] @ w + np.log(priors[c])
    return scores
