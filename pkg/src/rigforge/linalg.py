"""Small fixed-size numerical kernels: a cyclic-Jacobi symmetric eigensolver
and quaternion helpers.

Everything here operates on 3x3 or 4x4 matrices and length-4 quaternion
arrays, so plain loops are fast enough and the results are bit-deterministic
across platforms. Quaternions are stored as (w, x, y, z) and canonicalized to
w >= 0, which keeps rotation angles in [0, pi].
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "jacobi_eigh",
    "quat_canonical",
    "quat_to_matrix",
    "quats_to_matrices",
    "quat_to_rotvec",
    "rotvec_to_quat",
    "quat_mul",
    "quat_pow",
    "rotation_between",
    "weighted_rigid_quat",
    "IDENTITY_QUAT",
]

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-12, max_sweeps: int = 64):
    """Eigendecomposition of a small symmetric matrix by cyclic Jacobi sweeps.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted in
    descending order and eigenvectors as the corresponding columns. Sweeps
    stop once the off-diagonal Frobenius norm drops below ``tol`` relative to
    the matrix norm.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T, atol=1e-9 * (1.0 + np.abs(a).max())):
        raise ValueError("jacobi_eigh expects a square symmetric matrix")
    v = np.eye(n)
    scale = math.sqrt(float((a * a).sum()))
    if scale == 0.0:
        return np.zeros(n), v

    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += 2.0 * a[p, q] * a[p, q]
        if math.sqrt(off) <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1.0e150:  # theta*theta would overflow; use the limit
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                a[p, p] -= t * apq
                a[q, q] += t * apq
                a[p, q] = a[q, p] = 0.0
                for k in range(n):
                    if k == p or k == q:
                        continue
                    akp, akq = a[k, p], a[k, q]
                    a[k, p] = a[p, k] = c * akp - s * akq
                    a[k, q] = a[q, k] = s * akp + c * akq
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]

    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def quat_canonical(q: np.ndarray) -> np.ndarray:
    """Normalize and flip sign so w >= 0 (first nonzero component positive)."""
    q = np.asarray(q, dtype=float)
    norm = math.sqrt(float(q @ q))
    if norm == 0.0:
        raise ValueError("zero quaternion")
    q = q / norm
    for comp in q:
        if comp > 0.0:
            return q
        if comp < 0.0:
            return -q
    return q


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quats_to_matrices(quats: np.ndarray) -> np.ndarray:
    """Vectorized quat_to_matrix for an (n, 4) array, returning (n, 3, 3)."""
    q = np.asarray(quats, dtype=float)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((len(q), 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def quat_to_rotvec(q: np.ndarray) -> np.ndarray:
    """Axis-angle vector (axis * angle) of a canonical quaternion; |result| in [0, pi]."""
    q = quat_canonical(q)
    sin_half = math.sqrt(float(q[1:] @ q[1:]))
    angle = 2.0 * math.atan2(sin_half, q[0])
    if sin_half < 1e-15:
        return np.zeros(3)
    return (angle / sin_half) * q[1:]


def rotvec_to_quat(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    angle = math.sqrt(float(v @ v))
    if angle < 1e-15:
        return IDENTITY_QUAT.copy()
    axis = v / angle
    half = 0.5 * angle
    return np.concatenate(([math.cos(half)], math.sin(half) * axis))


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a * b: the rotation that applies b first, then a."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_pow(q: np.ndarray, s: float) -> np.ndarray:
    """Rotation raised to fractional power s (slerp from identity)."""
    return rotvec_to_quat(s * quat_to_rotvec(q))


def rotation_between(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Minimal rotation taking unit vector u onto unit vector v."""
    c = float(np.dot(u, v))
    axis = np.cross(u, v)
    s = math.sqrt(float(axis @ axis))
    if s < 1e-12:
        if c > 0.0:
            return IDENTITY_QUAT.copy()
        # antiparallel: rotate by pi about a deterministic axis orthogonal to u
        pick = int(np.argmin(np.abs(u)))
        basis = np.zeros(3)
        basis[pick] = 1.0
        axis = np.cross(u, basis)
        axis /= math.sqrt(float(axis @ axis))
        return quat_canonical(np.concatenate(([0.0], axis)))
    return quat_canonical(np.concatenate(([1.0 + c], axis)))


def weighted_rigid_quat(p_centered: np.ndarray, q_centered: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted orthogonal Procrustes rotation as a unit quaternion.

    Solves for the rotation R maximizing sum_i w_i q_i . (R p_i) over centered
    correspondences, via the largest eigenvector of the 4x4 quaternion matrix
    built from the weighted cross-covariance. Always a proper rotation
    (det +1); callers handle rank-deficient inputs before getting here.
    """
    m = (weights[:, None] * p_centered).T @ q_centered
    sxx, sxy, sxz = m[0]
    syx, syy, syz = m[1]
    szx, szy, szz = m[2]
    n = np.array(
        [
            [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
            [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
            [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
            [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
        ]
    )
    _, vecs = jacobi_eigh(n, tol=1e-14)
    return quat_canonical(vecs[:, 0])
