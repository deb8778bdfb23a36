"""SO(3) and SE_2(3) primitives.

An SE_2(3) element packs attitude ``R``, world-frame velocity ``v`` and
world-frame position ``p`` into the 5x5 matrix::

    [[R, v, p],
     [0, 1, 0],
     [0, 0, 1]]

Tangent vectors are 9-vectors ordered ``(xi_R, xi_v, xi_p)``. Every 9x9
matrix in the package (covariances, adjoints, Jacobians) uses that order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SMALL_ANGLE = 1e-7

ROT = slice(0, 3)
VEL = slice(3, 6)
POS = slice(6, 9)


def skew(v) -> np.ndarray:
    """Cross-product matrix: ``skew(v) @ w == np.cross(v, w)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _rodrigues_coeffs(theta: float) -> tuple[float, float, float]:
    # Coefficients of W and W^2 in exp(W) and in the left Jacobian.
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0
    s, c = np.sin(theta), np.cos(theta)
    t2 = theta * theta
    return s / theta, (1.0 - c) / t2, (theta - s) / (t2 * theta)


def so3_exp(w) -> np.ndarray:
    """Rotation matrix ``exp(skew(w))`` via Rodrigues' formula."""
    w = np.asarray(w, dtype=float)
    W = skew(w)
    a, b, _ = _rodrigues_coeffs(float(np.linalg.norm(w)))
    return np.eye(3) + a * W + b * (W @ W)


def so3_left_jacobian(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    W = skew(w)
    _, b, c = _rodrigues_coeffs(float(np.linalg.norm(w)))
    return np.eye(3) + b * W + c * (W @ W)


def wedge(xi) -> np.ndarray:
    """Map a tangent 9-vector to its 5x5 Lie-algebra matrix."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros((5, 5))
    out[:3, :3] = skew(xi[ROT])
    out[:3, 3] = xi[VEL]
    out[:3, 4] = xi[POS]
    return out


@dataclass(frozen=True)
class GroupElement:
    """Element of SE_2(3) stored as its three blocks."""

    R: np.ndarray
    v: np.ndarray
    p: np.ndarray

    @classmethod
    def identity(cls) -> GroupElement:
        return cls(np.eye(3), np.zeros(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, X) -> GroupElement:
        X = np.asarray(X, dtype=float)
        return cls(X[:3, :3].copy(), X[:3, 3].copy(), X[:3, 4].copy())

    def matrix(self) -> np.ndarray:
        X = np.eye(5)
        X[:3, :3] = self.R
        X[:3, 3] = self.v
        X[:3, 4] = self.p
        return X

    def __matmul__(self, other: GroupElement) -> GroupElement:
        return compose(self, other)


def se23_exp(xi) -> GroupElement:
    """Closed-form exponential of ``wedge(xi)``.

    The rotation block is Rodrigues; the velocity and position columns are
    the SO(3) left Jacobian applied to ``xi_v`` and ``xi_p``.
    """
    xi = np.asarray(xi, dtype=float)
    phi = xi[ROT]
    W = skew(phi)
    W2 = W @ W
    a, b, c = _rodrigues_coeffs(float(np.linalg.norm(phi)))
    R = np.eye(3) + a * W + b * W2
    J = np.eye(3) + b * W + c * W2
    return GroupElement(R, J @ xi[VEL], J @ xi[POS])


def inverse(X: GroupElement) -> GroupElement:
    Rt = X.R.T
    return GroupElement(Rt, -Rt @ X.v, -Rt @ X.p)


def compose(A: GroupElement, B: GroupElement) -> GroupElement:
    return GroupElement(A.R @ B.R, A.R @ B.v + A.v, A.R @ B.p + A.p)


def adjoint(X: GroupElement) -> np.ndarray:
    """9x9 adjoint: ``wedge(adjoint(X) @ xi) == X wedge(xi) X^-1``."""
    R = X.R
    Ad = np.zeros((9, 9))
    Ad[ROT, ROT] = R
    Ad[VEL, VEL] = R
    Ad[POS, POS] = R
    Ad[VEL, ROT] = skew(X.v) @ R
    Ad[POS, ROT] = skew(X.p) @ R
    return Ad


def is_rotation(R, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return (
        np.linalg.norm(R.T @ R - np.eye(3)) <= tol
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


def yaw_rotation(yaw: float) -> np.ndarray:
    return so3_exp((0.0, 0.0, yaw))


def rotation_to_quaternion(R) -> np.ndarray:
    """Unit quaternion ``(w, x, y, z)`` with ``w >= 0``."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = 2.0 * np.sqrt(1.0 + R[i, i] - R[j, j] - R[k, k])
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def quaternion_to_rotation(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
