"""SO(3) and SE_2(3) primitives.

Group elements are plain ``(5, 5)`` float64 arrays laid out as::

    [[R, v, p],
     [0, 1, 0],
     [0, 0, 1]]

and tangent vectors are ``(9,)`` arrays ordered ``(omega, v, p)``.  Every
function broadcasts over leading batch dimensions, so ``exp_se23`` accepts
``(..., 9)`` and returns ``(..., 5, 5)``.
"""

from __future__ import annotations

import numpy as np

from .errors import NotARotation, NotInAlgebra, NotInGroup

SMALL_ANGLE = 1e-8
# Coefficients that cancel to O(theta^k) are switched to series earlier.
_SERIES_ANGLE = 1e-2
ORTHO_TOL = 1e-9
ALGEBRA_TOL = 1e-12


def _generators() -> np.ndarray:
    g = np.zeros((9, 5, 5))
    # rotational generators: hat3(e_i)
    g[0, 2, 1], g[0, 1, 2] = 1.0, -1.0
    g[1, 0, 2], g[1, 2, 0] = 1.0, -1.0
    g[2, 1, 0], g[2, 0, 1] = 1.0, -1.0
    for i in range(3):
        g[3 + i, i, 3] = 1.0
        g[6 + i, i, 4] = 1.0
    g.setflags(write=False)
    return g


GENERATORS = _generators()
"""The nine basis matrices G_1..G_9 of se_2(3), shape ``(9, 5, 5)``."""


def hat3(phi: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix of ``phi`` (shape ``(..., 3)``)."""
    phi = np.asarray(phi, dtype=float)
    out = np.zeros(phi.shape[:-1] + (3, 3))
    x, y, z = phi[..., 0], phi[..., 1], phi[..., 2]
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


def vee3(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


def hat(xi: np.ndarray) -> np.ndarray:
    """Map ``(..., 9)`` coordinates to ``(..., 5, 5)`` algebra elements."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros(xi.shape[:-1] + (5, 5))
    out[..., :3, :3] = hat3(xi[..., 0:3])
    out[..., :3, 3] = xi[..., 3:6]
    out[..., :3, 4] = xi[..., 6:9]
    return out


def vee(m: np.ndarray, tol: float = ALGEBRA_TOL) -> np.ndarray:
    """Inverse of :func:`hat`; raises ``NotInAlgebra`` on a bad pattern."""
    m = np.asarray(m, dtype=float)
    if m.shape[-2:] != (5, 5):
        raise NotInAlgebra(f"expected (..., 5, 5), got {m.shape}")
    rot = m[..., :3, :3]
    skew_err = np.abs(rot + np.swapaxes(rot, -1, -2)).max(initial=0.0)
    lower_err = np.abs(m[..., 3:, :]).max(initial=0.0)
    if not (skew_err <= tol and lower_err <= tol):
        raise NotInAlgebra(
            f"not in se_2(3): skew residual {skew_err:.3g}, lower rows {lower_err:.3g}"
        )
    return np.concatenate([vee3(rot), m[..., :3, 3], m[..., :3, 4]], axis=-1)


def _theta(phi):
    return np.sqrt(np.sum(phi * phi, axis=-1))


def _so3_coeffs(theta):
    """sin(t)/t, (1 - cos t)/t^2 and (t - sin t)/t^3, stable near zero."""
    small = theta < SMALL_ANGLE
    series = theta < _SERIES_ANGLE
    t = np.where(small, 1.0, theta)
    t2 = theta * theta
    a = np.where(small, 1.0 - t2 / 6.0, np.sin(t) / t)
    half = np.sin(0.5 * t) / t
    b = np.where(small, 0.5 - t2 / 24.0, 2.0 * half * half)
    ts = np.where(series, 1.0, theta)
    c = np.where(
        series,
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0,
        (ts - np.sin(ts)) / ts**3,
    )
    return a, b, c


def exp_so3(phi: np.ndarray) -> np.ndarray:
    """Rodrigues' formula, ``(..., 3) -> (..., 3, 3)``."""
    phi = np.asarray(phi, dtype=float)
    a, b, _ = _so3_coeffs(_theta(phi))
    k = hat3(phi)
    eye = np.broadcast_to(np.eye(3), k.shape)
    return eye + a[..., None, None] * k + b[..., None, None] * (k @ k)


def left_jacobian_so3(phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    _, b, c = _so3_coeffs(_theta(phi))
    k = hat3(phi)
    eye = np.broadcast_to(np.eye(3), k.shape)
    return eye + b[..., None, None] * k + c[..., None, None] * (k @ k)


def right_jacobian_so3(phi: np.ndarray) -> np.ndarray:
    return left_jacobian_so3(-np.asarray(phi, dtype=float))


def left_jacobian_inv_so3(phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    theta = _theta(phi)
    series = theta < _SERIES_ANGLE
    t = np.where(series, 1.0, theta)
    t2 = theta * theta
    d = np.where(
        series,
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0,
        1.0 / (t * t) - 1.0 / (2.0 * t * np.tan(0.5 * t)),
    )
    k = hat3(phi)
    eye = np.broadcast_to(np.eye(3), k.shape)
    return eye - 0.5 * k + d[..., None, None] * (k @ k)


def is_rotation(r: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    r = np.asarray(r, dtype=float)
    if r.shape[-2:] != (3, 3) or not np.all(np.isfinite(r)):
        return False
    eye = np.eye(3)
    ortho = np.sqrt(np.sum((np.swapaxes(r, -1, -2) @ r - eye) ** 2, axis=(-2, -1)))
    det = np.linalg.det(r)
    return bool(np.all(ortho <= tol) and np.all(np.abs(det - 1.0) <= tol))


def log_so3(r: np.ndarray, tol: float = ORTHO_TOL) -> np.ndarray:
    """Rotation vector of ``r`` with angle in ``[0, pi]``.

    Near ``pi`` the axis is read off the symmetric part (largest diagonal
    entry of ``a a^T``) because the skew part vanishes there.
    """
    r = np.asarray(r, dtype=float)
    if not is_rotation(r, tol):
        raise NotARotation("matrix is not a rotation within tolerance")
    skew = vee3(r - np.swapaxes(r, -1, -2))  # 2 sin(theta) a
    s = 0.5 * _theta(skew)
    c = 0.5 * (np.trace(r, axis1=-2, axis2=-1) - 1.0)
    theta = np.arctan2(s, c)

    small = theta < SMALL_ANGLE
    safe_s = np.where(small, 1.0, s)
    scale = np.where(small, 0.5 * (1.0 + theta * theta / 6.0), theta / (2.0 * safe_s))
    out = scale[..., None] * skew

    near_pi = (c < 0.0) & (s < 0.1)
    if np.any(near_pi):
        rs = r[near_pi]
        cs = c[near_pi]
        sym = 0.5 * (rs + np.swapaxes(rs, -1, -2))
        aat = (sym - cs[:, None, None] * np.eye(3)) / (1.0 - cs)[:, None, None]
        diag = np.diagonal(aat, axis1=-2, axis2=-1)
        k = np.argmax(diag, axis=-1)
        idx = np.arange(len(k))
        axis = aat[idx, :, k] / np.sqrt(diag[idx, k])[:, None]
        sign = np.where(np.sum(axis * skew[near_pi], axis=-1) < 0.0, -1.0, 1.0)
        out[near_pi] = (sign * theta[near_pi])[:, None] * axis
    return out


def _q_matrix(phi, rho):
    """Coupling block of the SE(3)-style left Jacobian for one column."""
    theta = _theta(phi)
    series = theta < _SERIES_ANGLE
    t = np.where(series, 1.0, theta)
    t2 = theta * theta
    a = np.where(series, 1 / 6 - t2 / 120 + t2 * t2 / 5040, (t - np.sin(t)) / t**3)
    b = np.where(
        series,
        1 / 24 - t2 / 720 + t2 * t2 / 40320,
        (t * t + 2 * np.cos(t) - 2) / (2 * t**4),
    )
    c = np.where(
        series,
        1 / 120 - t2 / 2520 + t2 * t2 / 120960,
        (2 * t - 3 * np.sin(t) + t * np.cos(t)) / (2 * t**5),
    )
    px = hat3(phi)
    rx = hat3(rho)
    pr = px @ rx
    rp = rx @ px
    prp = pr @ px
    pp = px @ px
    a, b, c = a[..., None, None], b[..., None, None], c[..., None, None]
    return (
        0.5 * rx
        + a * (pr + rp + prp)
        + b * (pp @ rx + rp @ px - 3.0 * prp)
        + c * (prp @ px + pp @ rx @ px)
    )


def left_jacobian_se23(xi: np.ndarray) -> np.ndarray:
    """``exp(xi + d) ~= exp(J_l(xi) d) exp(xi)``; shape ``(..., 9, 9)``."""
    xi = np.asarray(xi, dtype=float)
    phi = xi[..., 0:3]
    jl = left_jacobian_so3(phi)
    out = np.zeros(xi.shape[:-1] + (9, 9))
    for blk in range(3):
        out[..., 3 * blk : 3 * blk + 3, 3 * blk : 3 * blk + 3] = jl
    out[..., 3:6, 0:3] = _q_matrix(phi, xi[..., 3:6])
    out[..., 6:9, 0:3] = _q_matrix(phi, xi[..., 6:9])
    return out


def right_jacobian_se23(xi: np.ndarray) -> np.ndarray:
    """``exp(xi + d) ~= exp(xi) exp(J_r(xi) d)``."""
    return left_jacobian_se23(-np.asarray(xi, dtype=float))


def exp_se23(xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    phi = xi[..., 0:3]
    theta = _theta(phi)
    a, b, c = _so3_coeffs(theta)
    k = hat3(phi)
    kk = k @ k
    eye = np.broadcast_to(np.eye(3), k.shape)
    out = np.zeros(xi.shape[:-1] + (5, 5))
    out[..., :3, :3] = eye + a[..., None, None] * k + b[..., None, None] * kk
    jl = eye + b[..., None, None] * k + c[..., None, None] * kk
    out[..., :3, 3] = np.einsum("...ij,...j->...i", jl, xi[..., 3:6])
    out[..., :3, 4] = np.einsum("...ij,...j->...i", jl, xi[..., 6:9])
    out[..., 3, 3] = 1.0
    out[..., 4, 4] = 1.0
    return out


def check_group(x: np.ndarray, tol: float = ORTHO_TOL) -> None:
    x = np.asarray(x, dtype=float)
    if x.shape[-2:] != (5, 5):
        raise NotInGroup(f"expected (..., 5, 5), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NotInGroup("non-finite entries")
    lower = np.zeros((2, 5))
    lower[0, 3] = lower[1, 4] = 1.0
    if not np.all(x[..., 3:, :] == lower):
        raise NotInGroup("lower rows are not the canonical affine rows")
    if not is_rotation(x[..., :3, :3], tol):
        raise NotInGroup("rotation block fails orthonormality or determinant check")


def is_group(x: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    try:
        check_group(x, tol)
    except NotInGroup:
        return False
    return True


def log_se23(x: np.ndarray, tol: float = ORTHO_TOL) -> np.ndarray:
    check_group(x, tol)
    x = np.asarray(x, dtype=float)
    phi = log_so3(x[..., :3, :3], tol)
    jinv = left_jacobian_inv_so3(phi)
    v = np.einsum("...ij,...j->...i", jinv, x[..., :3, 3])
    p = np.einsum("...ij,...j->...i", jinv, x[..., :3, 4])
    return np.concatenate([phi, v, p], axis=-1)


def identity() -> np.ndarray:
    return np.eye(5)


def make_element(r, v, p) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    p = np.asarray(p, dtype=float)
    batch = np.broadcast_shapes(r.shape[:-2], v.shape[:-1], p.shape[:-1])
    out = np.zeros(batch + (5, 5))
    out[..., :3, :3] = r
    out[..., :3, 3] = v
    out[..., :3, 4] = p
    out[..., 3, 3] = 1.0
    out[..., 4, 4] = 1.0
    return out


def compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.asarray(a, dtype=float) @ np.asarray(b, dtype=float)


def inverse(a: np.ndarray) -> np.ndarray:
    """Closed-form inverse ``(R^T, -R^T v, -R^T p)``."""
    a = np.asarray(a, dtype=float)
    rt = np.swapaxes(a[..., :3, :3], -1, -2)
    out = np.zeros_like(a)
    out[..., :3, :3] = rt
    out[..., :3, 3:5] = -(rt @ a[..., :3, 3:5])
    out[..., 3, 3] = 1.0
    out[..., 4, 4] = 1.0
    return out


def adjoint(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = x[..., :3, :3]
    out = np.zeros(x.shape[:-2] + (9, 9))
    for blk in range(3):
        out[..., 3 * blk : 3 * blk + 3, 3 * blk : 3 * blk + 3] = r
    out[..., 3:6, 0:3] = hat3(x[..., :3, 3]) @ r
    out[..., 6:9, 0:3] = hat3(x[..., :3, 4]) @ r
    return out


def rotation_angle(r: np.ndarray) -> np.ndarray:
    """Geodesic angle of a rotation, robust across ``[0, pi]``."""
    r = np.asarray(r, dtype=float)
    s = 0.5 * _theta(vee3(r - np.swapaxes(r, -1, -2)))
    c = 0.5 * (np.trace(r, axis1=-2, axis2=-1) - 1.0)
    return np.arctan2(s, c)
