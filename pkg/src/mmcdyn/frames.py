"""Park transformations at the fundamental (+w) and double (-2w) frequencies,
the 3w zero-sequence frame, the frame-coupling matrices, and element-wise
three-phase algebra.

Conventions (amplitude invariant, +sin q-row):

* k = +1: row angles theta + [0, -2pi/3, +2pi/3], rows scaled [2/3, 2/3, 1/3].
* k = -2: the reversed-sequence form with row angles -theta - [0, -2pi/3,
  +2pi/3]; this is the transform that maps balanced negative-sequence
  second-harmonic signals to constants.

In both cases the caller passes theta = k*w*t, and the frame-coupling identity
P(theta) * d/dt[P^-1(theta(t))] equals coupling_matrix("w") for k = +1 and
coupling_matrix("2w") for k = -2.
"""

from dataclasses import dataclass

import numpy as np

_SHIFT = np.array([0.0, -2.0 * np.pi / 3.0, 2.0 * np.pi / 3.0])
_VALID_K = (1, -2)


@dataclass(frozen=True)
class VecDqz:
    """A dqz vector tagged with its harmonic frame k in {+1, -2}.

    Linear operations between vectors of different frames are rejected.
    """

    d: float
    q: float
    z: float
    k: int

    def __post_init__(self):
        if self.k not in _VALID_K:
            raise ValueError("unsupported frame harmonic k=%r" % (self.k,))

    def as_array(self):
        return np.array([self.d, self.q, self.z], dtype=float)

    def _check(self, other):
        if self.k != other.k:
            raise ValueError("frame mismatch: k=%d vs k=%d" % (self.k, other.k))

    def __add__(self, other):
        self._check(other)
        return VecDqz(self.d + other.d, self.q + other.q, self.z + other.z,
                      self.k)

    def __sub__(self, other):
        self._check(other)
        return VecDqz(self.d - other.d, self.q - other.q, self.z - other.z,
                      self.k)

    def __mul__(self, scalar):
        return VecDqz(self.d * scalar, self.q * scalar, self.z * scalar,
                      self.k)

    __rmul__ = __mul__


def _angles(k, theta):
    if k == 1:
        return theta + _SHIFT
    if k == -2:
        return -theta - _SHIFT
    raise ValueError("unsupported frame harmonic k=%r (expected +1 or -2)"
                     % (k,))


def park_matrix(k, theta):
    """3x3 abc -> dqz matrix for frame harmonic k at angle theta = k*w*t."""
    ang = _angles(k, theta)
    return np.vstack([(2.0 / 3.0) * np.cos(ang),
                      (2.0 / 3.0) * np.sin(ang),
                      np.full(3, 1.0 / 3.0)])


def inv_park_matrix(k, theta):
    """3x3 dqz -> abc matrix, exact inverse of park_matrix."""
    ang = _angles(k, theta)
    return np.column_stack([np.cos(ang), np.sin(ang), np.ones(3)])


def to_dqz(x, k, theta):
    """Project a three-phase vector onto the dqz frame k at angle theta.

    x may be a length-3 array (returns a length-3 array) or a 3xN array of
    sampled waveforms with theta of length N (returns 3xN).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return park_matrix(k, theta) @ x
    # sampled waveforms: per-sample projection, vectorized
    th = np.asarray(theta, dtype=float)
    if k not in _VALID_K:
        raise ValueError("unsupported frame harmonic k=%r" % (k,))
    if k == 1:
        ang = th[None, :] + _SHIFT[:, None]
    else:
        ang = -th[None, :] - _SHIFT[:, None]
    c, s = np.cos(ang), np.sin(ang)
    d = (2.0 / 3.0) * np.sum(c * x, axis=0)
    q = (2.0 / 3.0) * np.sum(s * x, axis=0)
    z = np.mean(x, axis=0)
    return np.vstack([d, q, z])


def to_abc(v, k, theta):
    """Map a dqz vector (or 3xN sampled dqz channels) back to abc."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        return inv_park_matrix(k, theta) @ v
    th = np.asarray(theta, dtype=float)
    if k not in _VALID_K:
        raise ValueError("unsupported frame harmonic k=%r" % (k,))
    if k == 1:
        ang = th[None, :] + _SHIFT[:, None]
    else:
        ang = -th[None, :] - _SHIFT[:, None]
    return np.cos(ang) * v[0][None, :] + np.sin(ang) * v[1][None, :] \
        + v[2][None, :]


def coupling_matrix(kind, omega):
    """Frame-coupling matrix J for kind in {w, 2w, 3w, G}.

    J_w = [[0, w, 0], [-w, 0, 0], [0, 0, 0]]; J_2w = 2 J_w;
    J_3w = [[0, -3w], [3w, 0]]; J_G = blockdiag(J_w restricted to dq, J_3w).
    """
    w = float(omega)
    if kind == "w":
        return np.array([[0.0, w, 0.0], [-w, 0.0, 0.0], [0.0, 0.0, 0.0]])
    if kind == "2w":
        return 2.0 * coupling_matrix("w", w)
    if kind == "3w":
        return np.array([[0.0, -3.0 * w], [3.0 * w, 0.0]])
    if kind == "G":
        out = np.zeros((4, 4))
        out[:2, :2] = coupling_matrix("w", w)[:2, :2]
        out[2:, 2:] = coupling_matrix("3w", w)
        return out
    raise ValueError("unknown coupling kind %r (expected w, 2w, 3w or G)"
                     % (kind,))


def t3w(theta3):
    """The involutory 3w frame map [[cos, sin], [sin, -cos]] at theta3 = 3wt."""
    c, s = np.cos(theta3), np.sin(theta3)
    return np.array([[c, s], [s, -c]])


def ewise(a, b):
    """Element-wise (per-phase) product of two three-phase vectors."""
    return np.asarray(a, dtype=float) * np.asarray(b, dtype=float)
