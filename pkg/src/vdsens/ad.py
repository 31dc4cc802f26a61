"""Forward-mode automatic differentiation with vector dual numbers.

A :class:`Dual` carries a value array ``val`` of shape ``S`` and a derivative
array ``der`` of shape ``S + (N,)``, one trailing slot per seeded direction.
The model right-hand sides are written against the helpers in this module
(``sin``, ``wsum``, ``concatenate`` ...) so that the same code runs on plain
floats, on batched numpy arrays and on duals.  Value arithmetic on duals is
performed with exactly the same numpy operations as the plain path, which
keeps state trajectories bit-identical whether or not sensitivities are
propagated.
"""

from __future__ import annotations

import numpy as np


class Dual:
    __slots__ = ("val", "der")
    __array_ufunc__ = None  # make ndarray <op> Dual dispatch to our reflected ops

    def __init__(self, val, der):
        self.val = val
        self.der = der

    @property
    def shape(self):
        return self.val.shape

    def __repr__(self):
        return f"Dual(val={self.val!r}, der_shape={self.der.shape})"

    def __getitem__(self, idx):
        if isinstance(idx, tuple) and any(i is Ellipsis for i in idx):
            return Dual(self.val[idx], self.der[idx + (slice(None),)])
        return Dual(self.val[idx], self.der[idx])

    def __len__(self):
        return len(self.val)

    # comparisons act on values only
    def __lt__(self, other):
        return self.val < value(other)

    def __le__(self, other):
        return self.val <= value(other)

    def __gt__(self, other):
        return self.val > value(other)

    def __ge__(self, other):
        return self.val >= value(other)

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __pos__(self):
        return self

    def __abs__(self):
        return Dual(np.abs(self.val), self.der * np.sign(self.val)[..., None])

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.der + other.der)
        val = self.val + other
        return Dual(val, _expand(self.der, val))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.der - other.der)
        val = self.val - other
        return Dual(val, _expand(self.der, val))

    def __rsub__(self, other):
        val = other - self.val
        return Dual(val, _expand(-self.der, val))

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.val * other.val,
                self.der * other.val[..., None] + other.der * self.val[..., None],
            )
        other = np.asarray(other)
        return Dual(self.val * other, self.der * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            val = self.val / other.val
            return Dual(val, (self.der - val[..., None] * other.der) / other.val[..., None])
        other = np.asarray(other)
        return Dual(self.val / other, self.der / other[..., None])

    def __rtruediv__(self, other):
        val = other / self.val
        return Dual(val, -val[..., None] * self.der / self.val[..., None])

    def __pow__(self, n):
        if isinstance(n, Dual):
            raise TypeError("dual exponents are not supported")
        return Dual(self.val**n, (n * self.val ** (n - 1))[..., None] * self.der)


def _expand(der, val):
    shape = np.shape(val) + der.shape[-1:]
    if der.shape == shape:
        return der
    return np.broadcast_to(der, shape)


def is_dual(x) -> bool:
    return isinstance(x, Dual)


def value(x):
    """Strip derivative information."""
    return x.val if isinstance(x, Dual) else x


def _lift(x, n_dir):
    if isinstance(x, Dual):
        return x
    x = np.asarray(x, dtype=float)
    return Dual(x, np.zeros(x.shape + (n_dir,)))


def _n_dir(items):
    for it in items:
        if isinstance(it, Dual):
            return it.der.shape[-1]
    return None


def sin(x):
    if isinstance(x, Dual):
        return Dual(np.sin(x.val), np.cos(x.val)[..., None] * x.der)
    return np.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(np.cos(x.val), -np.sin(x.val)[..., None] * x.der)
    return np.cos(x)


def tan(x):
    if isinstance(x, Dual):
        t = np.tan(x.val)
        return Dual(t, (1.0 + t * t)[..., None] * x.der)
    return np.tan(x)


def arctan(x):
    if isinstance(x, Dual):
        return Dual(np.arctan(x.val), (1.0 / (1.0 + x.val * x.val))[..., None] * x.der)
    return np.arctan(x)


def sqrt(x):
    if isinstance(x, Dual):
        s = np.sqrt(x.val)
        return Dual(s, (0.5 / s)[..., None] * x.der)
    return np.sqrt(x)


def where(cond, a, b):
    """Elementwise select; derivatives follow the selected branch."""
    n = _n_dir((a, b))
    if n is None:
        return np.where(cond, a, b)
    a, b = _lift(a, n), _lift(b, n)
    cond = np.asarray(cond)
    return Dual(np.where(cond, a.val, b.val), np.where(cond[..., None], a.der, b.der))


def wsum(x):
    """Sum over the trailing (wheel) axis, keeping it as length one."""
    if isinstance(x, Dual):
        return Dual(x.val.sum(axis=-1, keepdims=True), x.der.sum(axis=-2, keepdims=True))
    return np.sum(x, axis=-1, keepdims=True)


def concatenate(items):
    """Join values along the trailing axis, broadcasting leading (batch) axes."""
    n = _n_dir(items)
    if n is None:
        arrs = [np.asarray(i, dtype=float) for i in items]
        try:
            return np.concatenate(arrs, axis=-1)
        except ValueError:
            lead = np.broadcast_shapes(*(a.shape[:-1] for a in arrs))
            arrs = [np.broadcast_to(a, lead + a.shape[-1:]) for a in arrs]
            return np.concatenate(arrs, axis=-1)
    duals = [_lift(i, n) for i in items]
    try:
        return Dual(
            np.concatenate([d.val for d in duals], axis=-1),
            np.concatenate([d.der for d in duals], axis=-2),
        )
    except ValueError:
        lead = np.broadcast_shapes(*(d.val.shape[:-1] for d in duals))
        vals = [np.broadcast_to(d.val, lead + d.val.shape[-1:]) for d in duals]
        ders = [np.broadcast_to(d.der, lead + d.der.shape[-2:]) for d in duals]
        return Dual(np.concatenate(vals, axis=-1), np.concatenate(ders, axis=-2))


def seed(x, offset: int, n_dir: int) -> Dual:
    """Seed a 1-D vector as independent variables ``offset .. offset+len(x)``."""
    x = np.asarray(x, dtype=float)
    return Dual(x.copy(), np.eye(x.size, n_dir, k=offset))


def soft_abs(y, width):
    """C1 absolute value: exact for ``|y| >= width``, quadratic inside."""
    ay = abs(y)
    return where(value(ay) >= width, ay, y * y / (2.0 * width) + 0.5 * width)


def smooth_max(a, b, width):
    """C1 maximum of ``a`` and ``b``; exact once they differ by ``width`` or more."""
    return 0.5 * (a + b) + 0.5 * soft_abs(a - b, width)
