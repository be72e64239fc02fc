"""
Second-order forward-mode dual numbers over a batch.

A Dual2 carries a value (batch shape), its gradient (batch, n) and Hessian
(batch, n, n) with respect to n seeded variables. Arithmetic and the module
level functions below propagate all three, so an energy written once with
`exp`, `log`, ... runs on plain floats and arrays as well as on duals.
"""

import numpy as np


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


class Dual2:
    __slots__ = ('val', 'grad', 'hess')
    # numpy arrays on the left defer to the reflected operators
    __array_ufunc__ = None

    def __init__(self, val, grad, hess):
        self.val = val
        self.grad = grad
        self.hess = hess

    @classmethod
    def variables(cls, x: np.ndarray):
        """Seed one dual per trailing component of x, shape (..., n)."""
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        batch = x.shape[:-1]
        zeros = np.broadcast_to(np.zeros(1), batch + (n, n))
        eye = np.eye(n)
        return [cls(x[..., i], np.broadcast_to(eye[i], batch + (n,)), zeros) for i in range(n)]

    def __repr__(self):
        return f"Dual2(val={self.val!r})"

    # -------------------------------------------------------
    # chain rule for scalar functions
    # -------------------------------------------------------
    def _chain(self, f0, f1, f2):
        f1, f2 = np.asarray(f1), np.asarray(f2)
        return Dual2(
            f0,
            f1[..., None] * self.grad,
            f1[..., None, None] * self.hess + f2[..., None, None] * _outer(self.grad, self.grad),
        )

    def __neg__(self):
        return Dual2(-self.val, -self.grad, -self.hess)

    def __add__(self, other):
        if isinstance(other, Dual2):
            return Dual2(self.val + other.val, self.grad + other.grad, self.hess + other.hess)
        return Dual2(self.val + other, self.grad, self.hess)

    def __radd__(self, other):
        return Dual2(other + self.val, self.grad, self.hess)

    def __sub__(self, other):
        if isinstance(other, Dual2):
            return Dual2(self.val - other.val, self.grad - other.grad, self.hess - other.hess)
        return Dual2(self.val - other, self.grad, self.hess)

    def __rsub__(self, other):
        return Dual2(other - self.val, -self.grad, -self.hess)

    def __mul__(self, other):
        if isinstance(other, Dual2):
            a, b = self, other
            av, bv = np.asarray(a.val), np.asarray(b.val)
            return Dual2(
                av * bv,
                a.grad * bv[..., None] + b.grad * av[..., None],
                a.hess * bv[..., None, None] + b.hess * av[..., None, None]
                + _outer(a.grad, b.grad) + _outer(b.grad, a.grad),
            )
        other = np.asarray(other, dtype=float)
        return Dual2(self.val * other, self.grad * other[..., None], self.hess * other[..., None, None])

    def __rmul__(self, other):
        return self.__mul__(other)

    def reciprocal(self):
        v = self.val
        return self._chain(1.0 / v, -1.0 / v ** 2, 2.0 / v ** 3)

    def __truediv__(self, other):
        if isinstance(other, Dual2):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, power):
        if isinstance(power, Dual2):
            return exp(power * log(self))
        p = float(power)
        v = self.val
        if p == 2.0:
            return self._chain(v * v, 2.0 * v, np.full_like(v, 2.0))
        return self._chain(v ** p, p * v ** (p - 1.0), p * (p - 1.0) * v ** (p - 2.0))

    # -------------------------------------------------------
    # elementary functions
    # -------------------------------------------------------
    def exp(self):
        e = np.exp(self.val)
        return self._chain(e, e, e)

    def log(self):
        v = self.val
        return self._chain(np.log(v), 1.0 / v, -1.0 / v ** 2)

    def sqrt(self):
        r = np.sqrt(self.val)
        return self._chain(r, 0.5 / r, -0.25 / (r * self.val))

    def arctan(self):
        v = self.val
        d = 1.0 / (1.0 + v * v)
        return self._chain(np.arctan(v), d, -2.0 * v * d * d)

    def sin(self):
        return self._chain(np.sin(self.val), np.cos(self.val), -np.sin(self.val))

    def cos(self):
        return self._chain(np.cos(self.val), -np.sin(self.val), -np.cos(self.val))


def exp(x):
    return x.exp() if isinstance(x, Dual2) else np.exp(x)


def log(x):
    return x.log() if isinstance(x, Dual2) else np.log(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, Dual2) else np.sqrt(x)


def arctan(x):
    return x.arctan() if isinstance(x, Dual2) else np.arctan(x)


def sin(x):
    return x.sin() if isinstance(x, Dual2) else np.sin(x)


def cos(x):
    return x.cos() if isinstance(x, Dual2) else np.cos(x)


def value(x):
    """Primal part of a dual, or x itself."""
    return x.val if isinstance(x, Dual2) else x
