"""Holomorphic functions on B with exact evaluation and first derivatives.

Two concrete families are supported:

* :class:`PowerSeries` -- finite multi-index coefficient tables.  Coefficients
  are stored as exact Gaussian rationals (every float converts exactly), so
  polynomial algebra, radial derivatives and ray integrals carry no rounding.
* analytic kernels -- :class:`LogKernel`, :class:`ShiftedLogKernel` and
  :class:`NormalizedSquaredLog`, with closed-form derivatives.

Sums, products and scalar multiples of these compose through the usual
operators and differentiate by linearity / Leibniz.
"""
from __future__ import annotations

from fractions import Fraction
from functools import cached_property
from itertools import product as iproduct
from math import log
from numbers import Number

import numpy as np
from scipy.optimize import minimize

from . import geometry as geo
from ._qmc import sobol, sphere_from_uniform
from .errors import ContractError, DomainError, PoleError
from .report import EstimateReport

MAX_DEPTH = 8


class GaussRat:
    """Exact Gaussian rational re + i*im."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re if isinstance(re, Fraction) else Fraction(re)
        self.im = im if isinstance(im, Fraction) else Fraction(im)

    @classmethod
    def coerce(cls, x) -> "GaussRat":
        if isinstance(x, GaussRat):
            return x
        if isinstance(x, (complex, np.complexfloating)):
            return cls(Fraction(float(x.real)), Fraction(float(x.imag)))
        if isinstance(x, (np.floating, np.integer)):
            return cls(Fraction(x.item()))
        return cls(x)

    def __add__(self, other):
        o = GaussRat.coerce(other)
        return GaussRat(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = GaussRat.coerce(other)
        return GaussRat(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return GaussRat.coerce(other) - self

    def __neg__(self):
        return GaussRat(-self.re, -self.im)

    def __mul__(self, other):
        o = GaussRat.coerce(other)
        return GaussRat(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = GaussRat.coerce(other)
        d = o.re * o.re + o.im * o.im
        if d == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        return GaussRat((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)

    def __eq__(self, other):
        try:
            o = GaussRat.coerce(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __abs__(self):
        return abs(complex(self))

    def __repr__(self):
        if not self.im:
            return f"{self.re}"
        return f"({self.re}{'+' if self.im >= 0 else '-'}{abs(self.im)}i)"


def _points(z) -> np.ndarray:
    return np.asarray(z, dtype=complex)


class HoloFunction:
    """Common interface: ``eval``, ``radial``, ``gradient`` on batches of points."""

    n: int
    depth = 1

    def eval(self, z) -> np.ndarray:
        raise NotImplementedError

    def radial(self, z) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, z) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no exact gradient")

    @property
    def value_at_origin(self) -> complex:
        return complex(self.eval(np.zeros(self.n, dtype=complex)))

    def __add__(self, other):
        if isinstance(other, Number):
            other = PowerSeries.constant(self.n, other)
        return Sum(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1) * other

    def __mul__(self, other):
        if isinstance(other, Number):
            return Scaled(self, other)
        return Product(self, other)

    def __rmul__(self, other):
        return self * other

    def __neg__(self):
        return Scaled(self, -1)

    def __call__(self, z):
        return self.eval(z)


class PowerSeries(HoloFunction):
    """Polynomial sum_alpha c_alpha z^alpha with exact coefficients."""

    def __init__(self, n: int, terms=None):
        if n < 1:
            raise DomainError("dimension must be positive")
        self.n = n
        clean = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(k) for k in alpha)
            if len(alpha) != n or min(alpha) < 0:
                raise DomainError(f"bad multi-index {alpha} for n={n}")
            c = GaussRat.coerce(c)
            if c:
                clean[alpha] = clean.get(alpha, GaussRat()) + c
        self.terms = {a: c for a, c in clean.items() if c}

    @classmethod
    def constant(cls, n: int, c) -> "PowerSeries":
        return cls(n, {(0,) * n: c})

    @classmethod
    def monomial(cls, n: int, alpha, c=1) -> "PowerSeries":
        return cls(n, {tuple(alpha): c})

    @classmethod
    def coordinate(cls, n: int, j: int) -> "PowerSeries":
        alpha = [0] * n
        alpha[j] = 1
        return cls.monomial(n, alpha)

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        if isinstance(other, PowerSeries):
            return self.n == other.n and self.terms == other.terms
        return NotImplemented

    __hash__ = None

    def __repr__(self):
        if not self.terms:
            return f"PowerSeries(n={self.n}, 0)"
        parts = [f"{c!r}*z^{a}" for a, c in sorted(self.terms.items())]
        return f"PowerSeries(n={self.n}, {' + '.join(parts)})"

    # exact algebra
    def __add__(self, other):
        if isinstance(other, Number) or isinstance(other, GaussRat):
            other = PowerSeries.constant(self.n, other)
        if isinstance(other, PowerSeries):
            self._check_dim(other)
            out = dict(self.terms)
            for a, c in other.terms.items():
                out[a] = out.get(a, GaussRat()) + c
            return PowerSeries(self.n, out)
        return super().__add__(other)

    __radd__ = __add__

    def __neg__(self):
        return PowerSeries(self.n, {a: -c for a, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (PowerSeries, Number, GaussRat)):
            return self + (-other if isinstance(other, PowerSeries) else -GaussRat.coerce(other))
        return super().__sub__(other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (Number, GaussRat)):
            c = GaussRat.coerce(other)
            return PowerSeries(self.n, {a: v * c for a, v in self.terms.items()})
        if isinstance(other, PowerSeries):
            self._check_dim(other)
            out: dict = {}
            for (a, ca), (b, cb) in iproduct(self.terms.items(), other.terms.items()):
                key = tuple(x + y for x, y in zip(a, b))
                out[key] = out.get(key, GaussRat()) + ca * cb
            return PowerSeries(self.n, out)
        return super().__mul__(other)

    def __rmul__(self, other):
        return self * other

    def _check_dim(self, other):
        if other.n != self.n:
            raise DomainError(f"dimension mismatch {self.n} vs {other.n}")

    def radial_series(self) -> "PowerSeries":
        """R f: each monomial multiplied by its total degree."""
        return PowerSeries(self.n, {a: c * sum(a) for a, c in self.terms.items()})

    def partial(self, j: int) -> "PowerSeries":
        out = {}
        for a, c in self.terms.items():
            if a[j]:
                b = list(a)
                b[j] -= 1
                out[tuple(b)] = c * a[j]
        return PowerSeries(self.n, out)

    def ray_integral_series(self) -> "PowerSeries":
        """int_0^1 h(tz) dt/t = sum c_alpha z^alpha / |alpha|; needs h(0) = 0."""
        zero = (0,) * self.n
        if zero in self.terms:
            raise ContractError("ray integral diverges: h(0) != 0")
        return PowerSeries(self.n, {a: c / sum(a) for a, c in self.terms.items()})

    def coefficient(self, alpha) -> GaussRat:
        return self.terms.get(tuple(alpha), GaussRat())

    # numerics
    @cached_property
    def _arrays(self):
        if not self.terms:
            return np.zeros((0, self.n), dtype=int), np.zeros(0, dtype=complex)
        alphas = np.array(list(self.terms.keys()), dtype=int)
        coeffs = np.array([complex(c) for c in self.terms.values()])
        return alphas, coeffs

    @cached_property
    def _radial_cache(self):
        return self.radial_series()

    @cached_property
    def _partials(self):
        return [self.partial(j) for j in range(self.n)]

    def eval(self, z) -> np.ndarray:
        z = _points(z)
        alphas, coeffs = self._arrays
        if coeffs.size == 0:
            return np.zeros(z.shape[:-1], dtype=complex)
        top = int(alphas.max())
        mono = np.ones(z.shape[:-1] + (len(coeffs),), dtype=complex)
        for j in range(self.n):
            if not alphas[:, j].any():
                continue
            pw = z[..., j, None] ** np.arange(top + 1)
            mono = mono * pw[..., alphas[:, j]]
        return mono @ coeffs

    def radial(self, z) -> np.ndarray:
        return self._radial_cache.eval(z)

    def gradient(self, z) -> np.ndarray:
        return np.stack([p.eval(z) for p in self._partials], axis=-1)

    @property
    def value_at_origin(self) -> complex:
        return complex(self.terms.get((0,) * self.n, GaussRat()))

    def to_json(self) -> dict:
        return {
            "kind": "polynomial",
            "n": self.n,
            "terms": [
                {"alpha": list(a), "re": float(c.re), "im": float(c.im)}
                for a, c in sorted(self.terms.items())
            ],
        }


def _kernel_denominator(z, w):
    d = 1.0 - geo.inner(z, w)
    if np.any(d == 0):
        raise PoleError("kernel singularity 1 - <z, w> = 0")
    return d


class LogKernel(HoloFunction):
    """f_w(z) = log 1/(1 - <z, w>) on the principal branch.

    For |z| <= 1 and |w| < 1 the real part of 1 - <z, w> is positive, so the
    principal branch is never crossed.
    """

    def __init__(self, w):
        self.w = geo.as_point(w, closed=False)
        self.n = self.w.shape[-1]

    def eval(self, z):
        return -np.log(_kernel_denominator(_points(z), self.w))

    def radial(self, z):
        z = _points(z)
        zw = geo.inner(z, self.w)
        return zw / _kernel_denominator(z, self.w)

    def gradient(self, z):
        z = _points(z)
        d = _kernel_denominator(z, self.w)
        return np.conj(self.w) / d[..., None]

    def to_json(self):
        return {"kind": "log_kernel", "w": geo.point_to_json(self.w)}

    def __repr__(self):
        return f"LogKernel(w={np.round(self.w, 6).tolist()})"


class ShiftedLogKernel(LogKernel):
    """f_{xi,delta}(z) = log 2/(1 - <z, (1-delta) xi>)."""

    def __init__(self, xi, delta: float):
        if not 0.0 < delta <= 1.0:
            raise DomainError("ShiftedLogKernel needs 0 < delta <= 1")
        self.xi = geo.as_unit(xi)
        self.delta = float(delta)
        super().__init__((1.0 - delta) * self.xi)

    def eval(self, z):
        return log(2.0) + super().eval(z)

    def to_json(self):
        return {"kind": "shifted_log_kernel", "xi": geo.point_to_json(self.xi), "delta": self.delta}


class NormalizedSquaredLog(HoloFunction):
    """c * (log 2/(1 - <z, w>))^2 with normaliser c = 1/scale.

    ``from_point(w)`` uses scale = log 2/(1-|w|^2); ``from_box(xi, delta)``
    uses w = (1-delta) xi and scale = log 2/delta.
    """

    def __init__(self, w, scale: float):
        self.w = geo.as_point(w, closed=False)
        self.n = self.w.shape[-1]
        if not scale > 0:
            raise DomainError("normaliser scale must be positive")
        self.scale = float(scale)
        self.xi = None
        self.delta = None

    @classmethod
    def from_point(cls, w) -> "NormalizedSquaredLog":
        w = geo.as_point(w, closed=False)
        return cls(w, log(2.0 / (1.0 - float(geo.norm2(w)))))

    @classmethod
    def from_box(cls, xi, delta: float) -> "NormalizedSquaredLog":
        if not 0.0 < delta < 1.0:
            raise DomainError("from_box needs 0 < delta < 1")
        xi = geo.as_unit(xi)
        out = cls((1.0 - delta) * xi, log(2.0 / delta))
        out.xi, out.delta = xi, float(delta)
        return out

    def _log(self, z):
        d = _kernel_denominator(z, self.w)
        return np.log(2.0 / d), d

    def eval(self, z):
        ell, _ = self._log(_points(z))
        return ell**2 / self.scale

    def radial(self, z):
        z = _points(z)
        ell, d = self._log(z)
        return 2.0 * ell * geo.inner(z, self.w) / d / self.scale

    def gradient(self, z):
        z = _points(z)
        ell, d = self._log(z)
        return (2.0 * ell / d / self.scale)[..., None] * np.conj(self.w)

    def to_json(self):
        if self.xi is not None:
            return {"kind": "normalized_squared_log", "xi": geo.point_to_json(self.xi), "delta": self.delta}
        return {"kind": "normalized_squared_log", "w": geo.point_to_json(self.w), "scale": self.scale}


class _Composite(HoloFunction):
    def __init__(self, *parts):
        dims = {p.n for p in parts}
        if len(dims) != 1:
            raise DomainError("dimension mismatch in composition")
        self.n = dims.pop()
        self.parts = parts
        self.depth = 1 + max(p.depth for p in parts)
        if self.depth > MAX_DEPTH:
            raise ContractError(f"composition depth {self.depth} exceeds cap {MAX_DEPTH}")


class Sum(_Composite):
    def eval(self, z):
        return sum(p.eval(z) for p in self.parts)

    def radial(self, z):
        return sum(p.radial(z) for p in self.parts)

    def gradient(self, z):
        return sum(p.gradient(z) for p in self.parts)

    def to_json(self):
        return {"kind": "sum", "terms": [p.to_json() for p in self.parts]}


class Product(_Composite):
    def __init__(self, f, g):
        super().__init__(f, g)
        self.f, self.g = f, g

    def eval(self, z):
        return self.f.eval(z) * self.g.eval(z)

    def radial(self, z):
        return self.f.radial(z) * self.g.eval(z) + self.f.eval(z) * self.g.radial(z)

    def gradient(self, z):
        return (self.f.gradient(z) * self.g.eval(z)[..., None]
                + self.f.eval(z)[..., None] * self.g.gradient(z))

    def to_json(self):
        return {"kind": "product", "terms": [self.f.to_json(), self.g.to_json()]}


class Scaled(_Composite):
    def __init__(self, f, c):
        super().__init__(f)
        self.f = f
        self.c = complex(c)

    def eval(self, z):
        return self.c * self.f.eval(z)

    def radial(self, z):
        return self.c * self.f.radial(z)

    def gradient(self, z):
        return self.c * self.f.gradient(z)

    def to_json(self):
        return {"kind": "scaled", "c": [self.c.real, self.c.imag], "f": self.f.to_json()}


def random_polynomial(n: int, max_degree: int, rng, max_terms: int = 10) -> PowerSeries:
    """Sparse polynomial with small dyadic Gaussian coefficients (cheap exact arithmetic)."""
    count = int(rng.integers(1, max_terms + 1))
    terms = {}
    for _ in range(count):
        deg = int(rng.integers(0, max_degree + 1))
        alpha = rng.multinomial(deg, [1.0 / n] * n)
        re, im = rng.integers(-16, 17, size=2)
        terms[tuple(int(a) for a in alpha)] = GaussRat(Fraction(int(re), 8), Fraction(int(im), 8))
    return PowerSeries(n, terms)


# -- module-level operations ------------------------------------------------


def evaluate(f: HoloFunction, z) -> np.ndarray:
    return f.eval(z)


def radial_derivative(f: HoloFunction, z) -> np.ndarray:
    return f.radial(z)


def gradient(f: HoloFunction, z) -> np.ndarray:
    return f.gradient(z)


def invariant_gradient(f: HoloFunction, z) -> np.ndarray:
    """grad(f o phi_z)(0) = Dphi_z(0)^T grad f(z).

    With s = sqrt(1-|z|^2) the Jacobian is -s(I - z z^*/(1+s)), giving
    -s (grad f(z) - Rf(z) conj(z)/(1+s)).  Broadcasts over batches of z.
    """
    z = _points(z)
    r2 = geo.norm2(z)
    if np.any(r2 >= 1.0):
        raise DomainError("invariant gradient needs |z| < 1")
    s = np.sqrt(1.0 - r2)[..., None]
    grad = f.gradient(z)
    rf = np.sum(grad * z, axis=-1)[..., None]
    return -s * (grad - rf * np.conj(z) / (1.0 + s))


def _ball_from_real(y: np.ndarray, n: int) -> np.ndarray:
    """Smooth bijection R^(2n) -> B used by the local sup refinement."""
    t = float(np.linalg.norm(y))
    scale = 1.0 / np.sqrt(1.0 + t * t)
    return (y[:n] + 1j * y[n:]) * scale


def _refined_sup(f: "HoloFunction", seed: int, starts: int = 3, prefix: int = 256) -> tuple[float, np.ndarray]:
    """Nelder-Mead on |f| from the best points of a fixed Sobol prefix."""
    u = sobol(prefix, 2 * f.n + 1, seed)
    r = 1.0 - 10.0 ** (-6.0 * u[:, 0])
    pts = r[:, None] * sphere_from_uniform(u[:, 1:], f.n)
    vals = np.abs(f.eval(pts))
    best_val, best_pt = -np.inf, pts[0]
    for k in np.argsort(-vals, kind="stable")[:starts]:
        z0 = pts[k]
        rr = np.sqrt(geo.norm2(z0))
        t0 = rr / np.sqrt(max(1.0 - rr * rr, 1e-300))
        y0 = np.concatenate([z0.real, z0.imag]) * (t0 / rr if rr > 0 else 1.0)
        res = minimize(lambda y: -float(np.abs(f.eval(_ball_from_real(y, f.n)))), y0,
                       method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-13, "maxiter": 600})
        if -res.fun > best_val:
            best_val, best_pt = -res.fun, _ball_from_real(res.x, f.n)
    return float(best_val), best_pt


def hinf_norm_estimate(f: HoloFunction, samples: int = 4096, cap: float | None = None,
                       seed: int = 0, refine: bool = True) -> EstimateReport:
    """Sampled lower bound for sup_B |f|.

    Scrambled Sobol directions with radii 1 - 10^(-6u) bias the sample toward
    the boundary.  Prefixes of the sequence are reused, and the optional local
    refinement starts from a fixed prefix, so the estimate is non-decreasing
    in ``samples``.  Exceeding ``cap`` reports +inf.
    """
    u = sobol(samples, 2 * f.n + 1, seed)
    r = 1.0 - 10.0 ** (-6.0 * u[:, 0])
    pts = r[:, None] * sphere_from_uniform(u[:, 1:], f.n)
    vals = np.abs(f.eval(pts))
    k = int(np.argmax(vals))
    best, arg = float(vals[k]), pts[k]
    if refine:
        val, pt = _refined_sup(f, seed)
        if val > best:
            best, arg = val, pt
    if cap is not None and best > cap:
        return EstimateReport(float("inf"), 0.0, samples, arg, converged=False,
                              extra={"sampled_max": best, "cap": cap})
    return EstimateReport(best, 0.0, samples, arg)


def schwarz_pick_check(f: HoloFunction, z1, z2, hinf: float, tol: float = 1e-12):
    """Whether |f(z1) - f(z2)| <= 2 hinf |phi_{z1}(z2)| (elementwise for batches)."""
    lhs = np.abs(f.eval(z1) - f.eval(z2))
    rhs = 2.0 * hinf * geo.pseudo_hyperbolic_dist(z1, z2)
    ok = lhs <= rhs + tol * max(1.0, hinf)
    return bool(ok) if np.ndim(ok) == 0 else ok


def function_from_json(obj) -> HoloFunction:
    """Build a function from its JSON description (see README for kinds)."""
    kind = obj.get("kind")
    if kind == "polynomial":
        n = int(obj["n"])
        terms: dict = {}
        for t in obj.get("terms", []):
            key = tuple(t["alpha"])
            terms[key] = GaussRat.coerce(terms.get(key, 0)) + GaussRat(Fraction(t.get("re", 0.0)), Fraction(t.get("im", 0.0)))
        return PowerSeries(n, terms)
    if kind == "log_kernel":
        return LogKernel(geo.point_from_json(obj["w"]))
    if kind == "shifted_log_kernel":
        return ShiftedLogKernel(geo.point_from_json(obj["xi"]), obj["delta"])
    if kind == "normalized_squared_log":
        if "xi" in obj:
            return NormalizedSquaredLog.from_box(geo.point_from_json(obj["xi"]), obj["delta"])
        w = geo.point_from_json(obj["w"])
        return NormalizedSquaredLog(w, obj["scale"]) if "scale" in obj else NormalizedSquaredLog.from_point(w)
    if kind == "sum":
        return Sum(*(function_from_json(t) for t in obj["terms"]))
    if kind == "product":
        f, g = (function_from_json(t) for t in obj["terms"])
        return Product(f, g)
    if kind == "scaled":
        re, im = obj["c"]
        return Scaled(function_from_json(obj["f"]), complex(re, im))
    raise DomainError(f"unknown function kind {kind!r}")
