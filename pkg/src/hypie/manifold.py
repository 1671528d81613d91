"""Closed-form Riemannian operations on the Poincare ball, the Lorentz model
and a flat fallback.

Each manifold class works on batched arrays whose last axis holds the
coordinates, and every kernel is written with :mod:`hypie.autodiff`
primitives so it accepts both plain ndarrays and ``DiffValue`` inputs.

Curvature is passed as ``kappa < 0``; internally ``c = -kappa``.

Tangent vectors come in two flavours:

* ambient vectors at an arbitrary base point (``expmap``, ``logmap``,
  ``ptransp``). For Lorentz these have ``d + 1`` coordinates.
* intrinsic coordinates at the origin (``expmap0``, ``logmap0``,
  ``ptransp0``), always ``d`` numbers. For Lorentz this is the spatial part
  of a tangent vector whose time coordinate is zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hypie import autodiff as ad

POINCARE = "poincare"
LORENTZ = "lorentz"
FLAT = "flat"
MODELS = (POINCARE, LORENTZ, FLAT)

BALL_EPS = 1e-5
MIN_NORM = 1e-15
ARTANH_MAX = 1.0 - 1e-15
ACOSH_MIN = 1.0 + 1e-15


class ManifoldMismatchError(ValueError):
    pass


class TangencyError(ValueError):
    pass


def _dot(a, b):
    return ad.sum(a * b, axis=-1, keepdims=True)


def _clamp_norm(x):
    return ad.clamp(ad.norm(x, axis=-1, keepdims=True), lo=MIN_NORM)


def _same_rows(x, y):
    xv, yv = ad.value(x), ad.value(y)
    return np.all(xv == yv, axis=-1, keepdims=True)


def _check_kappa(kappa):
    kappa = float(kappa)
    if not kappa < 0:
        raise ValueError(f"hyperbolic curvature must be negative, got {kappa}")
    return kappa


class Poincare:
    """Poincare ball of curvature ``kappa``, radius ``(-kappa)**-0.5``."""

    name = POINCARE

    def __init__(self, kappa=-1.0):
        self.kappa = _check_kappa(kappa)
        self.c = -self.kappa
        self.sqrt_c = np.sqrt(self.c)

    def __repr__(self):
        return f"Poincare(kappa={self.kappa})"

    def __eq__(self, other):
        return isinstance(other, Poincare) and other.kappa == self.kappa

    def __hash__(self):
        return hash((self.name, self.kappa))

    def ambient_dim(self, dim):
        return dim

    def intrinsic_dim(self, ambient):
        return ambient

    def origin(self, dim, n=None):
        shape = (dim,) if n is None else (n, dim)
        return np.zeros(shape)

    def lambda_x(self, x, keepdims=True):
        x2 = ad.sum(x * x, axis=-1, keepdims=keepdims)
        return 2.0 / ad.clamp(1.0 - self.c * x2, lo=MIN_NORM)

    def mobius_add(self, x, y):
        c = self.c
        xy, x2, y2 = _dot(x, y), _dot(x, x), _dot(y, y)
        num = (1.0 + 2.0 * c * xy + c * y2) * x + (1.0 - c * x2) * y
        den = 1.0 + 2.0 * c * xy + c * c * x2 * y2
        return num / ad.clamp(den, lo=MIN_NORM)

    def mobius_scalar(self, r, x):
        xn = _clamp_norm(x)
        arg = ad.clamp(self.sqrt_c * xn, hi=ARTANH_MAX)
        return ad.tanh(r * ad.artanh(arg)) * x / (self.sqrt_c * xn)

    def gyration(self, u, v, w):
        """``gyr[u, v] w`` in its closed linear form (valid for any ``w``)."""
        c = self.c
        u2, v2 = _dot(u, u), _dot(v, v)
        uv, uw, vw = _dot(u, v), _dot(u, w), _dot(v, w)
        a = -c * c * uw * v2 + c * vw + 2.0 * c * c * uv * vw
        b = -c * c * vw * u2 - c * uw
        d = 1.0 + 2.0 * c * uv + c * c * u2 * v2
        return w + 2.0 * (a * u + b * v) / ad.clamp(d, lo=MIN_NORM)

    def project(self, x):
        maxnorm = (1.0 - BALL_EPS) / self.sqrt_c
        n = ad.norm(x, axis=-1, keepdims=True)
        # a few ulps of slack so re-projecting a clamped point is a no-op
        over = ad.value(n) > maxnorm * (1.0 + 4 * np.finfo(float).eps)
        if not np.any(over):
            return x
        scale = ad.where(over, maxnorm / ad.clamp(n, lo=MIN_NORM), 1.0)
        return x * scale

    def dist(self, x, y):
        sub = self.mobius_add(-x, y)
        arg = ad.clamp(self.sqrt_c * ad.norm(sub, axis=-1), hi=ARTANH_MAX)
        d = 2.0 / self.sqrt_c * ad.artanh(arg)
        # (-x) (+) x is not exactly zero in floating point
        same = _same_rows(x, y)[..., 0]
        return ad.where(~same, d, 0.0) if np.any(same) else d

    def dist0(self, x):
        arg = ad.clamp(self.sqrt_c * ad.norm(x, axis=-1), hi=ARTANH_MAX)
        return 2.0 / self.sqrt_c * ad.artanh(arg)

    def dist_acosh(self, x, y):
        """Distance through the ``cosh^-1`` closed form (cross-check path)."""
        c = self.c
        diff2 = ad.sum((x - y) * (x - y), axis=-1)
        den = (1.0 - c * ad.sum(x * x, axis=-1)) * (1.0 - c * ad.sum(y * y, axis=-1))
        arg = ad.clamp(1.0 + 2.0 * c * diff2 / den, lo=ACOSH_MIN)
        return ad.acosh(arg) / self.sqrt_c

    def expmap(self, x, v):
        vn = _clamp_norm(v)
        second = ad.tanh(self.sqrt_c * self.lambda_x(x) * vn / 2.0) * v / (self.sqrt_c * vn)
        return self.project(self.mobius_add(x, second))

    def logmap(self, x, y):
        sub = self.mobius_add(-x, y)
        sn = _clamp_norm(sub)
        arg = ad.clamp(self.sqrt_c * sn, hi=ARTANH_MAX)
        out = 2.0 / (self.sqrt_c * self.lambda_x(x)) * ad.artanh(arg) * sub / sn
        same = _same_rows(x, y)
        return ad.where(~same, out, 0.0) if np.any(same) else out

    def expmap0(self, u):
        un = _clamp_norm(u)
        return self.project(ad.tanh(self.sqrt_c * un) * u / (self.sqrt_c * un))

    def logmap0(self, y):
        yn = _clamp_norm(y)
        arg = ad.clamp(self.sqrt_c * yn, hi=ARTANH_MAX)
        return ad.artanh(arg) * y / (self.sqrt_c * yn)

    def ptransp(self, x, y, v):
        return self.lambda_x(x) / self.lambda_x(y) * self.gyration(y, -x, v)

    def ptransp0(self, x, u):
        # lambda_o = 2, gyr[x, o] = identity
        return 2.0 / self.lambda_x(x) * u

    def inner(self, x, u, v):
        return self.lambda_x(x, keepdims=False) ** 2 * ad.sum(u * v, axis=-1)

    def norm_tangent(self, x, v):
        return self.lambda_x(x, keepdims=False) * ad.norm(v, axis=-1)

    def egrad2rgrad(self, x, g):
        return g / self.lambda_x(x) ** 2

    def proj_tan(self, x, v):
        return v

    def check_point(self, x, atol=0.0):
        return bool(np.all(np.linalg.norm(ad.value(x), axis=-1) ** 2 < 1.0 / self.c + atol))

    def check_tangent(self, x, v, atol=1e-6):
        return True


class Lorentz:
    """Upper sheet of ``<x, x>_L = 1/kappa`` in Minkowski space."""

    name = LORENTZ

    def __init__(self, kappa=-1.0):
        self.kappa = _check_kappa(kappa)
        self.c = -self.kappa
        self.sqrt_c = np.sqrt(self.c)

    def __repr__(self):
        return f"Lorentz(kappa={self.kappa})"

    def __eq__(self, other):
        return isinstance(other, Lorentz) and other.kappa == self.kappa

    def __hash__(self):
        return hash((self.name, self.kappa))

    def ambient_dim(self, dim):
        return dim + 1

    def intrinsic_dim(self, ambient):
        return ambient - 1

    def origin(self, dim, n=None):
        shape = (dim + 1,) if n is None else (n, dim + 1)
        o = np.zeros(shape)
        o[..., 0] = 1.0 / self.sqrt_c
        return o

    @staticmethod
    def minkowski(u, v, keepdims=True):
        if not ad.is_diff(u, v):
            return _minkowski_np(np.asarray(u, dtype=float), np.asarray(v, dtype=float), keepdims)
        return _minkowski_diff(u * v, keepdims)

    def _mnorm(self, v):
        return ad.sqrt(ad.clamp(self.minkowski(v, v), lo=0.0))

    def project(self, x):
        xs = x[..., 1:]
        x0 = ad.sqrt(1.0 / self.c + ad.sum(xs * xs, axis=-1, keepdims=True))
        return ad.concat([x0, xs], axis=-1)

    def proj_tan(self, x, v):
        return v + self.c * self.minkowski(x, v) * x

    def dist(self, x, y, keepdims=False):
        # 2/sqrt(c) asinh(sqrt(c) |x - y|_L / 2): same value as the acosh form,
        # but exact at x == y and well conditioned for nearby points
        diff = x - y
        mn = ad.sqrt(ad.clamp(self.minkowski(diff, diff, keepdims=keepdims), lo=0.0))
        return 2.0 / self.sqrt_c * ad.asinh(self.sqrt_c * mn / 2.0)

    def dist0(self, x):
        return ad.asinh(self.sqrt_c * ad.norm(x[..., 1:], axis=-1)) / self.sqrt_c

    def dist_acosh(self, x, y):
        arg = ad.clamp(-self.c * self.minkowski(x, y, keepdims=False), lo=ACOSH_MIN)
        return ad.acosh(arg) / self.sqrt_c

    def expmap(self, x, v):
        theta = self.sqrt_c * self._mnorm(v)
        out = ad.cosh(theta) * x + ad.sinh(theta) / ad.clamp(theta, lo=MIN_NORM) * v
        return self.project(out)

    def logmap(self, x, y):
        u = y + self.c * self.minkowski(x, y) * x
        un = ad.clamp(self._mnorm(u), lo=MIN_NORM)
        out = self.dist(x, y, keepdims=True) * u / un
        same = _same_rows(x, y)
        return ad.where(~same, out, 0.0) if np.any(same) else out

    def expmap0(self, u):
        un = _clamp_norm(u)
        theta = self.sqrt_c * un
        xs = ad.sinh(theta) * u / (self.sqrt_c * un)
        x0 = ad.sqrt(1.0 / self.c + ad.sum(xs * xs, axis=-1, keepdims=True))
        return ad.concat([x0, xs], axis=-1)

    def logmap0(self, y):
        ys = y[..., 1:]
        yn = _clamp_norm(ys)
        return ad.asinh(self.sqrt_c * yn) / self.sqrt_c * ys / yn

    def ptransp(self, x, y, v):
        coef = self.c * self.minkowski(y, v) / (1.0 - self.c * self.minkowski(x, y))
        return v + coef * (x + y)

    def ptransp0(self, x, u):
        x0, xs = x[..., 0:1], x[..., 1:]
        coef = self.c * ad.sum(xs * u, axis=-1, keepdims=True) / (1.0 + self.sqrt_c * x0)
        o = self.origin(ad.value(u).shape[-1])
        zero = np.zeros(ad.value(u).shape[:-1] + (1,))
        return ad.concat([zero, u], axis=-1) + coef * (x + o)

    def inner(self, x, u, v):
        return self.minkowski(u, v, keepdims=False)

    def norm_tangent(self, x, v):
        return ad.sqrt(ad.clamp(self.minkowski(v, v, keepdims=False), lo=0.0))

    def egrad2rgrad(self, x, g):
        g = ad.concat([-g[..., 0:1], g[..., 1:]], axis=-1)
        return self.proj_tan(x, g)

    def check_point(self, x, atol=1e-9):
        xv = ad.value(x)
        on = np.abs(self.minkowski(xv, xv, keepdims=False) - 1.0 / self.kappa) <= atol * np.maximum(1.0, xv[..., 0] ** 2)
        return bool(np.all(on) and np.all(xv[..., 0] > 0))

    def check_tangent(self, x, v, atol=1e-6):
        xv, vv = ad.value(x), ad.value(v)
        scale = np.maximum(1.0, np.abs(xv[..., 0]) * np.linalg.norm(vv, axis=-1))
        return bool(np.all(np.abs(self.minkowski(xv, vv, keepdims=False)) <= atol * scale))


def _minkowski_diff(prod, keepdims):
    space = ad.sum(prod[..., 1:], axis=-1, keepdims=keepdims)
    time = prod[..., 0:1] if keepdims else prod[..., 0]
    return space - time


class Flat:
    """Euclidean space with the same interface (curvature ignored)."""

    name = FLAT
    kappa = 0.0

    def __init__(self, kappa=0.0):
        pass

    def __repr__(self):
        return "Flat()"

    def __eq__(self, other):
        return isinstance(other, Flat)

    def __hash__(self):
        return hash(self.name)

    def ambient_dim(self, dim):
        return dim

    def intrinsic_dim(self, ambient):
        return ambient

    def origin(self, dim, n=None):
        return np.zeros((dim,) if n is None else (n, dim))

    def mobius_add(self, x, y):
        return x + y

    def project(self, x):
        return x

    def proj_tan(self, x, v):
        return v

    def dist(self, x, y):
        return ad.norm(x - y, axis=-1)

    dist_acosh = dist

    def dist0(self, x):
        return ad.norm(x, axis=-1)

    def expmap(self, x, v):
        return x + v

    def logmap(self, x, y):
        return y - x

    def expmap0(self, u):
        return u

    def logmap0(self, y):
        return y

    def ptransp(self, x, y, v):
        return v

    def ptransp0(self, x, u):
        return u

    def inner(self, x, u, v):
        return ad.sum(u * v, axis=-1)

    def norm_tangent(self, x, v):
        return ad.norm(v, axis=-1)

    def egrad2rgrad(self, x, g):
        return g

    def check_point(self, x, atol=0.0):
        return bool(np.all(np.isfinite(ad.value(x))))

    def check_tangent(self, x, v, atol=1e-6):
        return True


def _minkowski_np(u, v, keepdims):
    prod = u * v
    out = prod[..., 1:].sum(axis=-1) - prod[..., 0]
    return out[..., None] if keepdims else out


def get_manifold(model, kappa=-1.0):
    """Manifold instance for a model name (``poincare``/``lorentz``/``flat``)."""
    model = str(model).lower()
    if model == POINCARE:
        return Poincare(kappa)
    if model == LORENTZ:
        return Lorentz(kappa)
    if model in (FLAT, "euclidean"):
        return Flat()
    raise ValueError(f"unknown manifold model {model!r}")


def random_points(manifold, n, dim, rng, max_hdo=3.0):
    """Points with uniform direction and HDO uniform in ``[0, max_hdo]``."""
    u = rng.standard_normal((n, dim))
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    r = rng.uniform(0.0, max_hdo, size=(n, 1))
    if isinstance(manifold, Poincare):
        # Poincare origin coordinates carry half the geodesic length (lambda_o = 2)
        return manifold.expmap0(u * r / 2.0)
    if isinstance(manifold, Lorentz):
        return manifold.expmap0(u * r)
    return u * r


# --- value types ------------------------------------------------------------
@dataclass(frozen=True)
class ManifoldPoint:
    """Coordinates tagged with their model and curvature."""

    model: str
    coords: np.ndarray
    kappa: float = -1.0

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=np.float64))
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.model == FLAT:
            object.__setattr__(self, "kappa", 0.0)
        else:
            _check_kappa(self.kappa)

    @property
    def manifold(self):
        return get_manifold(self.model, self.kappa)

    @property
    def dim(self):
        return self.manifold.intrinsic_dim(self.coords.shape[-1])

    @classmethod
    def origin(cls, model, dim, kappa=-1.0):
        return cls(model, get_manifold(model, kappa).origin(dim), kappa)


@dataclass(frozen=True)
class TangentVector:
    """Ambient tangent vector at ``base``."""

    base: ManifoldPoint
    vec: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vec", np.asarray(self.vec, dtype=np.float64))
        if self.vec.shape != self.base.coords.shape:
            raise ValueError(
                f"tangent vector shape {self.vec.shape} != base shape {self.base.coords.shape}"
            )


def _same_space(x, y):
    if x.model != y.model:
        raise ManifoldMismatchError(f"model mismatch: {x.model} vs {y.model}")
    if x.kappa != y.kappa:
        raise ManifoldMismatchError(f"curvature mismatch: {x.kappa} vs {y.kappa}")
    if x.coords.shape[-1] != y.coords.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.coords.shape} vs {y.coords.shape}")


def _require_tangent(v, atol=1e-6):
    m = v.base.manifold
    if not m.check_tangent(v.base.coords, v.vec, atol=atol):
        raise TangencyError("vector is not tangent to the manifold at its base point")


# --- point-level API ----------------------------------------------------------
def mobius_add(x, y):
    """Mobius addition ``x (+) y`` of two Poincare points."""
    _same_space(x, y)
    if x.model != POINCARE:
        raise ManifoldMismatchError("mobius_add is defined on the Poincare ball")
    m = x.manifold
    return ManifoldPoint(POINCARE, m.project(m.mobius_add(x.coords, y.coords)), x.kappa)


def gyration(x, y, v):
    _same_space(x, y)
    if x.model != POINCARE:
        raise ManifoldMismatchError("gyration is defined on the Poincare ball")
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != x.coords.shape[-1]:
        raise ValueError("dimension mismatch between vector and points")
    return x.manifold.gyration(x.coords, y.coords, v)


def dist(x, y):
    _same_space(x, y)
    return x.manifold.dist(x.coords, y.coords)


def exp_map(x, v):
    if isinstance(v, TangentVector):
        if v.base is not x and not np.array_equal(v.base.coords, x.coords):
            raise ValueError("tangent vector is not based at x")
        _require_tangent(v)
        vec = v.vec
    else:
        vec = np.asarray(v, dtype=np.float64)
        _require_tangent(TangentVector(x, vec))
    return ManifoldPoint(x.model, x.manifold.expmap(x.coords, vec), x.kappa)


def log_map(x, y):
    _same_space(x, y)
    return TangentVector(x, x.manifold.logmap(x.coords, y.coords))


def parallel_transport(x, y, v):
    _same_space(x, y)
    vec = v.vec if isinstance(v, TangentVector) else np.asarray(v, dtype=np.float64)
    _require_tangent(TangentVector(x, vec))
    return TangentVector(y, x.manifold.ptransp(x.coords, y.coords, vec))


def project(x):
    return ManifoldPoint(x.model, x.manifold.project(x.coords), x.kappa)


def minkowski_inner(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    if u.shape[-1] < 2:
        raise ValueError("Minkowski vectors need at least two coordinates")
    return _minkowski_np(u, v, keepdims=False)


def poincare_to_lorentz(p, kappa=-1.0):
    c = -kappa
    p = np.asarray(p, dtype=np.float64)
    r2 = np.sum(p * p, axis=-1, keepdims=True)
    den = 1.0 - c * r2
    x0 = (1.0 + c * r2) / (np.sqrt(c) * den)
    return np.concatenate([x0, 2.0 * p / den], axis=-1)


def lorentz_to_poincare(x, kappa=-1.0):
    c = -kappa
    x = np.asarray(x, dtype=np.float64)
    return x[..., 1:] / (1.0 + np.sqrt(c) * x[..., 0:1])


def model_convert(x):
    """Map a point to the other hyperbolic model (isometric diffeomorphism)."""
    if x.model == POINCARE:
        return ManifoldPoint(LORENTZ, poincare_to_lorentz(x.coords, x.kappa), x.kappa)
    if x.model == LORENTZ:
        return ManifoldPoint(POINCARE, lorentz_to_poincare(x.coords, x.kappa), x.kappa)
    raise ManifoldMismatchError("model_convert needs a hyperbolic model")
