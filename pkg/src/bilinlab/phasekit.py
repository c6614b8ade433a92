"""Phase functions, metrics, normals, transversality and the eikonal solver.

Conventions used throughout the package:

* space-time vectors are ordered (x_1, ..., x_d, t);
* a mixed Hessian is the (d+1) x d matrix d^2 phi / d xi d(x, t), rows in the
  same order;
* normals are unit vectors with a non-positive t-component.

The eikonal phase solves  d_s phi + g^{ij} d_i phi d_j phi = 0,
phi(0, x, xi) = x . xi  by the method of characteristics.  Along a ray of the
Hamiltonian H(x, p) = p^T G(x) p (G the inverse metric) the phase is
x0 . xi + s H(x0, xi), so tabulating it only needs the rays and the inverse
of the flow map x0 -> X(s; x0), which is obtained by Newton shooting.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, CausticError, DegeneracyError, DomainError

TWO_PI = 2.0 * np.pi

#: smallest admissible singular value of a mixed Hessian
RANK_FLOOR = 0.5


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrigTerm:
    """One term coef * f(2 pi m . x / period) of the perturbation p^{ij}, f in {cos, sin}."""

    i: int
    j: int
    coef: float
    mode: tuple
    kind: str = "cos"


@dataclass(frozen=True)
class Metric:
    """Inverse metric g^{ij}(x) = delta^{ij} + eps p^{ij}(x), p a trigonometric polynomial.

    Off-diagonal terms are symmetrized: a term with i != j contributes to both
    (i, j) and (j, i).
    """

    d: int = 1
    eps: float = 0.0
    terms: tuple = ()
    period: float = TWO_PI

    def __post_init__(self):
        if self.d not in (1, 2):
            raise DomainError(f"metric dimension must be 1 or 2, got {self.d}")
        terms = tuple(t if isinstance(t, TrigTerm) else TrigTerm(*t) for t in self.terms)
        for t in terms:
            if t.kind not in ("cos", "sin"):
                raise DomainError(f"unknown trig kind {t.kind!r}")
            if len(t.mode) != self.d or not (0 <= t.i < self.d and 0 <= t.j < self.d):
                raise DomainError(f"term {t} does not match dimension {self.d}")
        object.__setattr__(self, "terms", terms)
        if self.eps < 0:
            raise DomainError("eps must be non-negative")
        if self.eps * self.perturbation_bound() >= 1.0:
            raise DomainError("perturbation too large: g_inv may fail to be positive definite")

    @classmethod
    def flat(cls, d=1):
        return cls(d=d)

    @classmethod
    def cosine(cls, d=1, eps=0.1):
        """g^{ii} = 1 + eps cos(x_i); the default perturbed metric."""
        terms = tuple(TrigTerm(i, i, 1.0, tuple(int(k == i) for k in range(d)), "cos")
                      for i in range(d))
        return cls(d=d, eps=eps, terms=terms)

    @classmethod
    def from_table(cls, d, eps, table, period=TWO_PI):
        """Build from rows [i, j, coef, [m_1..m_d], kind]."""
        terms = tuple(TrigTerm(int(r[0]), int(r[1]), float(r[2]), tuple(int(m) for m in r[3]),
                               str(r[4]) if len(r) > 4 else "cos") for r in table)
        return cls(d=d, eps=eps, terms=terms, period=period)

    def perturbation_bound(self):
        """Upper bound for the operator norm of p(x); so |g_inv - Id| <= eps * bound."""
        return float(sum(abs(t.coef) * (1 if t.i == t.j else 2) for t in self.terms))

    def _angles(self, x, term):
        k = TWO_PI / self.period
        return k * np.tensordot(x, np.asarray(term.mode, dtype=float), axes=([-1], [0]))

    def g_inv(self, x):
        """Inverse metric at points x of shape (..., d); returns (..., d, d)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (self.d, self.d))
        out[..., np.arange(self.d), np.arange(self.d)] = 1.0
        if self.eps == 0.0:
            return out
        for t in self.terms:
            th = self._angles(x, t)
            val = self.eps * t.coef * (np.cos(th) if t.kind == "cos" else np.sin(th))
            out[..., t.i, t.j] += val
            if t.i != t.j:
                out[..., t.j, t.i] += val
        return out

    def d_g_inv(self, x):
        """First derivatives, shape (..., d, d, d); last index is the derivative direction."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (self.d,) * 3)
        if self.eps == 0.0:
            return out
        k = TWO_PI / self.period
        for t in self.terms:
            th = self._angles(x, t)
            base = self.eps * t.coef * (-np.sin(th) if t.kind == "cos" else np.cos(th))
            for a, m in enumerate(t.mode):
                if m == 0:
                    continue
                val = base * (k * m)
                out[..., t.i, t.j, a] += val
                if t.i != t.j:
                    out[..., t.j, t.i, a] += val
        return out

    def dd_g_inv(self, x):
        """Second derivatives, shape (..., d, d, d, d)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (self.d,) * 4)
        if self.eps == 0.0:
            return out
        k = TWO_PI / self.period
        for t in self.terms:
            th = self._angles(x, t)
            base = -self.eps * t.coef * (np.cos(th) if t.kind == "cos" else np.sin(th))
            for a, ma in enumerate(t.mode):
                for b, mb in enumerate(t.mode):
                    if ma == 0 or mb == 0:
                        continue
                    val = base * (k * ma) * (k * mb)
                    out[..., t.i, t.j, a, b] += val
                    if t.i != t.j:
                        out[..., t.j, t.i, a, b] += val
        return out

    def volume(self, x):
        """Riemannian volume density sqrt(det g) = det(g_inv)^(-1/2)."""
        return np.linalg.det(self.g_inv(x)) ** -0.5

    def hamiltonian(self, x, p):
        G = self.g_inv(x)
        return np.einsum("...i,...ij,...j->...", p, G, p)


# ---------------------------------------------------------------------------
# phase functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseBox:
    """Validity box; unbounded sides are +-inf."""

    t: tuple = (-np.inf, np.inf)
    x_lo: tuple = None
    x_hi: tuple = None
    xi_lo: tuple = None
    xi_hi: tuple = None

    def contains(self, t, x, xi):
        t = np.asarray(t, dtype=float)
        ok = (t >= self.t[0]) & (t <= self.t[1])
        for lo, hi, v in ((self.x_lo, self.x_hi, x), (self.xi_lo, self.xi_hi, xi)):
            v = np.asarray(v, dtype=float)
            if lo is not None:
                ok = ok & np.all(v >= np.asarray(lo), axis=-1)
            if hi is not None:
                ok = ok & np.all(v <= np.asarray(hi), axis=-1)
        return ok


def _as_points(t, x, xi, d):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if d == 1:
        if x.ndim == 0 or x.shape[-1] != 1:
            x = x[..., None]
        if xi.ndim == 0 or xi.shape[-1] != 1:
            xi = xi[..., None]
    shape = np.broadcast_shapes(t.shape, x.shape[:-1], xi.shape[:-1])
    return (np.broadcast_to(t, shape), np.broadcast_to(x, shape + (d,)),
            np.broadcast_to(xi, shape + (d,)))


class PhaseFunction:
    """Base class: phi(t, x, xi) with gradients and the mixed Hessian.

    Points broadcast: t has shape S, x and xi have shape S + (d,).  For d = 1
    the trailing axis may be omitted.
    """

    variant = "generic"
    #: for phases x . xi + t h(xi): callable h, enables fast evaluation paths
    time_symbol = None

    def __init__(self, d, box=None):
        self.d = int(d)
        self.box = box if box is not None else PhaseBox()

    def points(self, t, x, xi):
        return _as_points(t, x, xi, self.d)

    def check_domain(self, t, x, xi):
        t, x, xi = self.points(t, x, xi)
        if not np.all(self.box.contains(t, x, xi)):
            raise DomainError(f"point outside the validity box of the {self.variant} phase")
        return t, x, xi

    def phi(self, t, x, xi):
        raise NotImplementedError

    def grad_tx(self, t, x, xi):
        raise NotImplementedError

    def mixed_hess(self, t, x, xi):
        raise NotImplementedError

    def grad_xi(self, t, x, xi):
        raise NotImplementedError

    def describe(self):
        return {"variant": self.variant, "d": self.d}


class GraphPhase(PhaseFunction):
    """phi = x . xi + t h(xi)."""

    def __init__(self, d, h, grad_h, variant, params=None, box=None):
        super().__init__(d, box)
        self._h = h
        self._grad_h = grad_h
        self.variant = variant
        self.params = params or {}
        self.time_symbol = h
        self.time_symbol_grad = grad_h

    def phi(self, t, x, xi):
        t, x, xi = self.points(t, x, xi)
        return np.sum(x * xi, axis=-1) + t * self._h(xi)

    def grad_tx(self, t, x, xi):
        t, x, xi = self.points(t, x, xi)
        return np.concatenate([xi, self._h(xi)[..., None]], axis=-1)

    def mixed_hess(self, t, x, xi):
        t, x, xi = self.points(t, x, xi)
        eye = np.broadcast_to(np.eye(self.d), xi.shape[:-1] + (self.d, self.d))
        return np.concatenate([eye, self._grad_h(xi)[..., None, :]], axis=-2)

    def grad_xi(self, t, x, xi):
        t, x, xi = self.points(t, x, xi)
        return x + t[..., None] * self._grad_h(xi)

    def describe(self):
        return {"variant": self.variant, "d": self.d, **self.params}


def paraboloid(d=1, box=None):
    """Schroedinger phase x . xi + t |xi|^2."""
    return GraphPhase(d, lambda xi: np.sum(xi * xi, axis=-1), lambda xi: 2.0 * xi,
                      "paraboloid", box=box)


def hyperplane(velocity, box=None):
    """Curvature-free phase x . xi + t v . xi."""
    v = np.atleast_1d(np.asarray(velocity, dtype=float))
    return GraphPhase(v.size, lambda xi: xi @ v, lambda xi: np.broadcast_to(v, xi.shape),
                      "hyperplane", params={"velocity": v.tolist()}, box=box)


def cone(d=1, sign=1, box=None):
    """Half-wave phase x . xi + sign t |xi| (singular at xi = 0)."""
    sign = 1.0 if sign >= 0 else -1.0

    def h(xi):
        return sign * np.sqrt(np.sum(xi * xi, axis=-1))

    def gh(xi):
        r = np.sqrt(np.sum(xi * xi, axis=-1, keepdims=True))
        if np.any(r == 0):
            raise DegeneracyError("cone phase is not smooth at xi = 0")
        return sign * xi / r

    return GraphPhase(d, h, gh, "cone", params={"sign": int(sign)}, box=box)


class TimeRescaledPhase(PhaseFunction):
    """psi(t, x, xi) = inner(c t, x, xi)."""

    variant = "time-rescaled"

    def __init__(self, inner, c, box=None):
        super().__init__(inner.d, box)
        self.inner = inner
        self.c = float(c)
        if inner.time_symbol is not None:
            self.time_symbol = lambda xi: self.c * inner.time_symbol(xi)
            self.time_symbol_grad = lambda xi: self.c * inner.time_symbol_grad(xi)

    def phi(self, t, x, xi):
        t, x, xi = self.points(t, x, xi)
        return self.inner.phi(self.c * t, x, xi)

    def grad_tx(self, t, x, xi):
        t, x, xi = self.points(t, x, xi)
        g = np.array(self.inner.grad_tx(self.c * t, x, xi), copy=True)
        g[..., -1] *= self.c
        return g

    def mixed_hess(self, t, x, xi):
        t, x, xi = self.points(t, x, xi)
        m = np.array(self.inner.mixed_hess(self.c * t, x, xi), copy=True)
        m[..., -1, :] *= self.c
        return m

    def grad_xi(self, t, x, xi):
        t, x, xi = self.points(t, x, xi)
        return self.inner.grad_xi(self.c * t, x, xi)

    def describe(self):
        return {"variant": self.variant, "d": self.d, "c": self.c, "inner": self.inner.describe()}


def time_rescaled(inner, c, box=None):
    return TimeRescaledPhase(inner, c, box=box)


class EikonalBackedPhase(PhaseFunction):
    """phi(t, x, xi) = phi~(t, x, xi) from an EikonalPhase (t plays the role of s)."""

    variant = "eikonal-backed"

    def __init__(self, eik, box=None):
        if box is None:
            box = PhaseBox(t=(-eik.alpha, eik.alpha), xi_lo=tuple(eik.xi_lo), xi_hi=tuple(eik.xi_hi))
        super().__init__(eik.metric.d, box)
        self.eik = eik

    def phi(self, t, x, xi):
        t, x, xi = self.points(t, x, xi)
        return self.eik.evaluate(t, x, xi).phi

    def grad_tx(self, t, x, xi):
        t, x, xi = self.points(t, x, xi)
        r = self.eik.evaluate(t, x, xi, derivatives=True)
        return np.concatenate([r.grad_x, r.dphi_ds[..., None]], axis=-1)

    def mixed_hess(self, t, x, xi):
        t, x, xi = self.points(t, x, xi)
        return self.eik.evaluate(t, x, xi, derivatives=True).mixed_hess

    def grad_xi(self, t, x, xi):
        t, x, xi = self.points(t, x, xi)
        return self.eik.evaluate(t, x, xi, derivatives=True).grad_xi

    def describe(self):
        return {"variant": self.variant, "d": self.d, "eps": self.eik.metric.eps,
                "alpha": self.eik.alpha}


# ---------------------------------------------------------------------------
# normals and transversality
# ---------------------------------------------------------------------------

def mixed_hessian(phase, t, x, xi):
    """d^2 phi / d xi d(x, t) as a (d+1) x d matrix; raises DomainError off the validity box."""
    t, x, xi = phase.check_domain(t, x, xi)
    return phase.mixed_hess(t, x, xi)


def _null_normals(H, rank_floor):
    U, S, _ = np.linalg.svd(H, full_matrices=True)
    smin = S[..., -1]
    if np.any(smin < rank_floor):
        raise DegeneracyError(
            f"mixed Hessian smallest singular value {float(np.min(smin)):.3e} below floor {rank_floor}")
    nu = U[..., :, -1]
    sign = np.where(nu[..., -1] > 0, -1.0, 1.0)
    return nu * sign[..., None], smin


def normal_vector(phase, t, x, xi, rank_floor=RANK_FLOOR):
    """Unit normal of the canonical surface xi -> grad_(x,t) phi at (t, x).

    It spans the orthogonal complement of the mixed Hessian's column space;
    the sign makes the t-component non-positive.
    """
    return _null_normals(mixed_hessian(phase, t, x, xi), rank_floor)[0]


@dataclass(frozen=True)
class Lattice:
    """Sample lattice for transversality: t nodes, x points, and two xi point sets."""

    t: np.ndarray
    x: np.ndarray
    xi1: np.ndarray
    xi2: np.ndarray

    @staticmethod
    def _box_points(lo, hi, n):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)

    @classmethod
    def from_boxes(cls, t_box, x_box, xi1_box, xi2_box, n=5, n_xi=None):
        """Tensor lattice with n nodes per t/x axis and n_xi per xi axis."""
        n_xi = n_xi or 2 * n + 1
        return cls(t=np.linspace(t_box[0], t_box[1], n),
                   x=cls._box_points(x_box[0], x_box[1], n),
                   xi1=cls._box_points(xi1_box[0], xi1_box[1], n_xi),
                   xi2=cls._box_points(xi2_box[0], xi2_box[1], n_xi))

    @property
    def counts(self):
        return {"t": len(self.t), "x": len(self.x), "xi1": len(self.xi1), "xi2": len(self.xi2)}


@dataclass(frozen=True)
class TransversalityReport:
    sup: float
    margin: float
    argmax: dict
    counts: dict
    min_singular: tuple

    def holds(self, delta_min):
        return self.margin >= delta_min


def _lattice_normals(phase, lattice, xi, rank_floor):
    t = np.asarray(lattice.t, dtype=float)[:, None, None]
    x = np.asarray(lattice.x, dtype=float)[None, :, None, :]
    xi = np.asarray(xi, dtype=float)[None, None, :, :]
    return _null_normals(mixed_hessian(phase, t, x, xi), rank_floor)


def transversality_margin(phase_a, phase_b, lattice, rank_floor=RANK_FLOOR):
    """sup |<nu_1(t,x,xi_1), nu_2(t,x,xi_2)>| over the lattice, and margin 1 - sup.

    The inner products are summed component by component in a fixed order,
    so exchanging the phases (and their xi sets) gives bit-identical results.
    """
    na, sa = _lattice_normals(phase_a, lattice, lattice.xi1, rank_floor)
    nb, sb = _lattice_normals(phase_b, lattice, lattice.xi2, rank_floor)
    dots = np.zeros(na.shape[:2] + (na.shape[2], nb.shape[2]))
    for k in range(na.shape[-1]):
        dots += na[..., :, None, k] * nb[..., None, :, k]
    dots = np.abs(dots)
    idx = np.unravel_index(int(np.argmax(dots)), dots.shape)
    sup = float(min(dots[idx], 1.0))
    argmax = {"t": float(lattice.t[idx[0]]), "x": np.asarray(lattice.x[idx[1]]).tolist(),
              "xi1": np.asarray(lattice.xi1[idx[2]]).tolist(),
              "xi2": np.asarray(lattice.xi2[idx[3]]).tolist()}
    return TransversalityReport(sup=sup, margin=1.0 - sup, argmax=argmax, counts=lattice.counts,
                                min_singular=(float(sa.min()), float(sb.min())))


def swap_lattice(lattice):
    return Lattice(t=lattice.t, x=lattice.x, xi1=lattice.xi2, xi2=lattice.xi1)


# ---------------------------------------------------------------------------
# eikonal solver
# ---------------------------------------------------------------------------

@dataclass
class RayData:
    """Everything known about phi~ at a batch of points (s, x, xi)."""

    phi: np.ndarray
    grad_x: np.ndarray
    dphi_ds: np.ndarray
    a0: np.ndarray
    jac_det: np.ndarray
    x0: np.ndarray
    mixed_hess: np.ndarray = None
    grad_xi: np.ndarray = None


def _ray_rhs(metric, X, P, JX, JP, KX, KP, with_xi):
    """Right-hand side of the ray system with variational equations and transport.

    Shapes: X, P (B, d); JX, JP, KX, KP (B, d, d).  Returns the derivatives and
    d(log a0)/ds = -Laplace_g phi~.
    """
    G = metric.g_inv(X)
    dG = metric.d_g_inv(X)
    ddG = metric.dd_g_inv(X)
    dX = 2.0 * np.einsum("bij,bj->bi", G, P)
    dP = -np.einsum("bi,bijk,bj->bk", P, dG, P)
    Hpx = 2.0 * np.einsum("bijk,bj->bik", dG, P)
    Hpp = 2.0 * G
    Hxx = np.einsum("bi,bijkl,bj->bkl", P, ddG, P)
    HpxT = np.swapaxes(Hpx, -1, -2)

    def lin(A, B):
        return (np.einsum("bik,bkj->bij", Hpx, A) + np.einsum("bik,bkj->bij", Hpp, B),
                -np.einsum("bik,bkj->bij", Hxx, A) - np.einsum("bik,bkj->bij", HpxT, B))

    dJX, dJP = lin(JX, JP)
    if with_xi:
        dKX, dKP = lin(KX, KP)
    else:
        dKX = dKP = None
    # Hessian of phi~ in x along the ray, then the Laplace-Beltrami operator
    hess = np.einsum("bik,bkj->bij", JP, np.linalg.inv(JX))
    Ginv = np.linalg.inv(G)
    dlogvol = -0.5 * np.einsum("bij,bjik->bk", Ginv, dG)
    lap = (np.einsum("bij,bij->b", G, hess)
           + np.einsum("biij,bj->b", dG, P)
           + np.einsum("bk,bk->b", dlogvol, np.einsum("bij,bj->bi", G, P)))
    return dX, dP, dJX, dJP, dKX, dKP, -lap


def _ray_rhs_1d(metric, X, P, JX, JP, KX, KP, with_xi):
    """Scalar version of `_ray_rhs` for d = 1 (same equations, no einsum)."""
    x = X[:, None]
    g = metric.g_inv(x)[:, 0, 0]
    g1 = metric.d_g_inv(x)[:, 0, 0, 0]
    g2 = metric.dd_g_inv(x)[:, 0, 0, 0, 0]
    dX = 2.0 * g * P
    dP = -g1 * P * P
    hpx = 2.0 * g1 * P
    hpp = 2.0 * g
    hxx = g2 * P * P
    dJX = hpx * JX + hpp * JP
    dJP = -hxx * JX - hpx * JP
    if with_xi:
        dKX = hpx * KX + hpp * KP
        dKP = -hxx * KX - hpx * KP
    else:
        dKX = dKP = None
    lap = g * (JP / JX) + 0.5 * g1 * P
    return dX, dP, dJX, dJP, dKX, dKP, -lap


def integrate_rays(metric, x0, xi, s, steps, with_xi=False):
    """RK4 integration of rays started at (x0, xi) up to times s (per ray).

    Parameters
    ----------
    x0, xi : ndarray (B, d)
    s : ndarray (B,)
    steps : int
        Number of fixed RK4 steps (the step is s / steps for each ray).

    Returns
    -------
    tuple (X, P, JX, JP, KX, KP, log_a0) at time s.  For d = 1 the Jacobians
    are returned with shape (B, 1, 1).
    """
    d = metric.d
    B = x0.shape[0]
    one_d = d == 1
    if one_d:
        y = [x0[:, 0].copy(), xi[:, 0].copy(), np.ones(B), np.zeros(B)]
        y += [np.zeros(B), np.ones(B)] if with_xi else [None, None]
        rhs = _ray_rhs_1d
    else:
        eye = np.broadcast_to(np.eye(d), (B, d, d))
        y = [x0.copy(), xi.copy(), eye.copy(), np.zeros((B, d, d))]
        y += [np.zeros((B, d, d)), eye.copy()] if with_xi else [None, None]
        rhs = _ray_rhs
    y.append(np.zeros(B))
    h = np.asarray(s, dtype=float) / steps

    def scale(v, c):
        if v is None:
            return None
        if one_d:
            return v * c
        return v * c.reshape((-1,) + (1,) * (v.ndim - 1))

    def axpy(base, k, c):
        return [None if b is None else b + scale(kk, c) for b, kk in zip(base, k)]

    for _ in range(steps):
        k1 = rhs(metric, *y[:6], with_xi)
        k2 = rhs(metric, *axpy(y, k1, 0.5 * h)[:6], with_xi)
        k3 = rhs(metric, *axpy(y, k2, 0.5 * h)[:6], with_xi)
        k4 = rhs(metric, *axpy(y, k3, h)[:6], with_xi)
        y = [None if yy is None else
             yy + scale(a + 2.0 * b + 2.0 * c + e, h / 6.0)
             for yy, a, b, c, e in zip(y, k1, k2, k3, k4)]
    if one_d:
        X, P, JX, JP, KX, KP, la = y
        X, P = X[:, None], P[:, None]
        JX, JP = JX[:, None, None], JP[:, None, None]
        if with_xi:
            KX, KP = KX[:, None, None], KP[:, None, None]
        return X, P, JX, JP, KX, KP, la
    return tuple(y)


@dataclass
class EikonalPhase:
    """Solution phi~(s, x, xi) of the eikonal equation for a perturbed-flat metric.

    Values at arbitrary points come from `evaluate`, which shoots rays; the
    tensor-grid table produced by `solve_eikonal` is kept for inspection and
    for the residual self-check.
    """

    metric: Metric
    alpha: float
    xi_lo: np.ndarray
    xi_hi: np.ndarray
    steps_per_unit: float = 512.0
    jac_floor: float = 0.5
    newton_tol: float = 1e-13
    s_nodes: np.ndarray = None
    x_nodes: np.ndarray = None
    xi_nodes: np.ndarray = None
    phi_table: np.ndarray = None
    a0_table: np.ndarray = None
    residual_max: float = None
    notes: dict = field(default_factory=dict)

    def _steps(self, s, xi):
        smax = float(np.max(np.abs(s))) if np.size(s) else 0.0
        pmax = float(np.max(np.abs(xi))) if np.size(xi) else 0.0
        return max(8, int(np.ceil(self.steps_per_unit * smax * max(1.0, pmax))))

    def evaluate(self, s, x, xi, derivatives=False):
        """phi~, its gradients and a0 at points (s, x, xi) by Newton shooting.

        Raises CausticError if the flow Jacobian det dX/dx0 drops below
        `jac_floor` at any of the requested points.
        """
        d = self.metric.d
        s, x, xi = _as_points(s, x, xi, d)
        shape = s.shape
        S = s.reshape(-1)
        Xt = x.reshape(-1, d)
        XI = xi.reshape(-1, d)
        steps = self._steps(S, XI)
        G = self.metric.g_inv(Xt)
        x0 = Xt - 2.0 * S[:, None] * np.einsum("bij,bj->bi", G, XI)
        for _ in range(60):
            X, P, JX, JP, _, _, _ = integrate_rays(self.metric, x0, XI, S, steps)
            r = X - Xt
            if np.max(np.abs(r), initial=0.0) <= self.newton_tol * (1.0 + np.max(np.abs(Xt), initial=0.0)):
                break
            x0 = x0 - np.linalg.solve(JX, r[..., None])[..., 0]
        else:
            det = np.linalg.det(JX)
            if np.min(det) < self.jac_floor:
                i = int(np.argmin(det))
                raise CausticError(float(S[i]), float(det[i]))
            raise AccuracyError("Newton shooting did not converge")
        X, P, JX, JP, KX, KP, la = integrate_rays(self.metric, x0, XI, S, steps, with_xi=derivatives)
        det = np.linalg.det(JX)
        if det.size and np.min(det) < self.jac_floor:
            i = int(np.argmin(det))
            raise CausticError(float(S[i]), float(det[i]))
        H0 = self.metric.hamiltonian(x0, XI)
        phi = np.sum(x0 * XI, axis=-1) + S * H0
        out = RayData(phi=phi.reshape(shape), grad_x=P.reshape(shape + (d,)),
                      dphi_ds=(-H0).reshape(shape), a0=np.exp(la).reshape(shape),
                      jac_det=det.reshape(shape), x0=x0.reshape(shape + (d,)))
        if derivatives:
            dx0_dxi = -np.linalg.solve(JX, KX)
            G0 = self.metric.g_inv(x0)
            dG0 = self.metric.d_g_inv(x0)
            gradx_H = np.einsum("bi,bijk,bj->bk", XI, dG0, XI)
            grad_xi_H = 2.0 * np.einsum("bij,bj->bi", G0, XI)
            dP_dxi = KP + np.einsum("bik,bkj->bij", JP, dx0_dxi)
            dt_row = -(np.einsum("bkj,bk->bj", dx0_dxi, gradx_H) + grad_xi_H)
            mixed = np.concatenate([dP_dxi, dt_row[:, None, :]], axis=1)
            gxi = (x0 + np.einsum("bkj,bk->bj", dx0_dxi, XI + S[:, None] * gradx_H)
                   + S[:, None] * grad_xi_H)
            out.mixed_hess = mixed.reshape(shape + (d + 1, d))
            out.grad_xi = gxi.reshape(shape + (d,))
        return out

    def phi(self, s, x, xi):
        return self.evaluate(s, x, xi).phi

    def as_phase(self):
        return EikonalBackedPhase(self)


def chebyshev_lobatto(n, a, b):
    """Chebyshev-Lobatto nodes on [a, b] (ascending) and the differentiation matrix."""
    if n < 2:
        raise ValueError("need at least two Chebyshev nodes")
    k = np.arange(n)
    z = -np.cos(np.pi * k / (n - 1))
    c = np.where((k == 0) | (k == n - 1), 2.0, 1.0) * (-1.0) ** k
    dz = z[:, None] - z[None, :]
    D = np.outer(c, 1.0 / c) / (dz + np.eye(n))
    D -= np.diag(D.sum(axis=1))
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * z
    if n % 2 == 1:
        nodes[n // 2] = 0.5 * (a + b)
    return nodes, D * (2.0 / (b - a))


def eikonal_residual(metric, s_nodes, Ds, x_nodes, xi_nodes, phi_table):
    """Residual d_s phi + g^{ij} d_i phi d_j phi on a table (d = 1).

    d_s uses the Chebyshev matrix Ds; d_x is spectral on the periodic part
    phi - x xi.  Returns an array shaped like the table.
    """
    if metric.d != 1:
        raise NotImplementedError("table residual implemented for d = 1")
    xx = x_nodes[None, :, None]
    per = phi_table - xx * xi_nodes[None, None, :]
    k = np.fft.fftfreq(x_nodes.size, d=(x_nodes[1] - x_nodes[0]) / TWO_PI) * (TWO_PI / metric.period)
    dper = np.real(np.fft.ifft(1j * k[None, :, None] * np.fft.fft(per, axis=1), axis=1))
    phix = dper + xi_nodes[None, None, :]
    phis = np.tensordot(Ds, phi_table, axes=([1], [0]))
    g = metric.g_inv(x_nodes[:, None])[:, 0, 0]
    return phis + g[None, :, None] * phix ** 2


def solve_eikonal(metric, alpha=None, xi_box=((0.5,), (2.0,)), grid=(33, 64, 64),
                  residual_tol=1e-6, jac_floor=0.5, rank_floor=RANK_FLOOR, steps_per_unit=512.0):
    """Tabulate the eikonal phase on [-alpha, alpha] x periodic x x xi_box.

    Parameters
    ----------
    metric : Metric
    alpha : float or None
        Half-width of the time window.  None searches 0.5, 0.25, ... until the
        caustic and rank-floor checks pass.
    xi_box : (lo, hi)
        Bounds of the frequency box, one entry per dimension.
    grid : (ns, nx, nxi)
        Table size: Chebyshev-Lobatto nodes in s, uniform periodic nodes in
        x, uniform nodes in xi (per axis).
    residual_tol : float
        Maximum admissible residual on interior table nodes (d = 1 only).

    Returns
    -------
    EikonalPhase
    """
    lo = np.atleast_1d(np.asarray(xi_box[0], dtype=float))
    hi = np.atleast_1d(np.asarray(xi_box[1], dtype=float))
    if lo.size != metric.d:
        raise DomainError("xi_box dimension does not match the metric")
    candidates = [alpha] if alpha is not None else [0.5 / 2 ** k for k in range(8)]
    last_error = None
    for a in candidates:
        eik = EikonalPhase(metric=metric, alpha=float(a), xi_lo=lo, xi_hi=hi,
                           steps_per_unit=steps_per_unit, jac_floor=jac_floor)
        try:
            _tabulate(eik, grid, rank_floor)
        except (CausticError, DegeneracyError) as exc:
            last_error = exc
            continue
        eik.notes["alpha_search"] = alpha is None
        if eik.residual_max is not None and eik.residual_max > residual_tol:
            raise AccuracyError(f"eikonal residual {eik.residual_max:.3e} exceeds {residual_tol:.1e}")
        return eik
    raise last_error


def _tabulate(eik, grid, rank_floor):
    metric = eik.metric
    d = metric.d
    ns, nx, nxi = grid
    s_nodes, Ds = chebyshev_lobatto(ns, -eik.alpha, eik.alpha)
    x_axis = np.arange(nx) * (metric.period / nx)
    xi_axes = [np.linspace(a, b, nxi) for a, b in zip(eik.xi_lo, eik.xi_hi)]
    if d == 1:
        S, X, XI = np.meshgrid(s_nodes, x_axis, xi_axes[0], indexing="ij")
        r = eik.evaluate(S, X[..., None], XI[..., None], derivatives=True)
    else:
        xs = np.stack(np.meshgrid(*([x_axis] * d), indexing="ij"), -1).reshape(-1, d)
        xis = np.stack(np.meshgrid(*xi_axes, indexing="ij"), -1).reshape(-1, d)
        S = s_nodes[:, None, None]
        r = eik.evaluate(S, xs[None, :, None, :], xis[None, None, :, :], derivatives=True)
    _null_normals(r.mixed_hess, rank_floor)  # raises if rank drops below the floor
    eik.s_nodes = s_nodes
    eik.x_nodes = x_axis
    eik.xi_nodes = xi_axes[0] if d == 1 else np.stack(xi_axes)
    eik.phi_table = r.phi
    eik.a0_table = r.a0
    eik.notes["min_jacobian"] = float(np.min(r.jac_det))
    eik.notes["min_singular"] = float(np.min(np.linalg.svd(r.mixed_hess, compute_uv=False)[..., -1]))
    if d == 1:
        res = eikonal_residual(metric, s_nodes, Ds, x_axis, eik.xi_nodes, r.phi)
        eik.residual_max = float(np.max(np.abs(res[1:-1])))
