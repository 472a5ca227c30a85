"""Convex, L-smooth two-firm loss models.

Each model exposes a per-owner loss ``f(x; owner)`` for ``owner`` in
``{"low", "high"}``; the shared objective is their average and model quality
is ``1 - f``. Losses are never clamped to ``[0, 1]`` (that would break
smoothness). Instead the generators scale them so the region visited by
gradient descent stays inside ``[0, 1]``, and the trainer asserts it.
"""

from __future__ import annotations

from typing import Literal

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

Owner = Literal["low", "high"]
OWNERS: tuple[Owner, Owner] = ("low", "high")
ModelParams = np.ndarray


class InvalidTargetError(ValueError):
    pass


class LossModel:
    """Base class for a pair of per-owner losses.

    Subclasses implement :meth:`owner_loss`, :meth:`owner_grad` and
    :meth:`owner_optimum`, and set ``dim``, ``smoothness``, ``optimum`` and
    ``optimum_value`` in their constructor.
    """

    dim: int
    smoothness: float
    optimum: ModelParams
    optimum_value: float

    def owner_loss(self, x: ModelParams, owner: Owner) -> float:
        raise NotImplementedError

    def owner_grad(self, x: ModelParams, owner: Owner) -> np.ndarray:
        raise NotImplementedError

    def owner_optimum(self, owner: Owner) -> ModelParams:
        """Minimizer of ``f(.; owner)``, i.e. a firm saturated on its own data."""
        raise NotImplementedError

    def loss(self, x: ModelParams) -> float:
        return 0.5 * (self.owner_loss(x, "low") + self.owner_loss(x, "high"))

    def grad(self, x: ModelParams) -> np.ndarray:
        return 0.5 * (self.owner_grad(x, "low") + self.owner_grad(x, "high"))

    def quality(self, x: ModelParams) -> float:
        return 1.0 - self.loss(x)

    @property
    def max_quality(self) -> float:
        return 1.0 - self.optimum_value


def avg_loss_and_grad(model: LossModel, x: ModelParams) -> tuple[float, np.ndarray]:
    return model.loss(x), model.grad(x)


class QuadraticPair(LossModel):
    """``f(x; i) = 0.5 (x - c_i)^T A_i (x - c_i) + m_i`` for both owners."""

    def __init__(self, centers, hessians, offsets):
        self.centers = {o: np.asarray(centers[o], dtype=float) for o in OWNERS}
        self.hessians = {o: np.asarray(hessians[o], dtype=float) for o in OWNERS}
        self.offsets = {o: float(offsets[o]) for o in OWNERS}
        self.dim = self.centers["low"].shape[0]
        for o in OWNERS:
            eig = np.linalg.eigvalsh(self.hessians[o])
            if eig[0] < -1e-12:
                raise ValueError(f"Hessian of owner {o!r} is not positive semidefinite")
        a_sum = self.hessians["low"] + self.hessians["high"]
        self.smoothness = float(np.linalg.eigvalsh(0.5 * a_sum)[-1])
        rhs = self.hessians["low"] @ self.centers["low"] + self.hessians["high"] @ self.centers["high"]
        self.optimum = np.linalg.solve(a_sum, rhs)
        self.optimum_value = self.loss(self.optimum)

    def owner_loss(self, x, owner):
        r = np.asarray(x, dtype=float) - self.centers[owner]
        return float(0.5 * r @ self.hessians[owner] @ r + self.offsets[owner])

    def owner_grad(self, x, owner):
        return self.hessians[owner] @ (np.asarray(x, dtype=float) - self.centers[owner])

    def owner_optimum(self, owner):
        return self.centers[owner].copy()


def quadratic_gap(cross_loss: float, curvature_ratio: float) -> float:
    """Curvature part of the shared minimum for :func:`make_complementary_quadratics`.

    With ``A_i = s_i * A`` and the center offset normalized so that
    ``0.5 d^T A d = 1``, the average objective's minimum exceeds the mean
    offset by ``0.5 * s_l s_h / (s_l + s_h)``; this returns twice that.
    """
    s_h = cross_loss
    s_l = cross_loss / curvature_ratio
    return s_l * s_h / (s_l + s_h)


def make_complementary_quadratics(
    dim: int,
    target_q_h_max: float,
    asymmetry: float,
    seed: int,
    *,
    cross_loss: float = 0.1,
    curvature_ratio: float = 1.0,
    condition: float = 4.0,
    slow_alignment: float = 0.0,
) -> QuadraticPair:
    """Two quadratics whose pooled minimum gives quality ``target_q_h_max``.

    Both Hessians share a random shape ``A`` (eigenvalues in
    ``[1, condition]``, random rotation) and the centers sit at ``+-r u`` for
    a random unit ``u``, scaled so ``0.5 d^T A d = 1`` with ``d = c_l - c_h``.
    The high owner's Hessian is ``cross_loss * A`` and the low owner's is
    ``cross_loss / curvature_ratio * A``, so ``cross_loss`` is the extra loss
    the high owner's data assigns to the low firm's own optimum. Offsets
    satisfy ``m_l - m_h = asymmetry`` and put the pooled minimum at
    ``1 - target_q_h_max``. ``slow_alignment`` in ``[0, 1]`` tilts ``u`` toward
    the flattest curvature direction, which keeps the high firm's warm-up
    from reaching the pooled optimum.

    Because the Hessians are proportional, gradient descent on the average
    started at either center never raises a per-owner loss above its value
    at the centers, so checking the centers bounds the reachable region.

    Raises:
        InvalidTargetError: if an offset would be negative or a per-owner
            loss at a center would exceed 1.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not 0.0 < target_q_h_max < 1.0:
        raise InvalidTargetError(f"target_q_h_max must lie in (0, 1), got {target_q_h_max}")
    if cross_loss <= 0 or curvature_ratio <= 0 or condition < 1:
        raise ValueError("cross_loss, curvature_ratio must be positive and condition >= 1")
    if not 0.0 <= slow_alignment <= 1.0:
        raise ValueError("slow_alignment must lie in [0, 1]")

    rng = np.random.default_rng(seed)
    rotation, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    eig = np.sort(rng.uniform(1.0, condition, size=dim))
    eig[0], eig[-1] = 1.0, condition
    shape = rotation @ np.diag(eig) @ rotation.T
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    u = slow_alignment * rotation[:, 0] + (1.0 - slow_alignment) * u
    u /= np.linalg.norm(u)
    d = 2.0 * u
    shape /= 0.5 * d @ shape @ d
    shape = 0.5 * (shape + shape.T)

    s_h = cross_loss
    s_l = cross_loss / curvature_ratio
    gap = quadratic_gap(cross_loss, curvature_ratio)
    m_h = (2.0 * (1.0 - target_q_h_max) - gap - asymmetry) / 2.0
    m_l = m_h + asymmetry
    if m_h < 0 or m_l < 0:
        raise InvalidTargetError(
            f"offsets (m_l={m_l:.4g}, m_h={m_h:.4g}) would be negative; lower the "
            "asymmetry or the target quality"
        )
    if m_l + s_l > 1.0 or m_h + s_h > 1.0:
        raise InvalidTargetError(
            f"per-owner loss at a center exceeds 1 (low: {m_l + s_l:.4g}, high: {m_h + s_h:.4g})"
        )

    return QuadraticPair(
        centers={"low": u, "high": -u},
        hessians={"low": s_l * shape, "high": s_h * shape},
        offsets={"low": m_l, "high": m_h},
    )


class LogisticPair(LossModel):
    """Normalized, ridge-regularized logistic losses on two private datasets.

    ``f(x; i) = (mean_j log(1 + exp(-y_j z_j^T x)) + ridge/2 |x|^2) / normalizer``
    with labels in ``{-1, +1}``. The ridge term keeps the minimizers finite
    on separable data.
    """

    def __init__(self, data, ridge: float = 1e-2, normalizer: float | None = None):
        self.data = {o: (np.asarray(data[o][0], float), np.asarray(data[o][1], float)) for o in OWNERS}
        self.ridge = float(ridge)
        self.dim = self.data["low"][0].shape[1]
        self.normalizer = 1.0
        self._owner_opt = {o: self._fit((o,)) for o in OWNERS}
        pooled = self._fit(OWNERS)
        if normalizer is None:
            # every per-owner loss at the starting points and at 0, plus margin
            points = [np.zeros(self.dim), pooled, *self._owner_opt.values()]
            worst = max(self._raw(p, o)[0] for p in points for o in OWNERS)
            normalizer = max(1.0, 1.25 * worst)
        self.normalizer = float(normalizer)
        z_max = max(float(np.max(np.sum(z**2, axis=1))) for z, _ in self.data.values())
        self.smoothness = (z_max / 4.0 + self.ridge) / self.normalizer
        self.optimum = pooled
        self.optimum_value = self.loss(pooled)

    def _raw(self, x, owner):
        z, y = self.data[owner]
        margins = y * (z @ x)
        # log(1 + exp(-m)) computed stably
        loss = np.mean(np.logaddexp(0.0, -margins)) + 0.5 * self.ridge * x @ x
        grad = -(z.T @ (y * expit(-margins))) / len(y) + self.ridge * x
        return float(loss), grad

    def _hess(self, x, owner):
        z, y = self.data[owner]
        s = expit(y * (z @ x))
        return (z.T * (s * (1.0 - s))) @ z / len(y) + self.ridge * np.eye(self.dim)

    def _fit(self, owners):
        """Exact minimizer of the raw loss averaged over ``owners``."""
        k = len(owners)

        def fun(x):
            parts = [self._raw(x, o) for o in owners]
            return sum(p[0] for p in parts) / k, sum(p[1] for p in parts) / k

        def hess(x):
            return sum(self._hess(x, o) for o in owners) / k

        res = minimize(fun, np.zeros(self.dim), jac=True, hess=hess, method="trust-exact",
                       options={"gtol": 1e-13, "maxiter": 1000})
        return res.x

    def owner_loss(self, x, owner):
        return self._raw(np.asarray(x, float), owner)[0] / self.normalizer

    def owner_grad(self, x, owner):
        return self._raw(np.asarray(x, float), owner)[1] / self.normalizer

    def owner_optimum(self, owner):
        return self._owner_opt[owner].copy()


def make_synthetic_logistic(
    n_per_firm: int,
    dim: int,
    skew: float,
    seed: int,
    *,
    separation: float = 1.0,
    ridge: float = 1e-2,
) -> LogisticPair:
    """Gaussian-cluster classification data with complementary class skews.

    Class 0 (label -1) is centered at ``-separation * mu`` and class 1 at
    ``+separation * mu`` for a random unit ``mu``, unit covariance. The low
    firm draws a fraction ``skew`` of its points from class 0, the high firm
    a fraction ``1 - skew``, so the pooled data is balanced.
    """
    if n_per_firm < 10:
        raise ValueError("n_per_firm must be >= 10")
    if not 0.0 <= skew <= 1.0:
        raise ValueError("skew must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    mu = rng.standard_normal(dim)
    mu /= np.linalg.norm(mu)
    data = {}
    for owner, frac0 in (("low", skew), ("high", 1.0 - skew)):
        n0 = int(round(frac0 * n_per_firm))
        y = np.concatenate([-np.ones(n0), np.ones(n_per_firm - n0)])
        z = rng.standard_normal((n_per_firm, dim)) + separation * np.outer(y, mu)
        data[owner] = (z, y)
    return LogisticPair(data, ridge=ridge)
