"""Correlated gamma-frailty model for multivariate counts.

Each margin is Poisson with a multiplicative gamma frailty (mean-one, variance
xi); frailties share an exchangeable correlation rho. The composite likelihood
multiplies the closed-form bivariate margins of all p(p-1)/2 pairs.

Parameter layout (d = p + 2): baseline log-rates lambda_1..lambda_p, then the
unconstrained transforms t_xi = log(xi) and t_rho = artanh(rho).

The bivariate log-margin contains a terminating alternating series. It is
evaluated here through an equivalent all-positive-term form (a Pfaff
transformation of its hypergeometric representation),

    A = xi^m1 * sum_s C(m1,s) [G(m1+r)/G(m1+r-s)] [G(N+r-s)/G(m2+r)]
        * f^s (1-f)^(m1-s),        r = 1/xi, N = m1+m2,

which is cancellation-free whenever 0 <= rho <= 1. Transient rho < 0 (the
optimizer may briefly visit it) makes f > 1 and reintroduces signs; those are
tracked in log space with a cancellation detector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import digamma, gammaln

from ..data import Dataset
from ..errors import NumericDomainError
from .base import CompositeModel

MAX_COUNT = 170  # per-margin cap; log-gamma conditioning degrades beyond


@dataclass(frozen=True)
class FrailtyParams:
    """Constrained parameters: log-rates, frailty variance, frailty correlation."""

    lambdas: np.ndarray
    xi: float
    rho: float

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        object.__setattr__(self, "lambdas", lam)
        if not self.xi > 0:
            raise ValueError("xi must be positive")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")

    @property
    def p(self) -> int:
        return self.lambdas.shape[0]

    def to_unconstrained(self) -> np.ndarray:
        return np.concatenate(
            [self.lambdas, [np.log(self.xi), np.arctanh(self.rho)]]
        )

    @staticmethod
    def from_unconstrained(theta) -> "FrailtyParams":
        theta = np.asarray(theta, dtype=float)
        return FrailtyParams(theta[:-2], float(np.exp(theta[-2])), float(np.tanh(theta[-1])))


def frailty_truth(p) -> FrailtyParams:
    """Simulation-study truth: xi=0.25, rho=0.5, lambda alternating -/+0.25."""
    if p < 2:
        raise ValueError("need p >= 2")
    lam = np.where(np.arange(1, p + 1) % 2 == 0, 0.25, -0.25)
    return FrailtyParams(lam, 0.25, 0.5)


def scaled_pair_weight(p) -> float:
    """Uniform component weight 2/(p(p-1)) that rescales the pairwise objective."""
    if p < 2:
        raise ValueError("need p >= 2")
    return 2.0 / (p * (p - 1))


def _series_sums(m1, m2, xi, f, need_grad, lgi, lgr):
    """Scaled series A and its log-derivative ratios, vectorized over cells.

    `m1`, `m2` are integer arrays; `lgi[L] = lgamma(L+1)` and
    `lgr[L] = lgamma(L + 1/xi)` are shared lookup tables covering all integer
    offsets the cells need (counts are integers, so every gamma argument is a
    table index). Returns (logA_rest, RAf, Sr) with
      logA = m1*log(xi) + logA_rest,
      RAf  = (dA/df)/A,   Sr = (dA/dr)/A   (r = 1/xi).
    """
    f = np.asarray(f, dtype=float)
    N = m1 + m2
    smax = int(m1.max()) if m1.size else 0
    s = np.arange(smax + 1)
    M1 = m1[..., None]
    F = f[..., None]
    mask = s <= M1
    sc = np.minimum(s, M1)  # clamp masked entries so every index stays valid
    omf = 1.0 - F
    negomf = omf < 0
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = np.log(F)
        logomf = np.log(np.abs(omf))
        lf = np.where(s == 0, 0.0, s * logf)
        lomf = np.where(M1 - sc == 0, 0.0, (M1 - sc) * logomf)
        base = (
            lgi[M1] - lgi[sc] - lgi[M1 - sc]
            + lgr[M1] - lgr[M1 - sc]
            + lgr[N[..., None] - sc] - lgr[m2[..., None]]
        )
        logT = np.where(mask, base + lf + lomf, -np.inf)
        # signs: (1-f)^(m1-s) flips when f > 1
        signT = np.where(negomf & ((M1 - s) % 2 == 1), -1.0, 1.0)
        Mx = logT.max(axis=-1)
        T = np.exp(logT - Mx[..., None])
        Asc = (signT * T).sum(axis=-1)
    bad = np.isfinite(Mx) & (Asc <= 1e-10)
    if np.any(bad):
        i = tuple(np.argwhere(bad)[0])
        raise NumericDomainError(
            "pairwise-margin series cancelled catastrophically at counts "
            f"(m1={int(m1[i])}, m2={int(m2[i])}); parameters left the "
            "trustworthy region (rho far below 0?)"
        )
    logA = Mx + np.log(Asc)
    if not need_grad:
        return logA, None, None
    with np.errstate(divide="ignore", invalid="ignore"):
        # term-by-term d/df of f^s (1-f)^(m1-s), split into the two positive
        # pieces s f^(s-1) (1-f)^(m1-s) and (m1-s) f^s (1-f)^(m1-s-1)
        lfA = np.where(
            s == 0,
            -np.inf,
            np.log(np.maximum(s, 1)) + np.where(s <= 1, 0.0, (s - 1) * logf) + lomf,
        )
        dB = M1 - sc
        lfB = np.where(
            dB == 0,
            -np.inf,
            lf + np.log(np.maximum(dB, 1)) + np.where(dB <= 1, 0.0, (dB - 1) * logomf),
        )
        signB = np.where(negomf & ((M1 - s - 1) % 2 == 1), -1.0, 1.0)
        expb = np.exp(base - Mx[..., None])
        SA = (signT * np.where(mask, expb * np.exp(lfA), 0.0)).sum(axis=-1)
        SB = (signB * np.where(mask, expb * np.exp(lfB), 0.0)).sum(axis=-1)
        RAf = (SA - SB) / Asc
        dgt = digamma(np.arange(len(lgr)) + 1.0 / xi)
        bracket = dgt[M1] - dgt[M1 - sc] + dgt[N[..., None] - sc] - dgt[m2[..., None]]
        Sr = (np.where(mask, signT * T * bracket, 0.0)).sum(axis=-1) / Asc
    return logA, RAf, Sr


def _pair_eval(y1, y2, lam1, lam2, xi, rho, need_grad):
    """Bivariate log-margin and (optionally) its constrained partials.

    All of y1, y2, lam1, lam2 are arrays of a common shape; xi and rho are
    scalars. Partials returned are with respect to lam1, lam2, xi, rho.
    """
    y1 = np.asarray(y1)
    y2 = np.asarray(y2)
    if np.any(y1 < 0) or np.any(y2 < 0):
        raise ValueError("counts must be nonnegative")
    if np.any(y1 > MAX_COUNT) or np.any(y2 > MAX_COUNT):
        raise NumericDomainError(
            f"count exceeds the supported per-margin cap of {MAX_COUNT}"
        )
    if not xi > 0:
        raise ValueError("xi must be positive")
    if not -1.0 < rho <= 1.0:
        raise ValueError("rho must lie in (-1, 1]")
    y1i = y1.astype(np.int64)
    y2i = y2.astype(np.int64)
    y1 = y1i.astype(float)
    y2 = y2i.astype(float)
    u1 = np.exp(lam1)
    u2 = np.exp(lam2)
    m1 = np.minimum(y1i, y2i)
    m2 = np.maximum(y1i, y2i)
    omr = 1.0 - rho
    D1 = 1.0 + xi * u2 * omr
    D2 = 1.0 + xi * u1 * omr
    Delta = 1.0 + xi * u1 + xi * u2 + xi * xi * u1 * u2 * omr
    f = Delta * omr / (D1 * D2)
    r = 1.0 / xi
    # integer-indexed tables shared by every cell: lgi[L] = lgamma(L+1),
    # lgr[L] = lgamma(L+r)
    top = int(m1.max() + m2.max()) + 1 if m1.size else 1
    lgi = gammaln(np.arange(top + 1) + 1.0)
    lgr = gammaln(np.arange(top + 1) + r)
    logA, RAf, Sr = _series_sums(m1, m2, xi, f, need_grad, lgi, lgr)
    # sum_{s<m2} log(1+s*xi) = m2*log(xi) + lgamma(m2+r) - lgamma(r)
    V2 = m2 * np.log(xi) + lgr[m2] - lgr[0]
    ll = (
        y1 * lam1
        + y2 * lam2
        - lgi[y1i]
        - lgi[y2i]
        + V2
        + y1 * np.log(D1)
        + y2 * np.log(D2)
        - (y1 + y2 + r) * np.log(Delta)
        + m1 * np.log(xi)
        + logA
    )
    if not np.all(np.isfinite(ll)):
        raise NumericDomainError("pairwise log-margin evaluated non-finite")
    if not need_grad:
        return (ll,)
    dlogA_dxi = m1 / xi - Sr / (xi * xi)
    dD1_dxi = u2 * omr
    dD2_dxi = u1 * omr
    dD1_drho = -xi * u2
    dD2_drho = -xi * u1
    dDel_du1 = xi + xi * xi * u2 * omr
    dDel_du2 = xi + xi * xi * u1 * omr
    dDel_dxi = u1 + u2 + 2.0 * xi * u1 * u2 * omr
    dDel_drho = -xi * xi * u1 * u2
    dlf_du1 = dDel_du1 / Delta - (xi * omr) / D2
    dlf_du2 = dDel_du2 / Delta - (xi * omr) / D1
    dlf_dxi = dDel_dxi / Delta - dD1_dxi / D1 - dD2_dxi / D2
    dlf_drho = dDel_drho / Delta - 1.0 / omr - dD1_drho / D1 - dD2_drho / D2
    sC = y1 + y2 + r
    d_lam1 = y1 + (y2 * (xi * omr) / D2 - sC * dDel_du1 / Delta + RAf * f * dlf_du1) * u1
    d_lam2 = y2 + (y1 * (xi * omr) / D1 - sC * dDel_du2 / Delta + RAf * f * dlf_du2) * u2
    sp = np.arange(int(m2.max()) if m2.size else 0)
    Wp = np.concatenate([[0.0], np.cumsum(sp / (1.0 + sp * xi))])
    d_xi = (
        Wp[m2]
        + y1 * dD1_dxi / D1
        + y2 * dD2_dxi / D2
        + np.log(Delta) / (xi * xi)
        - sC * dDel_dxi / Delta
        + dlogA_dxi
        + RAf * f * dlf_dxi
    )
    d_rho = (
        y1 * dD1_drho / D1
        + y2 * dD2_drho / D2
        - sC * dDel_drho / Delta
        + RAf * f * dlf_drho
    )
    return ll, d_lam1, d_lam2, d_xi, d_rho


def pair_loglik(params: FrailtyParams | None, y1, y2, j=0, k=1, *, lambdas=None, xi=None, rho=None):
    """Closed-form bivariate log-margin l_{jk}(theta; y_j, y_k).

    Accepts either a FrailtyParams (constrained) or explicit lambdas/xi/rho
    keywords; rho = 1 is allowed here (shared-frailty limit), unlike in the
    fitted model.
    """
    if params is not None:
        lambdas, xi, rho = params.lambdas, params.xi, params.rho
    lambdas = np.asarray(lambdas, dtype=float)
    (ll,) = _pair_eval(y1, y2, lambdas[j], lambdas[k], float(xi), float(rho), False)
    return ll if np.ndim(ll) else float(ll)


def pair_grad_constrained(params: FrailtyParams, y1, y2, j=0, k=1):
    """Partials of the pair log-margin w.r.t. (lambda_j, lambda_k, xi, rho)."""
    lam = params.lambdas
    _, d1, d2, dx, dr = _pair_eval(y1, y2, lam[j], lam[k], params.xi, params.rho, True)
    return np.array([d1, d2, dx, dr], dtype=float)


def pair_grad(params: FrailtyParams, y1, y2, j=0, k=1) -> np.ndarray:
    """Gradient of the pair log-margin in the unconstrained (p+2) layout.

    Only the lambda_j, lambda_k, t_xi and t_rho entries can be nonzero.
    """
    d1, d2, dx, dr = pair_grad_constrained(params, y1, y2, j, k)
    g = np.zeros(params.p + 2)
    g[j] += d1
    g[k] += d2
    g[-2] = dx * params.xi
    g[-1] = dr * (1.0 - params.rho**2)
    return g


def simulate_frailty(params: FrailtyParams, n, rng) -> Dataset:
    """Sample n rows: V_j = xi*(G0 + G_j) with shared G0 ~ Gamma(rho/xi) and
    independent G_j ~ Gamma((1-rho)/xi), then Y_j ~ Poisson(V_j e^lambda_j).

    This gives E V_j = 1, Var V_j = xi and Corr(V_j, V_k) = rho exactly.
    """
    p = params.p
    xi, rho = params.xi, params.rho
    shared_shape = rho / xi
    own_shape = (1.0 - rho) / xi
    g0 = rng.gamma(shared_shape, 1.0, size=n) if shared_shape > 0 else np.zeros(n)
    gj = rng.gamma(own_shape, 1.0, size=(n, p)) if own_shape > 0 else np.zeros((n, p))
    v = xi * (g0[:, None] + gj)
    lam = v * np.exp(params.lambdas)
    return Dataset(rng.poisson(lam).astype(np.int64), "count")


class GammaFrailtyModel(CompositeModel):
    """Pairwise composite likelihood over all p(p-1)/2 bivariate margins.

    Components are indexed lexicographically: k = 0 is the pair (0, 1),
    k = 1 is (0, 2), ..., k = K-1 is (p-2, p-1). The fitted objective carries
    the uniform weight 2/(p(p-1)) so its magnitude is comparable across p.
    """

    def __init__(self, p):
        if p < 2:
            raise ValueError("need p >= 2")
        self.p = int(p)
        self.dim = self.p + 2
        iu = np.triu_indices(self.p, k=1)
        self.pair_left = iu[0]
        self.pair_right = iu[1]
        self.n_components = len(self.pair_left)
        self.param_names = [f"lambda_{j + 1}" for j in range(self.p)] + ["t_xi", "t_rho"]
        self.objective_weight = scaled_pair_weight(self.p)

    # -- parametrization -------------------------------------------------
    def structured(self, theta) -> FrailtyParams:
        return FrailtyParams.from_unconstrained(theta)

    def flat(self, params: FrailtyParams) -> np.ndarray:
        if params.p != self.p:
            raise ValueError("parameter p mismatch")
        return params.to_unconstrained()

    @staticmethod
    def _constrained(theta):
        theta = np.asarray(theta, dtype=float)
        return theta[:-2], float(np.exp(theta[-2])), float(np.tanh(theta[-1]))

    def _cells(self, theta, rows, obs, comps, need_grad):
        lam, xi, rho = self._constrained(theta)
        j1 = self.pair_left[comps]
        j2 = self.pair_right[comps]
        y1 = rows[obs, j1]
        y2 = rows[obs, j2]
        try:
            out = _pair_eval(y1, y2, lam[j1], lam[j2], xi, rho, need_grad)
        except NumericDomainError as exc:
            pairs = sorted({(int(a) + 1, int(b) + 1) for a, b in zip(j1, j2)})
            raise NumericDomainError(f"{exc} [pairs involved: {pairs[:6]}]") from exc
        return (j1, j2, xi, rho) + out

    # -- component contract ------------------------------------------------
    def sub_loglik(self, theta, y_row, comp) -> float:
        lam, xi, rho = self._constrained(theta)
        j1, j2 = self.pair_left[comp], self.pair_right[comp]
        (ll,) = _pair_eval(y_row[j1], y_row[j2], lam[j1], lam[j2], xi, rho, False)
        return float(ll)

    def sub_grad(self, theta, y_row, comp) -> np.ndarray:
        lam, xi, rho = self._constrained(theta)
        j1, j2 = self.pair_left[comp], self.pair_right[comp]
        _, d1, d2, dx, dr = _pair_eval(y_row[j1], y_row[j2], lam[j1], lam[j2], xi, rho, True)
        g = np.zeros(self.dim)
        g[j1] += d1
        g[j2] += d2
        g[-2] = dx * xi                 # t_xi chain rule: xi = exp(t_xi)
        g[-1] = dr * (1.0 - rho * rho)  # t_rho chain rule: rho = tanh(t_rho)
        return g

    def selection_grad_sum(self, theta, rows, obs_idx, comp_idx) -> np.ndarray:
        obs = np.asarray(obs_idx)
        comps = np.asarray(comp_idx)
        g = np.zeros(self.dim)
        if obs.size == 0:
            return g
        j1, j2, xi, rho, _, d1, d2, dx, dr = self._cells(theta, rows, obs, comps, True)
        np.add.at(g, j1, d1)
        np.add.at(g, j2, d2)
        g[-2] = dx.sum() * xi
        g[-1] = dr.sum() * (1.0 - rho * rho)
        return g

    def loglik_matrix(self, theta, rows) -> np.ndarray:
        lam, xi, rho = self._constrained(theta)
        n = len(rows)
        out = np.empty((n, self.n_components))
        for k in range(self.n_components):
            j1, j2 = self.pair_left[k], self.pair_right[k]
            (ll,) = _pair_eval(rows[:, j1], rows[:, j2], lam[j1], lam[j2], xi, rho, False)
            out[:, k] = ll
        return out

    def component_gradient_blocks(self, theta, rows):
        lam, xi, rho = self._constrained(theta)
        for k in range(self.n_components):
            j1, j2 = self.pair_left[k], self.pair_right[k]
            _, d1, d2, dx, dr = _pair_eval(
                rows[:, j1], rows[:, j2], lam[j1], lam[j2], xi, rho, True
            )
            block = np.empty((len(rows), 4))
            block[:, 0] = d1
            block[:, 1] = d2
            block[:, 2] = dx * xi
            block[:, 3] = dr * (1.0 - rho * rho)
            yield k, np.array([j1, j2, self.dim - 2, self.dim - 1]), block
