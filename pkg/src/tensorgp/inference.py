"""Variational EM for the latent tensor-process completion model.

The latent real tensor M carries a tensor-variate Gaussian (or t) process
prior whose per-mode Gram matrices are kernel functions of the factor
matrices U^(k).  Observations arise through a probit link (binary data, unit
latent noise) or an additive Gaussian likelihood (continuous data, variance
sigma^2).

E-step (coordinate updates of a fully factorized posterior):

* probit: q(z) is the one-sided truncated normal around the current
  posterior mean; unobserved cells carry q(z) = N(mu, 1).
* q(vec(M)) = N(mu, Ups) where Ups = rho^2 * S_p (tau rho^2 I + S_p)^{-1}
  and mu = Ups vec(target) / rho^2, with rho = 1 (probit) or sigma
  (Gaussian noise) and tau = E[eta].  S_p = kron(S_1, ..., S_K) shares the
  Kronecker eigenbasis with the identity, so Ups is held as a diagonal
  tensor D in that basis and never materialized.
* t process only: q(eta) = Gamma(beta1, beta2) with beta1 = (nu + n)/2 and
  beta2 = (nu + mu' S_p^{-1} mu + tr(S_p^{-1} Ups)) / 2.

M-step: minimize over the factors

    f(U) = sum_k (n/n_k) log|S_k| + tau * mu' S_p^{-1} mu
         + tau * tr(S_p^{-1} Ups) + lambda * sum_k ||U_k||_1

with (mu, D, tau) frozen, via the orthant-wise L-BFGS in :mod:`.optim`.
The candidate Grams reuse the jitter recorded at the E-step so the smooth
part is an exact function of the factor entries (the analytic gradient and
finite differences then agree; an adaptive jitter would add a hidden,
non-differentiated dependence on U).

Missing data keep the full-grid Kronecker structure by imputation:
unobserved target cells are refilled with the current posterior mean every
cycle, which is exactly the coordinate update of an auxiliary posterior over
the missing observations.  The tracked objective is the full negative free
energy of that extended model, so it is non-increasing across EM cycles up
to round-off.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import digamma, gammaln, log_ndtr

from .distributions import LOG_2PI, truncated_normal_mean
from .errors import NumericalError, ShapeError
from .kernels import KernelSpec, SpectralGram, gram_matrix, truncated_spectrum
from .optim import OptimResult, minimize_l1
from .tensors import mode_k_product, multi_mode_vector_contract

logger = logging.getLogger(__name__)

NOISE_MODELS = ("probit", "gaussian")
PROCESSES = ("gaussian_process", "t_process")


@dataclass
class ModelConfig:
    """Everything a fit needs besides the data itself.

    ``rank`` and ``kernel`` may be given per mode (lists) or once (broadcast
    across modes when the data order is known).
    """

    noise: str = "gaussian"
    process: str = "gaussian_process"
    nu: float = 10.0
    rank: int | list[int] = 3
    kernel: KernelSpec | list[KernelSpec] = KernelSpec("gaussian", 0.5)
    l1_lambda: float = 1.0
    gaussian_sigma: float = 1.0
    max_em_iters: int = 200
    em_rel_tol: float = 1e-5
    mstep_max_iters: int = 100
    seed: int = 0
    truncation_energy: float = 1.0
    n_restarts: int = 1

    # The EM objective is nonconvex in the factors; with n_restarts > 1 the
    # fit is repeated from extra starts (one data-driven HOSVD start, then
    # random draws from seeds derived from ``seed``) and the run with the
    # lowest final tracked objective wins.  Still fully deterministic.

    def __post_init__(self):
        if self.noise not in NOISE_MODELS:
            raise ValueError(f"unknown noise model {self.noise!r}")
        if self.process not in PROCESSES:
            raise ValueError(f"unknown process {self.process!r}")
        if self.process == "t_process" and not self.nu > 2:
            raise ValueError("t process requires nu > 2")
        if not self.gaussian_sigma > 0:
            raise ValueError("gaussian_sigma must be positive")
        if self.l1_lambda < 0:
            raise ValueError("l1_lambda must be nonnegative")
        if not 0.0 < self.truncation_energy <= 1.0:
            raise ValueError("truncation_energy must lie in (0, 1]")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be at least 1")

    def ranks(self, order: int) -> list[int]:
        if isinstance(self.rank, int):
            return [self.rank] * order
        if len(self.rank) != order:
            raise ShapeError(f"{len(self.rank)} ranks for an order-{order} tensor")
        return list(self.rank)

    def kernels(self, order: int) -> list[KernelSpec]:
        if isinstance(self.kernel, KernelSpec):
            return [self.kernel] * order
        if len(self.kernel) != order:
            raise ShapeError(f"{len(self.kernel)} kernels for an order-{order} tensor")
        return list(self.kernel)


@dataclass
class VariationalState:
    """Posterior statistics after one E-step.

    ``ez`` is the E-step target tensor: the truncated-normal means E[Z] for
    probit, or the observation tensor with unobserved cells imputed by the
    posterior mean for Gaussian noise.  ``ups_diag`` is the diagonal tensor D
    of the latent posterior covariance in the eigenbasis carried by
    ``basis`` (the Grams the E-step ran with); ``zbar_loc`` is the location
    parameter the probit q(Z) was built from (needed for its entropy).
    """

    ez: np.ndarray
    mu: np.ndarray
    ups_diag: np.ndarray
    beta1: float
    beta2: float
    tau: float
    basis: list[SpectralGram] | None = None
    zbar_loc: np.ndarray | None = None


@dataclass
class FittedModel:
    factors: list[np.ndarray]
    mode_grams: list[SpectralGram]
    config: ModelConfig
    state: VariationalState
    tau_star: float
    objective_trace: list[float] = field(default_factory=list)
    mask: np.ndarray | None = None
    mstep_warnings: int = 0

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(g.size for g in self.mode_grams)


# ---------------------------------------------------------------------------
# E-step
# ---------------------------------------------------------------------------


def e_step_z(mu: np.ndarray, y: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Truncated-normal means on observed cells, posterior mean elsewhere."""
    mu = np.asarray(mu, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if not (mu.shape == y.shape == mask.shape):
        raise ShapeError(f"shape mismatch: mu {mu.shape}, y {y.shape}, mask {mask.shape}")
    observed = y[mask]
    if observed.size and not np.all((observed == 0.0) | (observed == 1.0)):
        raise ValueError("probit noise requires binary observed entries")
    ez = mu.copy()
    ez[mask] = truncated_normal_mean(mu[mask], observed)
    return ez


def _eigval_product_tensor(mode_grams: Sequence[SpectralGram]) -> np.ndarray:
    """Tensor of Kronecker eigenvalues: entry j is prod_k eigvals_k[j_k]."""
    out = np.asarray(mode_grams[0].eigvals, dtype=np.float64)
    for sg in mode_grams[1:]:
        out = np.multiply.outer(out, sg.eigvals)
    return out.reshape(tuple(sg.size for sg in mode_grams))


def _to_eigenbasis(t: np.ndarray, mode_grams: Sequence[SpectralGram]) -> np.ndarray:
    out = t
    for k, sg in enumerate(mode_grams):
        out = mode_k_product(out, sg.eigvecs.T, k)
    return out


def _from_eigenbasis(t: np.ndarray, mode_grams: Sequence[SpectralGram]) -> np.ndarray:
    out = t
    for k, sg in enumerate(mode_grams):
        out = mode_k_product(out, sg.eigvecs, k)
    return out


def e_step_m(
    target: np.ndarray,
    mode_grams: Sequence[SpectralGram],
    tau: float,
    rho: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean tensor and covariance diagonal in the shared eigenbasis.

    D_j = rho^2 * lam_j / (tau rho^2 + lam_j) with lam_j the Kronecker
    eigenvalue product; mu = V diag(D / rho^2) V' vec(target), computed by
    per-mode products.  Only O(n) memory is touched.
    """
    target = np.asarray(target, dtype=np.float64)
    lam = _eigval_product_tensor(mode_grams)
    if lam.shape != target.shape:
        raise ShapeError(f"Gram dims {lam.shape} != target dims {target.shape}")
    if np.any(lam <= 0):
        raise NumericalError("non-positive Kronecker eigenvalue; Gram floor violated")
    rho2 = rho * rho
    ups_diag = rho2 * lam / (tau * rho2 + lam)
    coeff = lam / (tau * rho2 + lam)
    mu = _from_eigenbasis(_to_eigenbasis(target, mode_grams) * coeff, mode_grams)
    return mu, ups_diag


def trace_sigma_inv_upsilon(
    mode_grams: Sequence[SpectralGram], ups_diag: np.ndarray
) -> float:
    """tr(S_p^{-1} Ups) as a multi-mode contraction of D against 1/eigvals."""
    return multi_mode_vector_contract(
        ups_diag, [1.0 / sg.eigvals for sg in mode_grams]
    )


def _prior_quad(mu: np.ndarray, mode_grams: Sequence[SpectralGram]) -> float:
    """mu' S_p^{-1} mu through the eigenbasis."""
    mt = _to_eigenbasis(mu, mode_grams)
    return multi_mode_vector_contract(mt * mt, [1.0 / sg.eigvals for sg in mode_grams])


def e_step_eta(
    nu: float,
    mu: np.ndarray,
    ups_diag: np.ndarray,
    mode_grams: Sequence[SpectralGram],
) -> tuple[float, float, float]:
    """Gamma posterior over the t-process precision mixer."""
    n = mu.size
    beta1 = 0.5 * (nu + n)
    beta2 = 0.5 * (nu + _prior_quad(mu, mode_grams) + trace_sigma_inv_upsilon(mode_grams, ups_diag))
    return beta1, beta2, beta1 / beta2


# ---------------------------------------------------------------------------
# M-step
# ---------------------------------------------------------------------------


def _candidate_grams(
    factors: Sequence[np.ndarray], state: VariationalState, config: ModelConfig
) -> list[SpectralGram]:
    """Grams at a candidate factor point, jitter frozen from the E-step."""
    if state.basis is None:
        raise ValueError("variational state carries no eigenbasis; run an E-step first")
    specs = config.kernels(len(factors))
    return [
        gram_matrix(spec, u, jitter=base.jitter_applied)
        for spec, u, base in zip(specs, factors, state.basis)
    ]


def _basis_change_diags(
    new_grams: Sequence[SpectralGram], basis: Sequence[SpectralGram]
) -> list[np.ndarray]:
    """Per mode: diag(V_old' S_new^{-1} V_old), the trace-term weights."""
    out = []
    for new, old in zip(new_grams, basis):
        a = new.eigvecs.T @ old.eigvecs
        out.append((a * a).T @ (1.0 / new.eigvals))
    return out


def _frozen_trace(
    new_grams: Sequence[SpectralGram],
    state: VariationalState,
) -> float:
    """tr(S_p(U)^{-1} Ups) with Ups frozen in the E-step eigenbasis."""
    return multi_mode_vector_contract(
        state.ups_diag, _basis_change_diags(new_grams, state.basis)
    )


def _m_step_smooth(
    factors: Sequence[np.ndarray],
    state: VariationalState,
    config: ModelConfig,
    new_grams: Sequence[SpectralGram] | None = None,
) -> float:
    if new_grams is None:
        new_grams = _candidate_grams(factors, state, config)
    n = state.mu.size
    logdet = sum(n / g.size * float(np.sum(np.log(g.eigvals))) for g in new_grams)
    quad = _prior_quad(state.mu, new_grams)
    trace = _frozen_trace(new_grams, state)
    return logdet + state.tau * (quad + trace)


def m_step_objective(
    factors: Sequence[np.ndarray], state: VariationalState, config: ModelConfig
) -> float:
    """f(U): log-determinants + tau * (quadratic + trace) + l1 penalty."""
    smooth = _m_step_smooth(factors, state, config)
    l1 = config.l1_lambda * sum(float(np.abs(u).sum()) for u in factors)
    return smooth + l1


def _contract_except(d: np.ndarray, vecs: Sequence[np.ndarray], skip: int) -> np.ndarray:
    """Contract every mode of ``d`` but ``skip``; returns a vector on that mode."""
    out = d
    # Contract from the last mode down so earlier axis numbers stay valid.
    for k in reversed(range(d.ndim)):
        if k == skip:
            continue
        out = np.tensordot(out, vecs[k], axes=([k], [0]))
    return out


def m_step_gradient(
    factors: Sequence[np.ndarray], state: VariationalState, config: ModelConfig
) -> list[np.ndarray]:
    """Gradient of the smooth part of f(U) per mode.

    For each mode the three terms reduce to <dS_k/du, G_k> with a single
    symmetric n_k x n_k weight matrix

        G_k = (n/n_k) S_k^{-1} - tau * (C_k + Q_k),

    where C_k is the mode-k unfolding product of the inverse-weighted
    posterior mean with itself and Q_k pushes the frozen covariance diagonal
    through the basis change.  The kernel adjoint then turns G_k into the
    factor-entry gradient without touching any Kronecker matrix.
    """
    from .kernels import gram_gradient_contract

    new_grams = _candidate_grams(factors, state, config)
    specs = config.kernels(len(factors))
    n = state.mu.size
    inverses = [
        (g.eigvecs / g.eigvals) @ g.eigvecs.T for g in new_grams
    ]
    mu = state.mu
    # Posterior mean with every mode hit by the inverse Gram.
    h_all = mu
    for k, inv in enumerate(inverses):
        h_all = mode_k_product(h_all, inv, k)
    w_diags = _basis_change_diags(new_grams, state.basis)

    grads = []
    for k, (spec, u) in enumerate(zip(specs, factors)):
        nk = u.shape[0]
        unfold = lambda t: np.moveaxis(t, k, 0).reshape(nk, -1)
        g_k = mode_k_product(mu, inverses[k], k)
        c_k = unfold(h_all) @ unfold(g_k).T
        s_vec = _contract_except(state.ups_diag, w_diags, k)
        v_old = state.basis[k].eigvecs
        q_inner = (v_old * s_vec) @ v_old.T
        q_k = inverses[k] @ q_inner @ inverses[k]
        weight = (n / nk) * inverses[k] - state.tau * (c_k + q_k)
        grads.append(gram_gradient_contract(spec, u, weight))
    return grads


def optimize_factors(
    initial: Sequence[np.ndarray],
    state: VariationalState,
    config: ModelConfig,
    gtol: float = 1e-6,
) -> tuple[list[np.ndarray], OptimResult]:
    """Run the l1 quasi-Newton step on the flattened factor entries."""
    shapes = [u.shape for u in initial]
    splits = np.cumsum([int(np.prod(s)) for s in shapes])[:-1]

    def unpack(x: np.ndarray) -> list[np.ndarray]:
        return [part.reshape(shape) for part, shape in zip(np.split(x, splits), shapes)]

    def fun(x: np.ndarray) -> float:
        return _m_step_smooth(unpack(x), state, config)

    def grad(x: np.ndarray) -> np.ndarray:
        return np.concatenate([g.ravel() for g in m_step_gradient(unpack(x), state, config)])

    x0 = np.concatenate([np.asarray(u, dtype=np.float64).ravel() for u in initial])
    res = minimize_l1(
        fun,
        grad,
        x0,
        l1_weight=config.l1_lambda,
        max_iter=config.mstep_max_iters,
        history=10,
        gtol=gtol,
    )
    if res.line_search_failed:
        logger.warning("M-step line search stalled; keeping best iterate")
    return unpack(res.x), res


# ---------------------------------------------------------------------------
# Tracked objective (negative free energy of the extended model)
# ---------------------------------------------------------------------------


def _gamma_entropy(a: float, b: float) -> float:
    return a - math.log(b) + float(gammaln(a)) + (1.0 - a) * float(digamma(a))


def _truncnorm_entropies(loc: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Entropy of N(loc, 1) truncated to the side selected by y, entrywise."""
    sign = 2.0 * np.asarray(y, dtype=np.float64) - 1.0
    sl = sign * loc
    log_phi = log_ndtr(sl)
    hazard = np.exp(-0.5 * loc * loc - 0.5 * LOG_2PI - log_phi)
    return 0.5 * (LOG_2PI + 1.0) + log_phi - 0.5 * sl * hazard


def tracked_objective(
    y: np.ndarray,
    mask: np.ndarray,
    config: ModelConfig,
    factors: Sequence[np.ndarray],
    grams: Sequence[SpectralGram],
    state: VariationalState,
) -> float:
    """Negative variational free energy at the current (q, U).

    Every E-step update is an exact coordinate minimizer of this quantity and
    the M-step minimizes twice its U-dependent part, so it is non-increasing
    across full EM cycles up to round-off.  Constants independent of both q
    and U (the Laplace prior normalizer) are dropped.
    """
    n = state.mu.size
    mu = state.mu
    sum_d = float(np.sum(state.ups_diag))
    sum_log_d = float(np.sum(np.log(state.ups_diag)))
    n_missing = int(np.sum(~mask))

    if config.noise == "probit":
        loc = state.zbar_loc
        ez = state.ez
        # E[z^2] = 1 + loc * E[z] for one-sided truncation and for the
        # unobserved free cells alike.
        expected_sq = np.sum(1.0 + loc * ez - 2.0 * ez * mu + mu * mu)
        fit_term = 0.5 * n * LOG_2PI + 0.5 * (float(expected_sq) + sum_d)
        ent = float(np.sum(_truncnorm_entropies(loc[mask], y[mask])))
        ent += n_missing * 0.5 * (LOG_2PI + 1.0)
        neg_entropy_z = -ent
    else:
        s2 = config.gaussian_sigma**2
        resid_obs = float(np.sum((y[mask] - mu[mask]) ** 2))
        resid_miss = float(np.sum((state.ez[~mask] - mu[~mask]) ** 2)) + n_missing * s2
        fit_term = 0.5 * n * math.log(2.0 * math.pi * s2)
        fit_term += (resid_obs + resid_miss + sum_d) / (2.0 * s2)
        neg_entropy_z = -n_missing * 0.5 * (math.log(2.0 * math.pi * s2) + 1.0)

    logdet = sum(n / g.size * float(np.sum(np.log(g.eigvals))) for g in grams)
    quad = _prior_quad(mu, grams)
    trace = multi_mode_vector_contract(
        state.ups_diag, _basis_change_diags(grams, state.basis)
    )
    if config.process == "t_process":
        e_log_eta = float(digamma(state.beta1)) - math.log(state.beta2)
        tau = state.tau
    else:
        e_log_eta = 0.0
        tau = 1.0
    prior_m = 0.5 * n * LOG_2PI - 0.5 * n * e_log_eta + 0.5 * logdet
    prior_m += 0.5 * tau * (quad + trace)
    neg_entropy_m = -0.5 * n * (LOG_2PI + 1.0) - 0.5 * sum_log_d

    total = fit_term + prior_m + neg_entropy_z + neg_entropy_m
    total += 0.5 * config.l1_lambda * sum(float(np.abs(u).sum()) for u in factors)

    if config.process == "t_process":
        nu = config.nu
        prior_eta = (
            -0.5 * nu * math.log(0.5 * nu)
            + float(gammaln(0.5 * nu))
            - (0.5 * nu - 1.0) * e_log_eta
            + 0.5 * nu * tau
        )
        total += prior_eta - _gamma_entropy(state.beta1, state.beta2)
    return float(total)


# ---------------------------------------------------------------------------
# The EM driver
# ---------------------------------------------------------------------------


def init_factors(
    dims: Sequence[int], ranks: Sequence[int], rng: np.random.Generator
) -> list[np.ndarray]:
    """iid normal entries with standard deviation 1/sqrt(rank)."""
    return [
        rng.normal(0.0, 1.0 / math.sqrt(r), size=(nk, r)) for nk, r in zip(dims, ranks)
    ]


def hosvd_init_factors(
    y: np.ndarray,
    mask: np.ndarray,
    ranks: Sequence[int],
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """Leading per-mode singular vectors of the mean-imputed data.

    Columns are rescaled so rows have roughly unit norm (matching the random
    initialization scale the kernels expect); ranks beyond a mode's dimension
    are padded with small random columns.
    """
    filled = np.where(mask, y, y[mask].mean())
    filled = filled - filled.mean()
    out = []
    for k, r in enumerate(ranks):
        nk = filled.shape[k]
        unfold = np.moveaxis(filled, k, 0).reshape(nk, -1)
        left, _, _ = np.linalg.svd(unfold, full_matrices=False)
        cols = left[:, : min(r, left.shape[1])]
        if cols.shape[1] < r:
            pad = rng.normal(0.0, 1e-2, size=(nk, r - cols.shape[1]))
            cols = np.hstack([cols, pad])
        out.append(cols * math.sqrt(nk / r))
    return out


def fit(
    y: np.ndarray,
    mask: np.ndarray,
    config: ModelConfig,
    rng: np.random.Generator | None = None,
) -> FittedModel:
    """Run variational EM to convergence and return the fitted model.

    With ``config.n_restarts > 1`` the EM is repeated from fresh factor
    initializations and the run with the lowest final tracked objective is
    returned.
    """
    y = np.asarray(y, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if y.shape != mask.shape:
        raise ShapeError(f"data {y.shape} and mask {mask.shape} differ")
    if not mask.any():
        raise ValueError("observation mask is empty; nothing to fit")
    if config.noise == "probit":
        observed = y[mask]
        if not np.all((observed == 0.0) | (observed == 1.0)):
            raise ValueError("probit noise requires binary observed entries")

    best: FittedModel | None = None
    for restart in range(config.n_restarts):
        if rng is not None:
            rng_r = rng
        elif restart == 0:
            rng_r = np.random.default_rng(config.seed)
        else:
            rng_r = np.random.default_rng(np.random.SeedSequence([config.seed, restart]))
        # restart 1 (when asked for) tries a data-driven HOSVD start instead
        # of a second random draw; the best final objective still decides
        initial = None
        if restart == 1:
            initial = hosvd_init_factors(y, mask, config.ranks(y.ndim), rng_r)
        model = _fit_once(y, mask, config, rng_r, initial)
        if best is None or model.objective_trace[-1] < best.objective_trace[-1]:
            best = model
    return best


def _fit_once(
    y: np.ndarray,
    mask: np.ndarray,
    config: ModelConfig,
    rng: np.random.Generator,
    initial: list[np.ndarray] | None = None,
) -> FittedModel:
    dims = y.shape
    order = y.ndim
    ranks = config.ranks(order)
    specs = config.kernels(order)
    factors = init_factors(dims, ranks, rng) if initial is None else initial

    mu = np.zeros(dims)
    tau = 1.0
    beta1 = beta2 = 0.5 * config.nu if config.process == "t_process" else 1.0
    rho = 1.0 if config.noise == "probit" else config.gaussian_sigma
    trace: list[float] = []
    state: VariationalState | None = None
    grams: list[SpectralGram] | None = None
    warnings = 0

    for it in range(config.max_em_iters):
        if grams is None:
            grams = [gram_matrix(spec, u) for spec, u in zip(specs, factors)]
        if config.truncation_energy < 1.0:
            e_grams = [truncated_spectrum(g, config.truncation_energy) for g in grams]
        else:
            e_grams = grams

        if config.noise == "probit":
            zbar_loc = mu
            ez = e_step_z(mu, y, mask)
        else:
            zbar_loc = mu
            ez = np.where(mask, y, mu)
        mu, ups_diag = e_step_m(ez, e_grams, tau, rho)
        if config.process == "t_process":
            beta1, beta2, tau = e_step_eta(config.nu, mu, ups_diag, e_grams)
        state = VariationalState(
            ez=ez,
            mu=mu,
            ups_diag=ups_diag,
            beta1=beta1,
            beta2=beta2,
            tau=tau,
            basis=grams,
            zbar_loc=zbar_loc,
        )

        factors, opt = optimize_factors(factors, state, config)
        warnings += int(opt.line_search_failed)

        grams = [gram_matrix(spec, u) for spec, u in zip(specs, factors)]
        obj = tracked_objective(y, mask, config, factors, grams, state)
        if not np.isfinite(obj):
            raise NumericalError(f"EM iteration {it}: tracked objective is {obj}")
        trace.append(obj)
        if it > 0 and abs(trace[-2] - trace[-1]) <= config.em_rel_tol * max(1.0, abs(trace[-2])):
            break

    tau_star = (beta1 - 1.0) / beta2 if config.process == "t_process" else 1.0
    return FittedModel(
        factors=factors,
        mode_grams=grams,
        config=config,
        state=state,
        tau_star=tau_star,
        objective_trace=trace,
        mask=mask.copy(),
        mstep_warnings=warnings,
    )
