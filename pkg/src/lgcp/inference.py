"""Laplace-approximation Bayesian core.

The latent field is approximated by a Gaussian at its posterior mode for
fixed hyperparameters; the hyperparameter posterior is explored by a
gradient-free simplex search on the log scale (empirical Bayes plug-in by
default, mode-centered grid mixing opt-in).  Sum-to-zero constraints are
handled at sampling time by conditioning-by-kriging, keeping precisions
sparse.
"""

from __future__ import annotations

import io
import json
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize

from .errors import AssemblyError, ConstraintError, ConvergenceError

FD_STEP = 1e-3  # central-difference step for the hyper Hessian, log scale


class SymFactor:
    """Sparse symmetric positive-definite factorization (LDL^T via SuperLU).

    The single factorization abstraction behind every solve, log-determinant
    and Gaussian sampling path.
    """

    def __init__(self, q):
        q = sp.csc_matrix(q)
        self.shape = q.shape
        try:
            self._lu = spla.splu(
                q,
                permc_spec="MMD_AT_PLUS_A",
                diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )
        except RuntimeError as exc:
            raise AssemblyError(f"sparse factorization failed: {exc}") from exc
        d = self._lu.U.diagonal()
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise AssemblyError("matrix is not positive definite")
        self._d = np.asarray(d)
        self._lt = None

    def solve(self, b):
        return self._lu.solve(np.asarray(b, dtype=float))

    def logdet(self) -> float:
        return float(np.sum(np.log(self._d)))

    def sample(self, z) -> np.ndarray:
        """Map iid standard normals to draws with covariance Q^-1."""
        z = np.asarray(z, dtype=float)
        if self._lt is None:
            self._lt = sp.csr_matrix(self._lu.L.T)
        y = spla.spsolve_triangular(
            self._lt, z / np.sqrt(self._d)[:, None] if z.ndim == 2
            else z / np.sqrt(self._d),
            lower=False,
        )
        # A[q][:, q] = L D L^T with q = argsort(perm_c); undo the ordering.
        return y[self._lu.perm_c]


@dataclass
class LatentGaussian:
    """Gaussian approximation at the conditional mode."""

    mode: np.ndarray
    q_post: sp.csc_matrix
    factor: SymFactor
    loglik_at_mode: float
    iterations: int
    constraint: tuple = None  # (A, e) once applied


@dataclass
class HyperPosterior:
    mode: np.ndarray
    hessian: np.ndarray
    grid: list  # (theta, log_density, weight) triples
    strategy: str
    trace: list = field(default_factory=list)

    @property
    def covariance(self) -> np.ndarray:
        if self.hessian.size == 0:
            return np.zeros((0, 0))
        return np.linalg.inv(self.hessian)


@dataclass
class FitResult:
    spec: object
    hyper: HyperPosterior
    latent: LatentGaussian
    grid_latents: list = None  # LatentGaussian per grid point (grid strategy)
    summaries: dict = None
    runtime: float = 0.0
    warnings: list = field(default_factory=list)


class _SpecObjective:
    """Adapter giving ModelSpec the (loglik, grad_hess) interface."""

    def __init__(self, spec):
        self.spec = spec

    def loglik(self, x):
        return self.spec.loglik(x)

    def grad_hess(self, x):
        return self.spec.loglik_grad_hess(x)


def inner_newton(objective, q_prior, x0=None, max_iter=50, tol=1e-8) -> LatentGaussian:
    """Maximize loglik(x) - x' Q x / 2 by damped Newton iteration."""
    q_prior = sp.csc_matrix(q_prior)
    n = q_prior.shape[0]
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()

    def penalized(xv, ll=None):
        ll = objective.loglik(xv) if ll is None else ll
        return ll - 0.5 * float(xv @ (q_prior @ xv))

    history = []
    for it in range(max_iter):
        g_lik, h_lik = objective.grad_hess(x)
        g = g_lik - q_prior @ x
        gnorm = float(np.max(np.abs(g)))
        history.append(gnorm)
        if gnorm < tol * (1.0 + float(np.max(np.abs(x), initial=0.0))):
            q_post = (h_lik + q_prior).tocsc()
            factor = SymFactor(q_post)
            return LatentGaussian(
                mode=x, q_post=q_post, factor=factor,
                loglik_at_mode=objective.loglik(x), iterations=it,
            )
        q_post = (h_lik + q_prior).tocsc()
        try:
            step = SymFactor(q_post).solve(g)
        except AssemblyError:
            # Levenberg fallback for indefinite curvature far from the mode.
            ridge = sp.identity(n) * (1e-6 + np.abs(q_post.diagonal()).max() * 1e-8)
            step = SymFactor((q_post + ridge).tocsc()).solve(g)
        f0 = penalized(x)
        t = 1.0
        while t > 1e-6:
            xn = x + t * step
            if penalized(xn) >= f0 - 1e-12 * (1 + abs(f0)):
                break
            t *= 0.5
        else:
            raise ConvergenceError("line search failed", history=history)
        x = x + t * step
    raise ConvergenceError(
        f"Newton did not converge in {max_iter} iterations", history=history
    )


def proper_logdet(proper_blocks) -> float:
    """Sum of log-determinants of the proper prior blocks."""
    total = 0.0
    for _, block in proper_blocks:
        if block.shape == (1, 1):
            total += float(np.log(block[0, 0]))
        else:
            total += SymFactor(block).logdet()
    return total


def laplace_log_evidence(lg: LatentGaussian, q_prior, proper_blocks,
                         hyper_logprior: float = 0.0) -> float:
    """Laplace identity for the marginal likelihood at fixed hyperparameters.

    Improper (flat-intercept) blocks are excluded from the prior
    log-determinant; the omitted terms are constant in the hyperparameters.
    """
    m = lg.mode
    quad = 0.5 * float(m @ (q_prior @ m))
    return (
        lg.loglik_at_mode
        - quad
        + 0.5 * proper_logdet(proper_blocks)
        - 0.5 * lg.factor.logdet()
        + hyper_logprior
    )


def optimize_hyper(spec, strategy: str = "eb", x_warm=None, max_eval: int = 300,
                   xatol: float = 2e-2, fatol: float = 1e-3,
                   grid_step: float = 1.0) -> tuple:
    """Explore the hyperparameter posterior; returns (HyperPosterior, evidence cache).

    ``strategy`` is "eb" (plug-in at the mode, default) or "grid"
    (mode-centered axis-aligned grid, 5 points per dimension).
    """
    objective = _SpecObjective(spec)
    n = spec.hyper_dim
    state = {"x": x_warm, "evals": 0}
    trace = []
    cache = {}

    def log_post(theta) -> float:
        # Cache evidence values only: a LatentGaussian holds a sparse
        # factorization, and keeping one per evaluated theta exhausts memory
        # at realistic mesh sizes.
        key = tuple(np.round(theta, 12))
        if key in cache:
            return cache[key]
        q_prior, proper = spec.q_prior(theta)
        lg = inner_newton(objective, q_prior, x0=state["x"])
        state["x"] = lg.mode
        state["evals"] += 1
        val = laplace_log_evidence(
            lg, q_prior, proper, hyper_logprior=spec.hyper_logprior(theta)
        )
        cache[key] = val
        trace.append((np.asarray(theta, dtype=float).copy(), val))
        return val

    if n == 0:
        hp = HyperPosterior(
            mode=np.zeros(0), hessian=np.zeros((0, 0)),
            grid=[(np.zeros(0), 0.0, 1.0)], strategy="eb", trace=[],
        )
        return hp, cache

    theta0 = spec.hyper_init()
    res = minimize(
        lambda t: -log_post(t), theta0, method="Nelder-Mead",
        options={
            "maxfev": max_eval, "xatol": xatol, "fatol": fatol,
            "adaptive": n > 2,
        },
    )
    best = max(trace, key=lambda kv: kv[1])
    theta_star = best[0]
    if not np.isfinite(best[1]):
        raise ConvergenceError("hyperparameter search found no finite evidence",
                               history=[v for _, v in trace])

    # Central finite-difference Hessian of the negative log posterior.
    hess = np.zeros((n, n))
    f0 = log_post(theta_star)
    for i in range(n):
        for j in range(i, n):
            ei = np.eye(n)[i] * FD_STEP
            ej = np.eye(n)[j] * FD_STEP
            if i == j:
                val = -(log_post(theta_star + ei) - 2 * f0
                        + log_post(theta_star - ei)) / FD_STEP**2
            else:
                val = -(log_post(theta_star + ei + ej)
                        - log_post(theta_star + ei - ej)
                        - log_post(theta_star - ei + ej)
                        + log_post(theta_star - ei - ej)) / (4 * FD_STEP**2)
            hess[i, j] = hess[j, i] = val
    # Guard against non-PD finite-difference estimates.
    eigs = np.linalg.eigvalsh(hess)
    if np.min(eigs) <= 0:
        hess = hess + (abs(np.min(eigs)) + 1e-4) * np.eye(n)

    if strategy == "grid":
        sd = np.sqrt(np.diag(np.linalg.inv(hess)))
        grid_pts = [theta_star.copy()]
        for i in range(n):
            for offs in (-2, -1, 1, 2):
                t = theta_star.copy()
                t[i] += offs * grid_step * sd[i]
                grid_pts.append(t)
        dens = np.array([log_post(t) for t in grid_pts])
        w = np.exp(dens - np.max(dens))
        w /= w.sum()
        grid = [(t, float(d), float(wi)) for t, d, wi in zip(grid_pts, dens, w)]
    else:
        grid = [(theta_star.copy(), float(f0), 1.0)]

    hp = HyperPosterior(mode=theta_star, hessian=hess, grid=grid,
                        strategy=strategy, trace=trace)
    return hp, cache


def apply_constraints(lg: LatentGaussian, a, e) -> LatentGaussian:
    """Condition the Gaussian approximation on A x = e (kriging correction)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    e = np.asarray(e, dtype=float).ravel()
    qinv_at = np.column_stack([lg.factor.solve(row) for row in a])
    s = a @ qinv_at
    if np.linalg.matrix_rank(s) < len(a):
        raise ConstraintError("constraint matrix is rank deficient")
    resid = a @ lg.mode - e
    mode = lg.mode - qinv_at @ np.linalg.solve(s, resid)
    return LatentGaussian(
        mode=mode, q_post=lg.q_post, factor=lg.factor,
        loglik_at_mode=lg.loglik_at_mode, iterations=lg.iterations,
        constraint=(a, e),
    )


def _constrain_draws(lg: LatentGaussian, draws: np.ndarray) -> np.ndarray:
    if lg.constraint is None:
        return draws
    a, e = lg.constraint
    qinv_at = np.column_stack([lg.factor.solve(row) for row in a])
    s = a @ qinv_at
    resid = draws @ a.T - e
    return draws - resid @ np.linalg.solve(s, qinv_at.T)


def fit_model(spec, strategy: str = "eb", max_eval: int = 300) -> FitResult:
    """Full fit: hyperparameter search, then the latent Gaussian at the mode."""
    t0 = time.time()
    hyper, _ = optimize_hyper(spec, strategy=strategy, max_eval=max_eval)
    objective = _SpecObjective(spec)
    a, e = spec.constraint_matrix()

    def latent_at(theta):
        q_prior, _ = spec.q_prior(theta)
        lg = inner_newton(objective, q_prior, x0=None)
        if a is not None:
            lg = apply_constraints(lg, a, e)
        return lg

    latent = latent_at(hyper.mode if spec.hyper_dim else np.zeros(0))
    grid_latents = None
    if hyper.strategy == "grid":
        grid_latents = [latent_at(t) for t, _, _ in hyper.grid]
    return FitResult(
        spec=spec, hyper=hyper, latent=latent, grid_latents=grid_latents,
        runtime=time.time() - t0,
    )


def sample_posterior(fit: FitResult, n: int, seed: int = 0) -> np.ndarray:
    """(n, latent_dim) draws from the Gaussian approximation.

    Uses the counter-based Philox generator so draws are reproducible across
    platforms and thread counts.
    """
    if n < 1:
        raise ValueError("need at least one draw")
    rng = np.random.Generator(np.random.Philox(seed))
    dim = len(fit.latent.mode)
    if fit.grid_latents is not None:
        weights = np.array([w for _, _, w in fit.hyper.grid])
        choice = rng.choice(len(weights), size=n, p=weights)
        z = rng.standard_normal((dim, n))
        draws = np.empty((n, dim))
        for gi, lg in enumerate(fit.grid_latents):
            idx = np.nonzero(choice == gi)[0]
            if len(idx) == 0:
                continue
            d = lg.mode[None, :] + lg.factor.sample(z[:, idx]).T
            draws[idx] = _constrain_draws(lg, d)
        return draws
    lg = fit.latent
    z = rng.standard_normal((dim, n))
    draws = lg.mode[None, :] + lg.factor.sample(z).T
    return _constrain_draws(lg, draws)


def sample_hyper(fit: FitResult, n: int, seed: int = 0) -> np.ndarray:
    """Draws of theta (log scale) from the Gaussian at the hyper mode."""
    rng = np.random.Generator(np.random.Philox([seed, 1]))
    k = len(fit.hyper.mode)
    if k == 0:
        return np.zeros((n, 0))
    cov = fit.hyper.covariance
    chol = np.linalg.cholesky(cov)
    return fit.hyper.mode[None, :] + rng.standard_normal((n, k)) @ chol.T


def summarize(fit: FitResult, samples: np.ndarray, seed: int = 0) -> dict:
    """Marginal summaries per component and hyperparameter."""
    spec = fit.spec
    qs = [0.025, 0.5, 0.975]
    out = {"components": {}, "hyperparameters": {}}
    for comp in spec.components:
        block = spec.block(comp.name)
        s = samples[:, block]
        out["components"][comp.name] = {
            "kind": comp.kind,
            "mean": np.mean(s, axis=0).tolist(),
            "sd": np.std(s, axis=0, ddof=1).tolist(),
            "q0.025": np.quantile(s, qs[0], axis=0).tolist(),
            "q0.5": np.quantile(s, qs[1], axis=0).tolist(),
            "q0.975": np.quantile(s, qs[2], axis=0).tolist(),
        }
    theta = sample_hyper(fit, len(samples), seed=seed)
    i = 0
    for comp in spec.components:
        if comp.n_hyper == 0:
            continue
        entry = {}
        if comp.n_hyper == 2:
            r = np.exp(theta[:, i])
            sg = np.exp(theta[:, i + 1])
            i += 2
            entry["range"] = _scalar_summary(r)
        else:
            sg = np.exp(theta[:, i])
            i += 1
            entry["range"] = {"fixed": comp.spde.prior.r0}
        entry["sigma"] = _scalar_summary(sg)
        out["hyperparameters"][comp.name] = entry
    return out


def _scalar_summary(v: np.ndarray) -> dict:
    return {
        "mean": float(np.mean(v)),
        "sd": float(np.std(v, ddof=1)),
        "q0.025": float(np.quantile(v, 0.025)),
        "q0.5": float(np.quantile(v, 0.5)),
        "q0.975": float(np.quantile(v, 0.975)),
    }


# ---------------------------------------------------------------------------
# Serialization


def write_fit_json(fit: FitResult, path, extra=None) -> None:
    payload = {
        "format": "lgcp-fit v1",
        "strategy": fit.hyper.strategy,
        "runtime_seconds": fit.runtime,
        "iterations": fit.latent.iterations,
        "warnings": fit.warnings,
        "theta_mode": fit.hyper.mode.tolist(),
        "theta_hessian": fit.hyper.hessian.tolist(),
        "theta_grid": [
            {"theta": list(map(float, t)), "log_density": d, "weight": w}
            for t, d, w in fit.hyper.grid
        ],
        "summaries": fit.summaries,
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def write_fit_binary(fit: FitResult, path) -> None:
    """LGFIT v1 sidecar: mode vector plus the sparse posterior precision."""
    q = fit.latent.q_post.tocsr()
    buf = io.BytesIO()
    np.savez(
        buf,
        mode=fit.latent.mode,
        q_data=q.data,
        q_indices=q.indices,
        q_indptr=q.indptr,
        q_shape=np.asarray(q.shape),
    )
    with open(path, "wb") as fh:
        fh.write(b"LGFIT v1\n")
        fh.write(buf.getvalue())


def read_fit_binary(path):
    """(mode, Q_post) from an LGFIT v1 sidecar."""
    with open(path, "rb") as fh:
        header = fh.readline()
        if header.strip() != b"LGFIT v1":
            raise ValueError(f"unsupported fit sidecar: {header!r}")
        data = np.load(io.BytesIO(fh.read()))
    q = sp.csr_matrix(
        (data["q_data"], data["q_indices"], data["q_indptr"]),
        shape=tuple(data["q_shape"]),
    )
    return data["mode"], q
