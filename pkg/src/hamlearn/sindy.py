"""Sparse closed-form fits of a learned potential.

A candidate library of symbolic basis functions is evaluated on sample points
to form a design matrix; sequentially-thresholded least squares selects a
sparse coefficient vector; the threshold is tuned downward from a starting
value until the normalized residual passes, yielding the sparsest acceptable
algebraic expression.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllPrunedError, ConfigError, DomainError, NoFitError

CONSTANT = "constant"
MONOMIAL = "monomial"
INVERSE_POWER = "inverse_power"
SHIFTED_INVERSE_POWER = "shifted_inverse_power"
CROSS_MONOMIAL = "cross_monomial"


@dataclass(frozen=True)
class CandidateFunction:
    """One symbolic basis function with a human-readable label.

    form selects the evaluator; var/power/shift/multi_index parameterize it.
    """

    form: str
    label: str
    var: int = 0
    power: int = 1
    shift: float = 0.0
    multi_index: tuple = ()

    def __post_init__(self):
        if self.form not in (CONSTANT, MONOMIAL, INVERSE_POWER, SHIFTED_INVERSE_POWER, CROSS_MONOMIAL):
            raise ConfigError(f"unknown candidate form {self.form!r}")
        if self.form in (MONOMIAL, INVERSE_POWER, SHIFTED_INVERSE_POWER) and self.power < 1:
            raise ConfigError("power must be >= 1")

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        x = points
        if self.form == CONSTANT:
            return np.ones(x.shape[0])
        if self.form == MONOMIAL:
            return x[:, self.var] ** self.power
        if self.form == INVERSE_POWER:
            base = x[:, self.var]
        elif self.form == SHIFTED_INVERSE_POWER:
            base = self.shift - x[:, self.var]
        else:  # CROSS_MONOMIAL
            out = np.ones(x.shape[0])
            for v, p in self.multi_index:
                out = out * x[:, v] ** p
            return out
        if np.any(base == 0.0):
            raise DomainError(f"candidate {self.label!r} has a pole at a sample point")
        return base ** (-self.power)


@dataclass(frozen=True)
class CandidateLibrary:
    functions: tuple
    input_dim: int = 1

    def __post_init__(self):
        funcs = tuple(self.functions)
        labels = [f.label for f in funcs]
        if len(set(labels)) != len(labels):
            raise ConfigError("candidate labels must be unique")
        object.__setattr__(self, "functions", funcs)

    def __len__(self) -> int:
        return len(self.functions)

    @property
    def labels(self) -> list:
        return [f.label for f in self.functions]

    def index_of(self, label: str) -> int:
        for j, f in enumerate(self.functions):
            if f.label == label:
                return j
        raise ConfigError(f"label {label!r} not in library")


def polynomial_library(max_degree: int, var_name: str = "q") -> CandidateLibrary:
    """{1, q, q^2, ..., q^max_degree} for one-dimensional inputs."""
    funcs = [CandidateFunction(CONSTANT, "1")]
    for p in range(1, max_degree + 1):
        label = var_name if p == 1 else f"{var_name}^{p}"
        funcs.append(CandidateFunction(MONOMIAL, label, var=0, power=p))
    return CandidateLibrary(tuple(funcs), input_dim=1)


def inverse_power_library(max_power: int, var_name: str = "r") -> CandidateLibrary:
    """{1, r^-1, ..., r^-max_power} for one-dimensional inputs."""
    funcs = [CandidateFunction(CONSTANT, "1")]
    for p in range(1, max_power + 1):
        funcs.append(CandidateFunction(INVERSE_POWER, f"{var_name}^-{p}", var=0, power=p))
    return CandidateLibrary(tuple(funcs), input_dim=1)


def radial_wall_library(wall: float = 10.0, max_power: int = 3, var_name: str = "r") -> CandidateLibrary:
    """{1, r^-1..r^-k, (wall-r)^-1..(wall-r)^-k}."""
    wall_s = f"{wall:g}"
    funcs = [CandidateFunction(CONSTANT, "1")]
    for p in range(1, max_power + 1):
        funcs.append(CandidateFunction(INVERSE_POWER, f"{var_name}^-{p}", var=0, power=p))
    for p in range(1, max_power + 1):
        funcs.append(
            CandidateFunction(
                SHIFTED_INVERSE_POWER, f"({wall_s}-{var_name})^-{p}", var=0, power=p, shift=wall
            )
        )
    return CandidateLibrary(tuple(funcs), input_dim=1)


@dataclass
class SparseFit:
    """Sparse regression result: coefficients, active mask, residual."""

    beta: np.ndarray
    active: np.ndarray
    lam: float
    residual_norm: float
    n_samples: int
    lambda_path: list = field(default_factory=list)

    @property
    def normalized_residual(self) -> float:
        return self.residual_norm / np.sqrt(self.n_samples)


def build_design(lib: CandidateLibrary, points) -> np.ndarray:
    """Evaluate every candidate on every point; column j is candidate j."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != lib.input_dim:
        raise ConfigError(f"points must be (K, {lib.input_dim}), got {pts.shape}")
    cols = []
    for f in lib.functions:
        col = f.evaluate(pts)
        if not np.all(np.isfinite(col)):
            k = int(np.argmin(np.isfinite(col)))
            raise DomainError(
                f"candidate {f.label!r} is not finite at point {pts[k].tolist()}"
            )
        cols.append(col)
    return np.column_stack(cols)


def ols(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least squares via orthogonal factorization; minimum-norm if rank-deficient."""
    beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    return beta


def stlsq(X: np.ndarray, y: np.ndarray, lam: float) -> SparseFit:
    """Sequentially-thresholded least squares.

    Alternates least squares on the active columns with hard thresholding at
    lam; pruned coefficients stay frozen at zero.  Terminates when the active
    set stops changing (at most J iterations, since each pass either converges
    or strictly shrinks the set).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if lam < 0:
        raise ConfigError("lambda must be >= 0")
    K, J = X.shape
    active = np.ones(J, dtype=bool)
    beta = np.zeros(J)
    while True:
        beta_act = ols(X[:, active], y)
        beta = np.zeros(J)
        beta[active] = beta_act
        prune = active & (np.abs(beta) < lam)
        if not prune.any():
            break
        active = active & ~prune
        if not active.any():
            raise AllPrunedError(f"lambda={lam:g} removed every candidate")
    residual = float(np.linalg.norm(y - X @ beta))
    return SparseFit(beta=beta, active=active, lam=float(lam), residual_norm=residual, n_samples=K)


def tune_lambda(
    X: np.ndarray,
    y: np.ndarray,
    start: float = 1.0,
    factor: float = 0.5,
    tol: float = 1e-3,
    min_lambda: float = 1e-12,
) -> SparseFit:
    """Walk lambda downward geometrically; return the sparsest passing fit.

    A fit passes when its normalized residual |eps|/sqrt(K) is <= tol.  Lambdas
    that prune everything simply fail and the walk continues.
    """
    if not start > 0:
        raise ConfigError("start must be positive")
    if not 0 < factor < 1:
        raise ConfigError("factor must be in (0, 1)")
    lam = start
    path = []
    while lam >= min_lambda:
        path.append(lam)
        try:
            fit = stlsq(X, y, lam)
        except AllPrunedError:
            lam *= factor
            continue
        if fit.normalized_residual <= tol:
            fit.lambda_path = path
            return fit
        lam *= factor
    raise NoFitError(
        f"no lambda in [{min_lambda:g}, {start:g}] reached normalized residual <= {tol:g}"
    )


def coefficient_map(fit: SparseFit, lib: CandidateLibrary) -> dict:
    """label -> coefficient for every active term."""
    return {
        lib.functions[j].label: float(fit.beta[j])
        for j in range(len(lib))
        if fit.active[j] and fit.beta[j] != 0.0
    }


def render_expression(fit: SparseFit, lib: CandidateLibrary, digits: int = 4) -> str:
    """Signed sum of active terms in library order, e.g. '-49.18 + 0.4978*q^2'."""
    parts = []
    for j, f in enumerate(lib.functions):
        if not fit.active[j] or fit.beta[j] == 0.0:
            continue
        coef = fit.beta[j]
        mag = f"{abs(coef):.{digits}g}"
        term = mag if f.form == CONSTANT else f"{mag}*{f.label}"
        if not parts:
            parts.append(term if coef >= 0 else f"-{term}")
        else:
            parts.append(f"+ {term}" if coef >= 0 else f"- {term}")
    return " ".join(parts) if parts else "0"


def parse_expression(text: str) -> dict:
    """Inverse of render_expression: label -> coefficient (constant under '1')."""
    text = text.strip()
    if text == "0":
        return {}
    tokens = text.replace("- ", "|-").replace("+ ", "|+").split("|")
    out = {}
    for tok in tokens:
        tok = tok.strip()
        if not tok:
            continue
        sign = 1.0
        if tok[0] == "+":
            tok = tok[1:]
        elif tok[0] == "-":
            sign = -1.0
            tok = tok[1:]
        if "*" in tok:
            mag, label = tok.split("*", 1)
        else:
            mag, label = tok, "1"
        out[label] = sign * float(mag)
    return out


def evaluate_fit(fit: SparseFit, lib: CandidateLibrary, points) -> np.ndarray:
    """The fitted expression evaluated at points (design @ beta)."""
    return build_design(lib, points) @ fit.beta
