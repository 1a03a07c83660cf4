"""IMEX Runge-Kutta tableau pairs and stabilizer certification.

A pair is stored in the compact s x s form used by the stepper: row ``i`` of
``A`` holds the implicit coefficients multiplying ``L u_j`` (j = 1..i) and row
``i`` of ``Ahat`` holds the explicit coefficients multiplying ``N(u_{j-1})``.
The zero first row/column of the usual padded Butcher arrays is implicit.

Certification builds the matrices

    Q  = (Ahat^-1 A - I) E_L + I
    H0 = Ahat^-1 E_L
    H1 = beta Q - (lip / 2) I
    H2 = alpha Q - E / 2 + Ahat^-1 A E_L

and checks positive-definiteness of their symmetric parts together with all
leading principal submatrices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ContractViolation, StructuralError

RESIDUAL_TOL = 1e-12
DET_TOL = 1e-12
JACOBI_MAX_SWEEPS = 30
JACOBI_EXIT_TOL = 1e-14
INTERLACE_TOL = 1e-10

SHIPPED = ("euler1", "imex2", "imex43")


@dataclass(frozen=True)
class ImexTableau:
    """Paired implicit/explicit coefficient arrays with a declared order."""

    A: np.ndarray
    Ahat: np.ndarray
    c: np.ndarray
    declared_order: int
    name: str = ""

    def __post_init__(self):
        a = np.array(self.A, dtype=float)
        ah = np.array(self.Ahat, dtype=float)
        c = np.array(self.c, dtype=float).ravel()
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise StructuralError(f"A must be a non-empty square matrix, got shape {a.shape}")
        if ah.shape != a.shape:
            raise StructuralError(f"Ahat shape {ah.shape} does not match A shape {a.shape}")
        if c.shape != (a.shape[0],):
            raise StructuralError(f"c has length {c.size}, expected {a.shape[0]}")
        if int(self.declared_order) < 1:
            raise StructuralError("declared order must be a positive integer")
        for arr in (a, ah, c):
            arr.setflags(write=False)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "Ahat", ah)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "declared_order", int(self.declared_order))

    @property
    def s(self) -> int:
        return self.A.shape[0]

    @property
    def b(self) -> np.ndarray:
        """Implicit weights; the pair is stiffly accurate so these are A's last row."""
        return self.A[-1]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "s": self.s,
            "A": self.A.tolist(),
            "Ahat": self.Ahat.tolist(),
            "c": self.c.tolist(),
            "order": self.declared_order,
        }


_FILE_KEYS = {"s", "A", "Ahat", "c", "order"}
_OPTIONAL_KEYS = {"name", "notes"}


def tableau_from_dict(data: dict, name: str = "") -> ImexTableau:
    """Build a tableau from the JSON-shaped file layout.

    Upper-triangular entries must be exactly zero; nothing is repaired.
    """
    missing = _FILE_KEYS - data.keys()
    if missing:
        raise StructuralError(f"tableau is missing keys: {sorted(missing)}")
    unknown = data.keys() - _FILE_KEYS - _OPTIONAL_KEYS
    if unknown:
        raise StructuralError(f"unknown tableau keys: {sorted(unknown)}")
    s = data["s"]
    if not isinstance(s, int) or isinstance(s, bool) or s < 1:
        raise StructuralError(f"s must be a positive integer, got {s!r}")
    for key in ("A", "Ahat"):
        rows = data[key]
        if len(rows) != s or any(len(row) != s for row in rows):
            raise StructuralError(f"{key} must have {s} rows of {s} entries")
        for i, row in enumerate(rows):
            for j in range(i + 1, s):
                if row[j] != 0:
                    raise StructuralError(f"{key}[{i}][{j}] = {row[j]!r} above the diagonal; must be exactly 0")
    if len(data["c"]) != s:
        raise StructuralError(f"c must have {s} entries")
    return ImexTableau(
        A=data["A"], Ahat=data["Ahat"], c=data["c"],
        declared_order=data["order"], name=data.get("name", name),
    )


def load_tableau(path_or_name) -> ImexTableau:
    """Load a tableau from a file path, or one of the shipped names in ``SHIPPED``.

    Shipped tableaux are validated and checked for positive-definite
    ``Qbar``/``H0bar`` every time they are loaded.
    """
    if str(path_or_name) in SHIPPED:
        name = str(path_or_name)
        text = resources.files("pfc_imex.tableaux").joinpath(f"{name}.json").read_text()
        tab = tableau_from_dict(json.loads(text), name=name)
        report = validate_tableau(tab)
        if not report.passed:
            raise StructuralError(f"shipped tableau {name} fails validation: {report.failures()}")
        Q, H0, _, _ = build_certification_matrices(tab, 0.0, 0.0, 0.0)
        for label, M in (("Qbar", symmetrize(Q)), ("H0bar", symmetrize(H0))):
            if eig_symmetric(M)[0] <= pd_threshold(M):
                raise StructuralError(f"shipped tableau {name}: {label} is not positive-definite")
        return tab
    path = Path(path_or_name)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise StructuralError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return tableau_from_dict(data, name=path.stem)


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    residual: float
    message: str = ""


@dataclass(frozen=True)
class ValidationReport:
    conditions: tuple

    @property
    def passed(self) -> bool:
        return all(cond.passed for cond in self.conditions)

    def failures(self) -> list:
        return [f"{cond.name}: {cond.message}" for cond in self.conditions if not cond.passed]

    def __getitem__(self, name) -> ConditionResult:
        for cond in self.conditions:
            if cond.name == name:
                return cond
        raise KeyError(name)


def validate_tableau(tab: ImexTableau, tol: float = RESIDUAL_TOL) -> ValidationReport:
    """Check the structural conditions a pair must meet before it can be used."""
    A, Ah, c = tab.A, tab.Ahat, tab.c
    conds = []

    upper = max(np.abs(np.triu(A, 1)).max(initial=0.0), np.abs(np.triu(Ah, 1)).max(initial=0.0))
    conds.append(ConditionResult(
        "lower_triangular", upper == 0.0, float(upper),
        "" if upper == 0.0 else "nonzero entries above the diagonal"))

    res = max(np.abs(A.sum(axis=1) - c).max(), np.abs(Ah.sum(axis=1) - c).max())
    conds.append(ConditionResult(
        "row_sum_consistency", bool(res <= tol), float(res),
        "" if res <= tol else f"row sums of A/Ahat differ from c by {res:.3e}"))

    # Output is stage s, so the implied weights b = A[s-1] must sum to one.
    res = abs(c[-1] - 1.0)
    conds.append(ConditionResult(
        "stiff_accuracy", bool(res <= tol), float(res),
        "" if res <= tol else f"last abscissa c_s = {c[-1]!r} != 1"))

    det = float(np.prod(np.diag(Ah)))
    ok = abs(det) > DET_TOL
    conds.append(ConditionResult(
        "ahat_invertible", ok, abs(det), "" if ok else "Â not invertible"))

    diag = float(np.diag(A).min())
    conds.append(ConditionResult(
        "implicit_diagonal_positive", diag > 0.0, diag,
        "" if diag > 0.0 else "A has a non-positive diagonal entry"))
    return ValidationReport(tuple(conds))


def order_residuals(tab: ImexTableau, order: int | None = None) -> dict:
    """Residuals of the IMEX order conditions up to ``order`` (default: declared).

    The pair is padded to s + 1 stages (explicit first stage) and the
    standard conditions up to third order are evaluated for the implicit
    weights ``b``, the explicit weights ``bhat`` and all couplings.
    """
    order = tab.declared_order if order is None else order
    if order > 3:
        raise ContractViolation("order conditions are implemented up to order 3")
    s = tab.s
    Ai = np.zeros((s + 1, s + 1))
    Ae = np.zeros((s + 1, s + 1))
    Ai[1:, 1:] = tab.A
    Ae[1:, :s] = tab.Ahat
    c = Ai.sum(axis=1)
    weights = {"b": Ai[-1], "bhat": Ae[-1]}
    res = {f"sum_{k}": float(w.sum() - 1.0) for k, w in weights.items()}
    if order >= 2:
        res.update({f"{k}.c": float(w @ c - 0.5) for k, w in weights.items()})
    if order >= 3:
        res.update({f"{k}.c^2": float(w @ c**2 - 1.0 / 3.0) for k, w in weights.items()})
        for k, w in weights.items():
            for m, M in (("A", Ai), ("Ahat", Ae)):
                res[f"{k}.{m}.c"] = float(w @ M @ c - 1.0 / 6.0)
    return res


def _lower_inverse(L: np.ndarray) -> np.ndarray:
    """Inverse of a lower-triangular matrix by forward substitution."""
    n = L.shape[0]
    inv = np.zeros_like(L)
    for k in range(n):
        if L[k, k] == 0.0:
            raise StructuralError("Ahat not invertible (zero diagonal entry)")
    for col in range(n):
        inv[col, col] = 1.0 / L[col, col]
        for i in range(col + 1, n):
            inv[i, col] = -(L[i, col:i] @ inv[col:i, col]) / L[i, i]
    return inv


def build_certification_matrices(tab: ImexTableau, alpha: float, beta: float, lip: float):
    """Return ``(Q, H0, H1, H2)`` for the pair and the given stabilizers."""
    s = tab.s
    I = np.eye(s)
    E = np.ones((s, s))
    EL = np.tril(E)
    Ahi = _lower_inverse(tab.Ahat)
    AhiA = Ahi @ tab.A
    Q = (AhiA - I) @ EL + I
    H0 = Ahi @ EL
    H1 = beta * Q
    H1[np.diag_indices(s)] -= 0.5 * lip
    H2 = alpha * Q - 0.5 * E + AhiA @ EL
    return Q, H0, H1, H2


def symmetrize(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def eig_symmetric(M, max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.

    Returns the eigenvalues in ascending order.
    """
    S = np.array(M, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {S.shape}")
    norm = np.linalg.norm(S)
    if np.abs(S - S.T).max(initial=0.0) > 1e-12 * max(1.0, norm):
        raise ContractViolation("eig_symmetric requires a symmetric matrix")
    n = S.shape[0]
    if norm == 0.0:
        return np.zeros(n)
    S = 0.5 * (S + S.T)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(S - np.diag(np.diag(S))))
        if off < JACOBI_EXIT_TOL * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = S[p, q]
                if apq == 0.0:
                    continue
                diff = S[q, q] - S[p, p]
                if abs(apq) < 1e-100 * abs(diff):
                    t = apq / diff  # theta would overflow
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(1.0, theta))
                cs = 1.0 / math.hypot(1.0, t)
                sn = t * cs
                # S <- J^T S J with J the (p, q) plane rotation
                rp = S[p, :].copy()
                rq = S[q, :].copy()
                S[p, :] = cs * rp - sn * rq
                S[q, :] = sn * rp + cs * rq
                cp = S[:, p].copy()
                cq = S[:, q].copy()
                S[:, p] = cs * cp - sn * cq
                S[:, q] = sn * cp + cs * cq
                S[p, q] = S[q, p] = 0.0
    return np.sort(np.diag(S))


def pd_threshold(M) -> float:
    return 1e-12 * max(1.0, float(np.linalg.norm(M)))


def interlaces(full_eigs, sub_eigs, tol: float = INTERLACE_TOL) -> bool:
    """Cauchy interlacing ``lam_k <= mu_k <= lam_{k+n-m}`` for sorted eigenvalue lists."""
    n, m = len(full_eigs), len(sub_eigs)
    return all(
        full_eigs[k] - tol <= sub_eigs[k] <= full_eigs[k + n - m] + tol
        for k in range(m)
    )


@dataclass
class StabilizerCertificate:
    Q: np.ndarray
    H0: np.ndarray
    H1: np.ndarray
    H2: np.ndarray
    alpha: float
    beta: float
    lip: float
    lambda_min_Qbar: float
    lambda_min_H0bar: float
    alpha_min: float
    beta_min: float
    submatrix_pd: dict = field(default_factory=dict)
    interlacing_ok: bool = True
    admissible: bool = False
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "admissible": self.admissible,
            "reason": self.reason,
            "alpha": self.alpha,
            "beta": self.beta,
            "lipschitz": self.lip,
            "lambda_min_Qbar": self.lambda_min_Qbar,
            "lambda_min_H0bar": self.lambda_min_H0bar,
            "alpha_min": self.alpha_min,
            "beta_min": self.beta_min,
            "interlacing_ok": self.interlacing_ok,
            "submatrix_pd": {k: list(v) for k, v in self.submatrix_pd.items()},
            "Q": self.Q.tolist(),
            "H0": self.H0.tolist(),
            "H1": self.H1.tolist(),
            "H2": self.H2.tolist(),
        }


def certify(tab: ImexTableau, alpha: float, beta: float, lip: float) -> StabilizerCertificate:
    """Check whether ``(alpha, beta)`` guarantee unconditional energy dissipation.

    ``Qbar`` and ``H0bar`` (and their leading submatrices) must be positive
    definite. ``H1bar(beta)`` and ``H2bar(alpha)`` need only be positive
    semi-definite, which is exactly what the lower bounds ``alpha_min``,
    ``beta_min`` deliver. Never raises on an inadmissible pair.
    """
    s = tab.s
    Q, H0, H1, H2 = build_certification_matrices(tab, alpha, beta, lip)
    bars = {"Q": symmetrize(Q), "H0": symmetrize(H0), "H1": symmetrize(H1), "H2": symmetrize(H2)}
    if not math.isfinite(lip):
        # no truncation: f is not globally Lipschitz and no finite beta qualifies
        del bars["H1"]
    full = {key: eig_symmetric(M) for key, M in bars.items()}
    lam_q = float(full["Q"][0])
    lam_h0 = float(full["H0"][0])

    reasons = []
    q_pd = lam_q > pd_threshold(bars["Q"])
    h0_pd = lam_h0 > pd_threshold(bars["H0"])
    if q_pd:
        alpha_min = 1.0 / (2.0 * lam_q) - 1.0
        beta_min = lip / (2.0 * lam_q)
    else:
        alpha_min = beta_min = math.inf
        reasons.append("Qbar is not positive-definite")
    if not h0_pd:
        reasons.append("H0bar is not positive-definite")
    if q_pd and not alpha >= alpha_min - 1e-12 * max(1.0, abs(alpha_min)):
        reasons.append("α below α_min")
    if q_pd and not beta >= beta_min - 1e-12 * max(1.0, abs(beta_min)):
        reasons.append("β below β_min")

    submatrix_pd = {key: [] for key in bars}
    if "H1" not in bars:
        submatrix_pd["H1"] = [False] * s
    interlacing_ok = True
    for m in range(1, s + 1):
        for key, M in bars.items():
            sub = M[:m, :m]
            eigs = eig_symmetric(sub)
            interlacing_ok &= interlaces(full[key], eigs)
            if key in ("Q", "H0"):
                ok = eigs[0] > pd_threshold(sub)
            else:
                ok = eigs[0] >= -pd_threshold(sub)
            submatrix_pd[key].append(bool(ok))
    if not interlacing_ok:
        reasons.append("eigenvalue interlacing cross-check failed")

    admissible = not reasons
    if admissible and not all(all(v) for v in submatrix_pd.values()):
        admissible = False
        reasons.append("leading principal submatrix check failed")
    return StabilizerCertificate(
        Q=Q, H0=H0, H1=H1, H2=H2, alpha=float(alpha), beta=float(beta), lip=float(lip),
        lambda_min_Qbar=lam_q, lambda_min_H0bar=lam_h0,
        alpha_min=float(alpha_min), beta_min=float(beta_min),
        submatrix_pd=submatrix_pd, interlacing_ok=bool(interlacing_ok),
        admissible=admissible, reason="; ".join(reasons),
    )
