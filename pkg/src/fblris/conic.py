"""Solver-agnostic conic programs (linear, second-order and exponential cones).

A :class:`ConicProgram` is a linear objective over a list of constraint
blocks. Complex decision variables are lifted to interleaved (real, imag)
pairs; :class:`VariableMap` records where every named variable lives.
:func:`solve` hands the program to the Clarabel interior-point solver and
re-checks every block of the returned point on its own.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import clarabel
import numpy as np
from scipy import sparse

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class VarBlock:
    name: str
    start: int
    size: int
    is_complex: bool = False

    @property
    def width(self) -> int:
        return 2 * self.size if self.is_complex else self.size

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.start + self.width)

    def index(self, j: int) -> int:
        if self.is_complex:
            raise TypeError(f"{self.name} is complex; use re_index/im_index")
        return self.start + j

    def re_index(self, j: int) -> int:
        return self.start + 2 * j

    def im_index(self, j: int) -> int:
        return self.start + 2 * j + 1


class VariableMap:
    """Named variable blocks laid out contiguously in one real vector."""

    def __init__(self):
        self.blocks: dict[str, VarBlock] = {}
        self.size = 0

    def add(self, name: str, size: int, is_complex: bool = False) -> VarBlock:
        if name in self.blocks:
            raise ValueError(f"variable {name!r} already defined")
        block = VarBlock(name, self.size, size, is_complex)
        self.blocks[name] = block
        self.size += block.width
        return block

    def __getitem__(self, name: str) -> VarBlock:
        return self.blocks[name]

    def extract(self, x: np.ndarray, name: str) -> np.ndarray:
        block = self.blocks[name]
        values = x[block.start : block.start + block.width]
        return unlift(values) if block.is_complex else values.copy()


def lift(z: np.ndarray) -> np.ndarray:
    """Complex vector -> interleaved (re, im) real vector."""
    z = np.asarray(z, dtype=complex)
    out = np.empty(2 * z.size)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


def unlift(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[0::2] + 1j * x[1::2]


def complex_rows(coef: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Real rows (in lifted coordinates) of Re{coef^T z} and Im{coef^T z}."""
    coef = np.asarray(coef, dtype=complex)
    re = np.empty(2 * coef.size)
    im = np.empty(2 * coef.size)
    re[0::2], re[1::2] = coef.real, -coef.imag
    im[0::2], im[1::2] = coef.imag, coef.real
    return re, im


def _violation_scale(*arrays) -> float:
    return 1.0 + max((float(np.max(np.abs(a))) if np.size(a) else 0.0) for a in arrays)


@dataclass
class LinearEq:
    """A x = b."""

    A: np.ndarray
    b: np.ndarray
    label: str = ""

    def residual(self, x):
        return float(np.max(np.abs(self.A @ x - self.b), initial=0.0))


@dataclass
class LinearIneq:
    """A x <= b."""

    A: np.ndarray
    b: np.ndarray
    label: str = ""

    def residual(self, x):
        return float(np.max(self.A @ x - self.b, initial=0.0))


@dataclass
class SecondOrderCone:
    """||A x + b||_2 <= c^T x + d."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float
    label: str = ""

    def residual(self, x):
        return max(0.0, float(np.linalg.norm(self.A @ x + self.b) - (self.c @ x + self.d)))


@dataclass
class ExpCone:
    """(s1, s2, s3) = A x + b with s2 * exp(s1 / s2) <= s3, s2 > 0 (closure)."""

    A: np.ndarray
    b: np.ndarray
    label: str = ""

    def residual(self, x):
        s1, s2, s3 = self.A @ x + self.b
        if s2 <= 0.0:
            return max(0.0, -s2) + max(0.0, s1) + max(0.0, -s3)
        # compare in log space to avoid overflow: s1 <= s2 * log(s3 / s2)
        if s3 <= 0.0:
            return float(s2 * math.exp(min(s1 / s2, 700.0)) - s3)
        return max(0.0, float(s1 - s2 * math.log(s3 / s2)))


Block = LinearEq | LinearIneq | SecondOrderCone | ExpCone


@dataclass
class ConicProgram:
    """min c^T x + c0 subject to constraint blocks and optional box bounds."""

    variables: VariableMap
    objective: np.ndarray
    objective_constant: float = 0.0
    blocks: list = field(default_factory=list)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    @property
    def num_vars(self) -> int:
        return self.variables.size

    def validate(self):
        n = self.num_vars
        if self.objective.shape != (n,):
            raise ValueError("objective length does not match the variable count")
        for block in self.blocks:
            if block.A.shape[-1] != n:
                raise ValueError(f"block {block.label!r} references {block.A.shape[-1]} vars, program has {n}")
        for bound in (self.lower, self.upper):
            if bound is not None and bound.shape != (n,):
                raise ValueError("bounds must have one entry per variable")

    def max_residual(self, x: np.ndarray) -> float:
        """Largest constraint violation of x, scaled by the block data."""
        worst = 0.0
        for block in self.blocks:
            if isinstance(block, SecondOrderCone):
                scale = _violation_scale(block.b, [block.d])
            else:
                scale = _violation_scale(block.b)
            worst = max(worst, block.residual(x) / scale)
        if self.lower is not None:
            worst = max(worst, float(np.max(self.lower - x, initial=0.0)))
        if self.upper is not None:
            worst = max(worst, float(np.max(x - self.upper, initial=0.0)))
        return worst

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.objective @ x + self.objective_constant)


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class Solution:
    status: Status
    primal: np.ndarray | None
    objective_value: float
    solve_time_s: float
    max_residual: float = math.nan
    best_iterate: bool = False

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


def _pad(a: np.ndarray, n: int) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[1] == n:
        return a
    out = np.zeros((a.shape[0], n))
    out[:, : a.shape[1]] = a
    return out


class ProgramBuilder:
    """Incrementally declares variables and blocks.

    Block rows may be shorter than the final variable count (variables
    added later); :meth:`build` zero-pads them.
    """

    def __init__(self):
        self.variables = VariableMap()
        self.blocks: list = []
        self.objective: dict[int, float] = {}
        self.objective_constant = 0.0
        self._lower: dict[int, float] = {}
        self._upper: dict[int, float] = {}

    @property
    def n(self) -> int:
        return self.variables.size

    def add_real(self, name: str, size: int, lower: float | None = None) -> VarBlock:
        block = self.variables.add(name, size)
        if lower is not None:
            for j in block.indices:
                self._lower[int(j)] = lower
        return block

    def add_complex(self, name: str, size: int) -> VarBlock:
        return self.variables.add(name, size, is_complex=True)

    def row(self, entries: dict[int, float] | None = None) -> np.ndarray:
        out = np.zeros(self.n)
        for j, value in (entries or {}).items():
            out[j] += value
        return out

    def add_objective(self, coef: np.ndarray, constant: float = 0.0):
        for j, value in enumerate(coef):
            if value:
                self.objective[j] = self.objective.get(j, 0.0) + float(value)
        self.objective_constant += constant

    def add(self, block):
        self.blocks.append(block)
        return block

    def build(self) -> ConicProgram:
        n = self.n
        blocks = []
        for block in self.blocks:
            if isinstance(block, SecondOrderCone):
                A = _pad(block.A, n) if block.A.size else np.zeros((0, n))
                blocks.append(SecondOrderCone(A, np.asarray(block.b, float), _pad(block.c, n)[0], float(block.d), block.label))
            else:
                blocks.append(type(block)(_pad(block.A, n), np.asarray(block.b, float), block.label))
        c = np.zeros(n)
        for j, value in self.objective.items():
            c[j] = value
        lower = upper = None
        if self._lower:
            lower = np.full(n, -np.inf)
            for j, value in self._lower.items():
                lower[j] = value
        if self._upper:
            upper = np.full(n, np.inf)
            for j, value in self._upper.items():
                upper[j] = value
        return ConicProgram(self.variables, c, self.objective_constant, blocks, lower, upper)


def log_rate_epigraph(
    builder: ProgramBuilder,
    q_index: int,
    r_index: int,
    u_index: int,
    bandwidth: float,
    omega_over_sqrt_eta: float,
    name: str = "t",
    q_scale: float = 1.0,
) -> int:
    """Encode r <= B * (log2(1 + q) - (Omega/sqrt(eta)) * u).

    Adds an auxiliary t with (t, 1, 1 + q) in the exponential cone, i.e.
    t <= ln(1 + q), plus the row r <= B * (t / ln 2 - c * u). Returns the
    index of t. When the variable holds q / q_scale the cone row uses
    q_scale as its coefficient.
    """
    if len({q_index, r_index, u_index}) != 3:
        raise ValueError("q, r and u must be distinct variables")
    t = builder.add_real(name, 1).start
    builder.add(
        ExpCone(
            np.vstack([builder.row({t: 1.0}), builder.row(), builder.row({q_index: q_scale})]),
            np.array([0.0, 1.0, 1.0]),
            f"{name}<=ln(1+q)",
        )
    )
    builder.add(
        LinearIneq(
            builder.row({r_index: 1.0, t: -bandwidth / math.log(2.0), u_index: bandwidth * omega_over_sqrt_eta})[None, :],
            np.array([0.0]),
            f"rate<={name}",
        )
    )
    return t


def _to_clarabel(program: ConicProgram):
    n = program.num_vars
    eq = [b for b in program.blocks if isinstance(b, LinearEq)]
    ineq = [b for b in program.blocks if isinstance(b, LinearIneq)]
    socs = [b for b in program.blocks if isinstance(b, SecondOrderCone)]
    exps = [b for b in program.blocks if isinstance(b, ExpCone)]

    rows, rhs, cones = [], [], []
    if eq:
        A = np.vstack([b.A for b in eq])
        rows.append(A)
        rhs.append(np.concatenate([b.b for b in eq]))
        cones.append(clarabel.ZeroConeT(A.shape[0]))

    nonneg_rows = [b.A for b in ineq]
    nonneg_rhs = [b.b for b in ineq]
    eye = np.eye(n)
    if program.upper is not None:
        finite = np.isfinite(program.upper)
        nonneg_rows.append(eye[finite])
        nonneg_rhs.append(program.upper[finite])
    if program.lower is not None:
        finite = np.isfinite(program.lower)
        nonneg_rows.append(-eye[finite])
        nonneg_rhs.append(-program.lower[finite])
    nonneg_rows = [r for r in nonneg_rows if r.shape[0]]
    if nonneg_rows:
        A = np.vstack(nonneg_rows)
        rows.append(A)
        rhs.append(np.concatenate([r for r in nonneg_rhs if r.size]))
        cones.append(clarabel.NonnegativeConeT(A.shape[0]))

    for b in socs:
        # s = (c^T x + d, A x + b) in SOC  <=>  s = rhs - G x
        rows.append(np.vstack([-b.c[None, :], -b.A]))
        rhs.append(np.concatenate([[b.d], b.b]))
        cones.append(clarabel.SecondOrderConeT(1 + b.A.shape[0]))
    for b in exps:
        rows.append(-b.A)
        rhs.append(b.b)
        cones.append(clarabel.ExponentialConeT())

    G = sparse.csc_matrix(np.vstack(rows)) if rows else sparse.csc_matrix((0, n))
    h = np.concatenate(rhs) if rhs else np.zeros(0)
    return G, h, cones


_STATUS = {
    "Solved": Status.OPTIMAL,
    "AlmostSolved": Status.OPTIMAL,
    "PrimalInfeasible": Status.INFEASIBLE,
    "AlmostPrimalInfeasible": Status.INFEASIBLE,
    "DualInfeasible": Status.UNBOUNDED,
    "AlmostDualInfeasible": Status.UNBOUNDED,
    "MaxIterations": Status.ITERATION_LIMIT,
    "MaxTime": Status.ITERATION_LIMIT,
    # stalled before certifying tol; the last iterate comes back flagged
    "InsufficientProgress": Status.ITERATION_LIMIT,
}


def solve(program: ConicProgram, tol: float = DEFAULT_TOL, max_iter: int = 200) -> Solution:
    """Solve ``program`` to feasibility/gap tolerance ``tol``.

    An optimal answer is only reported when the returned point also passes
    :meth:`ConicProgram.max_residual` at ``feasibility_slack * tol``;
    otherwise the status becomes ``numerical_failure`` and no primal is
    returned.
    """
    if not 1e-10 <= tol <= 1e-4:
        raise ValueError(f"tol must lie in [1e-10, 1e-4], got {tol}")
    program.validate()
    n = program.num_vars
    G, h, cones = _to_clarabel(program)

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.max_threads = 1

    start = time.perf_counter()
    solver = clarabel.DefaultSolver(sparse.csc_matrix((n, n)), program.objective.astype(float), G, h, cones, settings)
    result = solver.solve()
    elapsed = time.perf_counter() - start

    status = _STATUS.get(str(result.status), Status.NUMERICAL_FAILURE)
    x = np.asarray(result.x, dtype=float)
    if status is Status.OPTIMAL:
        residual = program.max_residual(x)
        if not residual <= FEASIBILITY_SLACK * tol:
            return Solution(Status.NUMERICAL_FAILURE, None, math.nan, elapsed, residual)
        return Solution(status, x, program.evaluate(x), elapsed, residual)
    if status is Status.ITERATION_LIMIT:
        return Solution(status, x, program.evaluate(x), elapsed, program.max_residual(x), best_iterate=True)
    return Solution(status, None, math.nan, elapsed)


# Interior-point iterates satisfy the scaled constraints to about tol; the
# re-check allows a small constant factor for the unscaled block residuals.
FEASIBILITY_SLACK = 10.0


def dump_program(program: ConicProgram) -> str:
    """Human-readable, self-describing listing of a program."""
    lines = [f"conic-program vars={program.num_vars} blocks={len(program.blocks)}"]
    for block in program.variables.blocks.values():
        kind = "complex" if block.is_complex else "real"
        lines.append(f"var {block.name} {kind} size={block.size} start={block.start}")
    fmt = lambda a: " ".join(f"{v:.17g}" for v in np.ravel(a))  # noqa: E731
    lines.append(f"objective const={program.objective_constant:.17g} c={fmt(program.objective)}")
    for i, block in enumerate(program.blocks):
        kind = type(block).__name__
        lines.append(f"block {i} {kind} label={block.label!r} rows={block.A.shape[0]}")
        for r in block.A:
            lines.append(f"  A {fmt(r)}")
        lines.append(f"  b {fmt(block.b)}")
        if isinstance(block, SecondOrderCone):
            lines.append(f"  c {fmt(block.c)}")
            lines.append(f"  d {block.d:.17g}")
    for name, bound in (("lower", program.lower), ("upper", program.upper)):
        if bound is not None:
            lines.append(f"{name} {fmt(bound)}")
    return "\n".join(lines) + "\n"
