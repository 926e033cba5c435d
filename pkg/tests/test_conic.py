import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fblris import conic
from fblris.conic import (
    ExpCone,
    LinearEq,
    LinearIneq,
    ProgramBuilder,
    SecondOrderCone,
    Status,
    complex_rows,
    dump_program,
    lift,
    log_rate_epigraph,
    solve,
    unlift,
)


def test_lp_lower_bound():
    b = ProgramBuilder()
    x = b.add_real("x", 1)
    b.add_objective(b.row({x.index(0): 1.0}))
    b.add(LinearIneq(b.row({x.index(0): -1.0})[None, :], np.array([-3.0])))
    sol = solve(b.build())
    assert sol.status is Status.OPTIMAL
    assert sol.primal[0] == pytest.approx(3.0, abs=1e-7)
    assert sol.objective_value == pytest.approx(3.0, abs=1e-7)


def test_soc_geometry():
    b = ProgramBuilder()
    v = b.add_real("v", 3)  # x, y, t
    x, y, t = v.indices
    b.add_objective(b.row({t: -1.0}))
    A = np.zeros((2, 3))
    A[0, x] = A[1, y] = 1.0
    b.add(SecondOrderCone(A, np.zeros(2), np.zeros(3), 1.0))
    b.add(LinearIneq(b.row({t: 1.0, x: -1.0, y: -1.0})[None, :], np.zeros(1)))
    sol = solve(b.build())
    assert sol.primal[t] == pytest.approx(math.sqrt(2.0), abs=1e-7)


def test_exp_cone_identity():
    b = ProgramBuilder()
    t = b.add_real("t", 1).index(0)
    b.add_objective(b.row({t: -1.0}))
    A = np.zeros((3, 1))
    A[0, 0] = 1.0
    b.add(ExpCone(A, np.array([0.0, 1.0, math.e])))
    sol = solve(b.build())
    assert sol.primal[t] == pytest.approx(1.0, abs=1e-7)


def test_equality_block():
    b = ProgramBuilder()
    v = b.add_real("v", 2)
    b.add_objective(b.row({0: 1.0, 1: 2.0}))
    b.add(LinearEq(np.array([[1.0, 1.0]]), np.array([1.0])))
    b.add(LinearIneq(-np.eye(2), np.zeros(2)))
    sol = solve(b.build())
    assert np.allclose(sol.primal, [1.0, 0.0], atol=1e-7)


def test_infeasible_and_unbounded_are_distinct():
    b = ProgramBuilder()
    x = b.add_real("x", 1).index(0)
    b.add_objective(b.row({x: 1.0}))
    b.add(LinearIneq(np.array([[1.0], [-1.0]]), np.array([0.0, -1.0])))  # x <= 0 and x >= 1
    sol = solve(b.build())
    assert sol.status is Status.INFEASIBLE and sol.primal is None

    b = ProgramBuilder()
    x = b.add_real("x", 1).index(0)
    b.add_objective(b.row({x: 1.0}))
    b.add(LinearIneq(np.array([[1.0]]), np.array([0.0])))
    sol = solve(b.build())
    assert sol.status is Status.UNBOUNDED and sol.primal is None


def test_tolerance_range():
    b = ProgramBuilder()
    b.add_real("x", 1)
    with pytest.raises(ValueError):
        solve(b.build(), tol=1e-3)


def epigraph_max_rate(q, u, bandwidth, coef):
    b = ProgramBuilder()
    v = b.add_real("v", 3)
    qi, ri, ui = v.indices
    log_rate_epigraph(b, qi, ri, ui, bandwidth, coef)
    b.add(LinearEq(np.vstack([b.row({qi: 1.0}), b.row({ui: 1.0})]), np.array([q, u])))
    b.add_objective(b.row({ri: -1.0}))
    sol = solve(b.build())
    assert sol.ok
    return sol.primal[ri]


def test_log_rate_epigraph_examples():
    assert epigraph_max_rate(1.0, 0.0, 1.0, 0.0) == pytest.approx(1.0, abs=1e-7)
    assert epigraph_max_rate(0.0, 0.5, 1.0, 0.2) == pytest.approx(-0.1, abs=1e-7)
    assert epigraph_max_rate(3.0, 0.5, 1.0, 0.2) == pytest.approx(1.9, abs=1e-7)


def test_log_rate_epigraph_scaled_q():
    # variable holds q / 4: cone row uses coefficient 4
    b = ProgramBuilder()
    v = b.add_real("v", 3)
    qi, ri, ui = v.indices
    log_rate_epigraph(b, qi, ri, ui, 1.0, 0.0, q_scale=4.0)
    b.add(LinearEq(np.vstack([b.row({qi: 1.0}), b.row({ui: 1.0})]), np.array([0.75, 0.0])))
    b.add_objective(b.row({ri: -1.0}))
    assert solve(b.build()).primal[ri] == pytest.approx(2.0, abs=1e-7)


def test_log_rate_epigraph_rejects_shared_indices():
    b = ProgramBuilder()
    v = b.add_real("v", 2)
    with pytest.raises(ValueError):
        log_rate_epigraph(b, 0, 0, 1, 1.0, 0.0)


@given(st.lists(st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False), min_size=1, max_size=10))
def test_lift_round_trip(values):
    z = np.array(values, dtype=complex)
    x = lift(z)
    assert x.shape == (2 * len(z),)
    assert np.array_equal(unlift(x), z)


def test_complex_rows():
    rng = np.random.default_rng(0)
    c = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    re, im = complex_rows(c)
    assert re @ lift(z) == pytest.approx((c @ z).real)
    assert im @ lift(z) == pytest.approx((c @ z).imag)


def test_variable_map_extract_complex():
    b = ProgramBuilder()
    b.add_real("a", 2)
    zb = b.add_complex("z", 2)
    x = np.arange(6, dtype=float)
    program = b.build()
    assert np.array_equal(program.variables.extract(x, "z"), np.array([2 + 3j, 4 + 5j]))
    assert zb.re_index(1) == 4 and zb.im_index(1) == 5


def random_soc_program(seed):
    rng = np.random.default_rng(seed)
    b = ProgramBuilder()
    v = b.add_real("v", 4)
    b.add_objective(rng.standard_normal(4))
    b.add(SecondOrderCone(rng.standard_normal((3, 4)), rng.standard_normal(3), np.zeros(4), 2.0))
    b.add(LinearIneq(np.vstack([np.eye(4), -np.eye(4)]), np.full(8, 5.0)))
    return b.build()


def test_deterministic_and_rechecked():
    p = random_soc_program(3)
    a, b = solve(p), solve(p)
    assert a.ok
    assert np.array_equal(a.primal, b.primal)
    assert p.max_residual(a.primal) <= conic.FEASIBILITY_SLACK * conic.DEFAULT_TOL


def test_validate_catches_bad_width():
    p = random_soc_program(0)
    p.blocks.append(LinearIneq(np.ones((1, 7)), np.zeros(1)))
    with pytest.raises(ValueError):
        p.validate()


def test_exp_residual():
    blk = ExpCone(np.eye(3), np.zeros(3))
    assert blk.residual(np.array([0.0, 1.0, 1.0])) == 0.0
    assert blk.residual(np.array([1.0, 1.0, 1.0])) == pytest.approx(1.0)
    assert blk.residual(np.array([-1.0, 0.0, 0.5])) == 0.0


def test_dump_is_text():
    text = dump_program(random_soc_program(1))
    assert text.startswith("conic-program vars=4")
    assert "SecondOrderCone" in text
