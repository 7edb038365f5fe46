"""
Tests for the cone program, the Hermitian embedding and the cvxpy backend
"""
import numpy as np
import pytest

from .dump import dump_program, format_affine, write_program
from .embedding import (
    block_trace_coefficient, hermitian_coefficient, hermitian_to_real_embedding, real_to_hermitian,
    trace_coefficient,
)
from .program import Affine, ConicProgram, NonNeg, PSD, affine_sum, rotated_soc
from .solver import OPTIMAL, primal_residual, solve, solver_options


def eigen_program(C, hermitian=False):
    """max tr(C M) over tr(M) = 1, M PSD: the largest eigenvalue of C."""
    program = ConicProgram(label='eig')
    n = C.shape[0]
    if hermitian:
        Y = program.symmetric('Y', 2 * n)
        objective, trace = hermitian_coefficient(C), trace_coefficient(n)
    else:
        Y = program.symmetric('Y', n)
        objective, trace = C, np.eye(n)
    program.leq(Affine.inner(Y, trace), 1.0, family='trace')
    program.geq(Affine.inner(Y, trace), 1.0, family='trace')
    program.maximize(Affine.inner(Y, objective))
    return program


class TestAffine:
    """Affine expression arithmetic"""

    @pytest.fixture(autouse=True)
    def setup(self):
        self.program = ConicProgram()
        self.x = self.program.vector('x', 2)

    def test_arithmetic(self):
        expr = 2 * self.x[0] - self.x[1] / 4 + 3
        assert expr.value({'x': np.array([1.0, 8.0])}) == pytest.approx(3.0)
        assert (1 - expr).value({'x': np.zeros(2)}) == pytest.approx(-2.0)

    def test_numpy_scalars_stay_affine(self):
        expr = np.float64(2.0) * self.x[0]
        assert isinstance(expr, Affine)
        assert isinstance(self.x[0] + np.float64(1.0), Affine)

    def test_affine_sum(self):
        total = affine_sum([self.x[0], self.x[1], 1.0])
        assert total.value({'x': np.array([2.0, 3.0])}) == pytest.approx(6.0)

    def test_inner_checks_shape(self):
        with pytest.raises(ValueError):
            Affine.inner(self.x, np.ones(3))


class TestProgramStructure:
    """Families, copies and structural checks"""

    @pytest.fixture(autouse=True)
    def setup(self):
        self.program = ConicProgram(label='structure')
        self.x = self.program.vector('x', 2)
        self.program.leq(self.x[0], 1.0, family='box')
        self.program.geq(self.x[1], 0.0, family='sign')
        self.program.maximize(self.x[0] + self.x[1])

    def test_families(self):
        assert self.program.families() == ['box', 'sign']

    def test_without_family(self):
        reduced = self.program.without_family('box')
        assert reduced.families() == ['sign']
        assert len(self.program.constraints) == 2

    def test_duplicate_variable(self):
        with pytest.raises(ValueError):
            self.program.vector('x')

    def test_check_undeclared_variable(self):
        other = ConicProgram().vector('z', 2)
        self.program.leq(other[0], 1.0)
        with pytest.raises(ValueError):
            self.program.check()

    def test_check_psd_on_vector(self):
        self.program.add(PSD('x'))
        with pytest.raises(ValueError):
            self.program.check()

    def test_leq_is_nonneg_difference(self):
        constraint = self.program.constraints[0]
        assert isinstance(constraint, NonNeg)
        assert constraint.expr.value({'x': np.array([0.25, 0.0])}) == pytest.approx(0.75)


class TestEmbedding:
    """Hermitian to real symmetric embedding"""

    def test_eigenvalues_are_doubled(self):
        M = np.array([[1.0, 1j], [-1j, 1.0]])
        eigenvalues = np.linalg.eigvalsh(hermitian_to_real_embedding(M))
        np.testing.assert_allclose(eigenvalues, [0.0, 0.0, 2.0, 2.0], atol=1e-12)

    def test_inverse_and_trace_pairing(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        M = A @ A.conj().T
        C = A + A.conj().T
        Y = hermitian_to_real_embedding(M)
        np.testing.assert_allclose(real_to_hermitian(Y), M, atol=1e-12)
        assert np.sum(hermitian_coefficient(C) * Y) == pytest.approx(np.trace(C @ M).real)
        assert np.sum(trace_coefficient(3) * Y) == pytest.approx(np.trace(M).real)

    def test_block_trace(self):
        M = np.diag([1.0, 2.0, 3.0, 4.0]).astype(complex)
        Y = hermitian_to_real_embedding(M)
        assert np.sum(block_trace_coefficient(2, 2, 1) * Y) == pytest.approx(7.0)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            hermitian_to_real_embedding(np.array([[1.0, 2.0], [0.0, 1.0]]))
        with pytest.raises(ValueError):
            hermitian_to_real_embedding(np.ones((2, 3)))


class TestSolver:
    """Small programs with known optima"""

    def test_gap_tolerance_from_settings(self, settings):
        settings.CORSMA = {**settings.CORSMA, 'GAP_TOL': 1e-5}
        assert solver_options('CLARABEL') == {'tol_gap_abs': 1e-5, 'tol_gap_rel': 1e-5}
        assert solver_options('SCS')['eps_rel'] == 1e-5
        assert solver_options('ECOS') == {}

    def test_linear_program(self):
        program = ConicProgram(label='lp')
        x = program.scalar('x')
        program.leq(x, 3.0)
        program.geq(x, 0.0)
        program.maximize(x)
        solution = solve(program)
        assert solution.status == OPTIMAL
        assert solution.objective == pytest.approx(3.0, abs=1e-6)
        assert solution.value(x) == pytest.approx(3.0, abs=1e-6)

    def test_largest_eigenvalue(self):
        solution = solve(eigen_program(np.diag([2.0, 1.0])))
        assert solution.objective == pytest.approx(2.0, abs=1e-6)

    def test_largest_eigenvalue_of_hermitian(self):
        C = np.array([[1.0, 1j], [-1j, 1.0]])
        solution = solve(eigen_program(C, hermitian=True))
        assert solution.objective == pytest.approx(2.0, abs=1e-6)
        M = real_to_hermitian(solution['Y'])
        assert np.trace(M).real == pytest.approx(1.0, abs=1e-6)
        assert np.linalg.eigvalsh(M)[0] >= -1e-6

    def test_exponential_cone(self):
        program = ConicProgram(label='exp')
        x = program.scalar('x')
        program.exp_leq(x, 5.0)
        program.maximize(x)
        solution = solve(program)
        assert solution.objective == pytest.approx(np.log(5.0), abs=1e-6)

    def test_rotated_cone(self):
        program = ConicProgram(label='rsoc')
        x = program.scalar('x')
        rotated_soc(program, 2.0, 8.0, [x])
        program.maximize(x)
        assert solve(program).objective == pytest.approx(4.0, abs=1e-6)

    def test_infeasible(self):
        program = ConicProgram(label='empty')
        x = program.scalar('x')
        program.leq(x, -1.0)
        program.geq(x, 1.0)
        program.maximize(x)
        solution = solve(program)
        assert solution.status != OPTIMAL
        assert not solution.has_primal

    def test_primal_residual(self):
        program = ConicProgram()
        x = program.scalar('x')
        program.leq(x, 1.0)
        program.exp_leq(x, 5.0)
        assert primal_residual(program, {'x': np.array([1.0])}) == 0.0
        assert primal_residual(program, {'x': np.array([2.0])}) > 0.0


class TestDump:
    """Plain-text program dump"""

    @pytest.fixture(autouse=True)
    def setup(self):
        program = ConicProgram(label='demo')
        x = program.vector('x', 2)
        program.symmetric('Y', 2)
        program.leq(x[0], 1.0, family='box')
        program.soc(1.0, [x[0], x[1]], family='ball')
        program.exp_leq(x[1], 2.0)
        program.maximize(x[0] - 0.5 * x[1])
        self.program = program

    def test_lines(self):
        lines = dump_program(self.program).splitlines()
        assert lines[0] == '# program demo'
        assert lines[1] == 'var x vector 2'
        assert lines[2] == 'var Y symmetric 2'
        assert lines[3] == 'maximize 0.0 + 1.0*x[0] - 0.5*x[1]'
        assert lines[4] == 'psd [psd] Y'
        assert lines[5] == 'nonneg [box] 1.0 - 1.0*x[0]'
        assert lines[6] == 'soc [ball] 1.0 | 0.0 + 1.0*x[0], 0.0 + 1.0*x[1]'
        assert lines[7] == 'exp [] 0.0 + 1.0*x[1]; 1.0; 2.0'

    def test_zero_terms_omitted(self):
        x = self.program.variables['x']
        assert format_affine(x[0] - x[0] + 2.0) == '2.0'

    def test_write(self, tmp_path):
        path = write_program(self.program, tmp_path / 'program.txt')
        assert path.read_text() == dump_program(self.program)
