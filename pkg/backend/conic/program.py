"""
Solver-agnostic cone program.

Variables are real vectors or real symmetric matrices; Hermitian blocks are
carried as their real embedding (see ``conic.embedding``). Every expression
is a scalar affine function of the variables, and every constraint places
scalar affine expressions in one of four cones: nonnegative orthant,
second-order cone, exponential cone, or (for a whole matrix variable) the
PSD cone. The objective is always maximized.
"""
from dataclasses import dataclass, field

import numpy as np


VECTOR = 'vector'
SYMMETRIC = 'symmetric'


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str
    size: int

    @property
    def shape(self):
        return (self.size,) if self.kind == VECTOR else (self.size, self.size)

    def __getitem__(self, index):
        """Affine expression picking one scalar entry."""
        coef = np.zeros(self.shape)
        coef[index] = 1.0
        return Affine({self.name: coef})


class Affine:
    """constant + sum_v <coef_v, v> (elementwise inner product)."""

    __slots__ = ('terms', 'constant')
    # numpy scalars defer to __rmul__ / __radd__ instead of broadcasting
    __array_ufunc__ = None

    def __init__(self, terms=None, constant=0.0):
        self.terms = {name: np.asarray(coef, dtype=float) for name, coef in (terms or {}).items()}
        self.constant = float(constant)

    @classmethod
    def const(cls, value):
        return cls({}, value)

    @classmethod
    def inner(cls, variable, coef):
        coef = np.asarray(coef, dtype=float)
        if coef.shape != variable.shape:
            raise ValueError(f'coefficient shape {coef.shape} does not match {variable.name}{variable.shape}')
        return cls({variable.name: coef})

    def _combine(self, other, sign):
        if not isinstance(other, Affine):
            other = Affine.const(other)
        terms = {name: coef.copy() for name, coef in self.terms.items()}
        for name, coef in other.terms.items():
            if name in terms:
                terms[name] = terms[name] + sign * coef
            else:
                terms[name] = sign * coef
        return Affine(terms, self.constant + sign * other.constant)

    def __add__(self, other):
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self)._combine(other, 1.0)

    def __neg__(self):
        return self * -1.0

    def __mul__(self, scalar):
        scalar = float(scalar)
        return Affine({name: coef * scalar for name, coef in self.terms.items()}, self.constant * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def value(self, values):
        total = self.constant
        for name, coef in self.terms.items():
            total += float(np.sum(coef * values[name]))
        return total

    def magnitude(self, values):
        """Largest absolute term, used to scale residuals."""
        parts = [abs(self.constant)]
        parts.extend(abs(float(np.sum(coef * values[name]))) for name, coef in self.terms.items())
        return max(parts)


def affine_sum(expressions):
    total = Affine()
    for expr in expressions:
        total = total + expr
    return total


@dataclass
class NonNeg:
    expr: Affine
    family: str = ''


@dataclass
class SecondOrder:
    """||x||_2 <= t."""
    t: Affine
    x: list
    family: str = ''


@dataclass
class Exponential:
    """y * exp(x / y) <= z with y > 0."""
    x: Affine
    y: Affine
    z: Affine
    family: str = ''


@dataclass
class PSD:
    variable: str
    family: str = ''


@dataclass
class ConicProgram:
    variables: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    objective: Affine = field(default_factory=Affine)
    label: str = ''

    def vector(self, name, size=1):
        return self._declare(Variable(name, VECTOR, int(size)))

    def scalar(self, name):
        return self.vector(name, 1)[0]

    def symmetric(self, name, size, psd=True, family='psd'):
        variable = self._declare(Variable(name, SYMMETRIC, int(size)))
        if psd:
            self.constraints.append(PSD(name, family))
        return variable

    def _declare(self, variable):
        if variable.name in self.variables:
            raise ValueError(f'variable {variable.name} declared twice')
        self.variables[variable.name] = variable
        return variable

    def add(self, constraint):
        self.constraints.append(constraint)
        return constraint

    def nonneg(self, expr, family=''):
        return self.add(NonNeg(expr, family))

    def leq(self, lhs, rhs, family=''):
        return self.nonneg(_as_affine(rhs) - lhs, family)

    def geq(self, lhs, rhs, family=''):
        return self.nonneg(_as_affine(lhs) - rhs, family)

    def soc(self, t, x, family=''):
        return self.add(SecondOrder(_as_affine(t), [_as_affine(e) for e in x], family))

    def exp_leq(self, x, z, family=''):
        """exp(x) <= z."""
        return self.add(Exponential(_as_affine(x), Affine.const(1.0), _as_affine(z), family))

    def maximize(self, expr):
        self.objective = _as_affine(expr)

    def families(self):
        return sorted({c.family for c in self.constraints if c.family})

    def without_family(self, family):
        """Copy of the program with one constraint family removed."""
        return ConicProgram(
            variables=dict(self.variables),
            constraints=[c for c in self.constraints if c.family != family],
            objective=self.objective,
            label=f'{self.label} - {family}',
        )

    def check(self):
        """Raise ValueError on references to undeclared variables or shape mismatches."""
        for expr in self._expressions():
            for name, coef in expr.terms.items():
                if name not in self.variables:
                    raise ValueError(f'expression references undeclared variable {name}')
                if coef.shape != self.variables[name].shape:
                    raise ValueError(f'coefficient for {name} has shape {coef.shape}')
        for constraint in self.constraints:
            if isinstance(constraint, PSD):
                variable = self.variables.get(constraint.variable)
                if variable is None or variable.kind != SYMMETRIC:
                    raise ValueError(f'PSD constraint on non-matrix {constraint.variable}')

    def _expressions(self):
        yield self.objective
        for constraint in self.constraints:
            if isinstance(constraint, NonNeg):
                yield constraint.expr
            elif isinstance(constraint, SecondOrder):
                yield constraint.t
                yield from constraint.x
            elif isinstance(constraint, Exponential):
                yield constraint.x
                yield constraint.y
                yield constraint.z


def _as_affine(value):
    return value if isinstance(value, Affine) else Affine.const(value)


def rotated_soc(program, u, v, x, family=''):
    """||x||^2 <= u * v with u, v >= 0, posed as ||(2x, u - v)|| <= u + v."""
    x = [_as_affine(e) for e in x]
    return program.soc(_as_affine(u) + v, [2.0 * e for e in x] + [_as_affine(u) - v], family)
