"""
Plain-text dump of a ConicProgram, one statement per line.

Grammar::

    program    := header var* objective constraint*
    header     := "# program" LABEL
    var        := "var" NAME ("vector" | "symmetric") SIZE
    objective  := "maximize" affine
    constraint := "nonneg" FAMILY affine
                | "soc" FAMILY affine "|" affine ("," affine)*
                | "exp" FAMILY affine ";" affine ";" affine
                | "psd" FAMILY NAME
    affine     := NUMBER ( ("+" | "-") NUMBER "*" NAME "[" INDEX "]" )*

FAMILY is written in brackets (``[]`` when empty). Zero coefficients are
omitted; numbers use repr-precision floats.
"""
import numpy as np

from .program import NonNeg, SecondOrder, Exponential, PSD


def format_affine(expr):
    pieces = [repr(float(expr.constant))]
    for name, coef in sorted(expr.terms.items()):
        for index in zip(*np.nonzero(coef)):
            value = float(coef[index])
            sign = '-' if value < 0 else '+'
            position = ','.join(str(int(i)) for i in index)
            pieces.append(f'{sign} {abs(value)!r}*{name}[{position}]')
    return ' '.join(pieces)


def dump_program(program):
    lines = [f'# program {program.label or "-"}']
    for variable in program.variables.values():
        lines.append(f'var {variable.name} {variable.kind} {variable.size}')
    lines.append(f'maximize {format_affine(program.objective)}')
    for constraint in program.constraints:
        family = f'[{constraint.family}]'
        if isinstance(constraint, NonNeg):
            lines.append(f'nonneg {family} {format_affine(constraint.expr)}')
        elif isinstance(constraint, SecondOrder):
            body = ', '.join(format_affine(e) for e in constraint.x)
            lines.append(f'soc {family} {format_affine(constraint.t)} | {body}')
        elif isinstance(constraint, Exponential):
            parts = '; '.join(format_affine(e) for e in (constraint.x, constraint.y, constraint.z))
            lines.append(f'exp {family} {parts}')
        elif isinstance(constraint, PSD):
            lines.append(f'psd {family} {constraint.variable}')
    return '\n'.join(lines) + '\n'


def write_program(program, path):
    with open(path, 'w') as handle:
        handle.write(dump_program(program))
    return path
