"""
Comparison schemes run through the shared pipeline. The decoding layout of
each scheme drives the beamforming program:

* SDMA: no common stream, every other private stream interferes;
* NOMA: per-cluster SIC order by channel norm, bandwidth B/U;
* OMA: no interference, bandwidth B/K.

Power budget and sensing requirement are the same for every scheme.
"""
from dataclasses import replace

from experiments.pipeline import RunOptions, run
from .schemes import SchemeId


def optimize_baseline(scheme, s, seed=0, options=None):
    scheme = SchemeId(scheme)
    if scheme == SchemeId.CORSMA:
        raise ValueError('optimize_baseline runs the comparison schemes only')
    options = options or RunOptions()
    return run(s, replace(options, scheme=scheme.value, seed=seed))
