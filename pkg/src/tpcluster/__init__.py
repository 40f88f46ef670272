"""Transprecision floating-point cluster model.

Subpackages and modules:

- ``tpfloat``: bit-exact binary32 / binary16 / bfloat16 arithmetic
- ``isa``: per-core instruction streams
- ``timing``: cycle-level cluster timing with shared FPUs and banked memory
- ``kernels``: the eight benchmark kernels (scalar and packed 16-bit)
- ``sched``: latency-aware list scheduling
- ``dse``: design-space sweep and metrics
"""

__version__ = "0.1.0"
