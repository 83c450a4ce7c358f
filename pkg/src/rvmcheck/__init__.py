"""Checker for Armv8-A virtual-memory litmus tests.

The package is organised bottom-up:

- ``pagetable``: page-table setup language and concrete translation-table images
- ``walk``: descriptor decoding and (two-stage) translation-table walks
- ``isa``: a small AArch64 subset, decoded and executed per thread
- ``litmus``: the litmus test file format
- ``events``: the event vocabulary shared by the executor and the models
- ``candidates``: candidate-execution enumeration
- ``relations``: a small finite relation algebra
- ``models``: the axiomatic memory models and metatheory helpers
- ``cli``: the ``rvm`` command line tool
"""

__version__ = "0.1.0"
