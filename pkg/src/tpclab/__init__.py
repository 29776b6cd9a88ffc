"""Turbo product code decoding lab.

Chase-Pyndiah iterative decoding of two-dimensional product codes built
from extended BCH component codes, with a pluggable candidate-set rollback
layer (oracle, correlation-threshold, MAP-assisted and learned policies),
a Monte-Carlo BER harness and threshold optimization.
"""

__version__ = "0.1.0"
