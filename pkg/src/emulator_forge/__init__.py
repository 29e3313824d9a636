"""A Python package for building and verifying sparse graph emulators.

An emulator of a weighted graph is a second weighted graph on the same
vertices whose distances never undercut the original ones and overshoot
them by a bounded multiplicative and additive stretch.
"""
import logging


__version__ = '0.1.0'

logging.getLogger(__name__).addHandler(logging.NullHandler())
