"""AIRIS: a desk-scale assistive-vision stack.

The package splits into an edge side (intent routing, dialog state, local
pipelines for faces, barcodes, money counting and notes) and a server side
(an inference gateway with pluggable perception backends), joined by a
length-prefixed JSON wire protocol.
"""

__version__ = "0.1.0"
