"""Chess engine driven by a learned position-pair comparator.

The package covers the full pipeline: rules and PGN handling, bit-vector
position encoding, outcome-labeled dataset extraction, network training
(autoencoder pretraining, pairwise comparison training, distillation),
cached feature inference, a comparison-based alpha-beta search and a UCI
front end with a match harness.
"""

__version__ = "0.1.0"
