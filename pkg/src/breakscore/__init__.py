"""breakscore: phrase-break assessment from forced-alignment output.

Pipeline: alignment files -> word/break token sequences -> corruption-based
discriminator pretraining -> overall and per-break scoring heads, with an
against-reference baseline and a cross-validated evaluation harness.
"""

__version__ = "0.1.0"
