"""voxfuse: speaker re-identification against anonymized speech.

Trains and scores a dual-branch fusion model over precomputed audio and
text embeddings, with confidence-weighted gating, additive-angular-margin
classifier heads, cosine verification scoring, adaptive score
normalization, and equal-error-rate reporting.
"""
__version__ = "0.1.0"
