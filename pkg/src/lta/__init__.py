"""Latent-space transfer attacks at desk scale: a self-contained VAE-latent
adversarial optimizer with EOT, pixel-space baselines, spectral analysis, and
a transfer-evaluation harness."""

__version__ = "0.1.0"
