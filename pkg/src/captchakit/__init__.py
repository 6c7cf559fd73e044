"""Synthetic CAPTCHA toolkit: generation, preprocessing, segmentation,
classification (k-NN and from-scratch CNNs) and 2-D embedding.

Everything is deterministic given a seed; see `captchakit.rng`.
"""

__version__ = "0.1.0"
