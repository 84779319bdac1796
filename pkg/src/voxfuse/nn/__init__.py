"""Minimal neural-network toolkit: kernels, layers, optimizer."""
from . import gradcheck, kernels, layers, optim

__all__ = ["gradcheck", "kernels", "layers", "optim"]
