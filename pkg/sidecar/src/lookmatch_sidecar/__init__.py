"""Embedding sidecar: mock or live describe/detect/embed jobs for lookmatch."""

__version__ = "0.1.0"
