"""Benchmarking suite for quantum reinforcement learning on gridworld MDPs."""

__version__ = "0.1.0"
