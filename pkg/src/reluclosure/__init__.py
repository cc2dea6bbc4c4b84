"""Shallow ReLU networks, generalized responses and their closure."""
