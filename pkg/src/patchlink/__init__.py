"""Linked-change detection for Gerrit code review.

Given a target change, patchlink selects temporally nearby candidates,
scores each pair with semantic, path-structure, and temporal signals
through a random-forest ensemble, and returns a ranked top-K list of
likely linked changes. Served through a local HTTP API, a CLI, and a
browser-extension frontend.
"""

__version__ = "0.1.0"
