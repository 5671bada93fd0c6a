"""Deterministic discrete-event simulator of the mobile input-to-display path.

Path designs: ``legacy``, ``presto-jitt``, ``presto-jitt-par``,
``presto-jitt-jep`` and ``vsync-off``. Per-application path binding and
runtime switching live in :mod:`i2dpath.path_manager`.
"""

__version__ = "0.1.0"
