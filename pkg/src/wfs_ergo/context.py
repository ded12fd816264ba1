"""Shared evaluation context: registry, runtime settings, and the hooks the
engine calls out through (procedural evaluation, builtin pseudo-modules,
tracing, tripwire suspension)."""

from __future__ import annotations

from .bounds import RuntimeSettings
from .kb import Registry


class Context:
    def __init__(self, registry=None, settings=None):
        self.registry = registry or Registry()
        self.settings = settings or RuntimeSettings()
        self.builtin_modules = {}
        self.proc_runner = self._no_proc
        self.on_suspend = None
        self.trace_log = None

    def _no_proc(self, engine, lit, resolved, mod):
        raise RuntimeError("no procedural evaluator attached")

    def trace(self, kind, payload):
        if self.trace_log is not None:
            self.trace_log.append((kind, payload))
