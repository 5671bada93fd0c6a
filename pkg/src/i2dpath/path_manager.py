"""Path registry, per-app bindings and asynchronous path switching."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from .pipeline import SwitchTicket


class PathError(ValueError):
    pass


class PathRegistry:
    """Name -> design factory. Unknown names resolve to the default."""

    def __init__(self, default: Optional[str] = None):
        self._factories: dict = {}
        self.default = default

    def register_path(self, name: str, factory: Callable) -> None:
        if name in self._factories:
            raise PathError(f"path {name!r} already registered")
        self._factories[name] = factory

    def unregister(self, name: str) -> None:
        self._factories.pop(name, None)

    def __contains__(self, name) -> bool:
        return name in self._factories

    def names(self) -> list:
        return sorted(self._factories)

    def resolve(self, name: Optional[str]) -> str:
        if name in self._factories:
            return name
        if self.default in self._factories:
            return self.default
        raise PathError(f"path {name!r} is not registered and no default path is available")

    def create(self, name: str, app_id: str):
        name = self.resolve(name)
        return self._factories[name](app_id)


@dataclass
class PathBinding:
    app_id: str
    current_path: str
    pending_path: Optional[str] = None
    t_requested: Optional[int] = None
    t_completed: Optional[int] = None
    queue: deque = field(default_factory=deque)


class PathManager:
    def __init__(self, registry: PathRegistry):
        self.registry = registry
        self.bindings: dict = {}
        self.pipelines: dict = {}
        self.tickets: list = []

    def bind_at_launch(self, app_id: str, preference: Optional[str]) -> PathBinding:
        if app_id in self.bindings:
            raise PathError(f"app {app_id!r} is already bound; use apply_path to switch")
        b = PathBinding(app_id, self.registry.resolve(preference))
        self.bindings[app_id] = b
        return b

    def attach_pipeline(self, app_id: str, pipeline) -> None:
        self.pipelines[app_id] = pipeline
        pipeline.on_switch_complete = self._completed

    def apply_path(self, app_id: str, path_name: str, now: int) -> SwitchTicket:
        if app_id not in self.bindings:
            raise PathError(f"app {app_id!r} is not bound")
        b = self.bindings[app_id]
        to = self.registry.resolve(path_name)
        ticket = SwitchTicket(app_id, b.current_path, to, now)
        self.tickets.append(ticket)
        if b.pending_path is not None:
            b.queue.append(ticket)
        else:
            self._start(b, ticket, now)
        return ticket

    def _start(self, b: PathBinding, ticket: SwitchTicket, now: int) -> None:
        ticket.from_path = b.current_path
        b.pending_path = ticket.to_path
        b.t_requested = ticket.t_requested
        b.t_completed = None
        design = self.registry.create(ticket.to_path, b.app_id)
        self.pipelines[b.app_id].begin_switch(design, ticket, now)

    def _completed(self, ticket: SwitchTicket) -> None:
        b = self.bindings[ticket.app_id]
        b.current_path = ticket.to_path
        b.pending_path = None
        b.t_completed = ticket.t_completed
        if b.queue:
            nxt = b.queue.popleft()
            self._start(b, nxt, ticket.t_completed)

    def switch_table(self) -> list:
        return [{"app": t.app_id, "from": t.from_path, "to": t.to_path,
                 "t_requested": t.t_requested, "t_completed": t.t_completed, "delay": t.delay}
                for t in self.tickets]


def audit_path_integrity(records) -> int:
    """Count events whose delivery path differs from the path at their frame's latch."""
    bad = 0
    for r in records:
        if r.path_tag is None:
            continue
        if r.latch_tag is not None and r.latch_tag != r.path_tag:
            bad += 1
    return bad
