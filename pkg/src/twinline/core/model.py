"""Thing model: shapes declare capabilities, templates compose shapes,
things are the live instances bound to gateway tags.

Composition is strict: two shapes contributing the same property name reject
the template (no shadowing). Bound properties change only through telemetry;
the API layer reads snapshots and never writes them.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ..plc.tags import TagType


class UnknownTemplate(KeyError):
    pass


class DuplicateThingId(ValueError):
    pass


class UnboundTag(KeyError):
    pass


@dataclass(frozen=True)
class PropertyDecl:
    name: str
    vtype: TagType
    writable: bool = False


@dataclass(frozen=True)
class EventDecl:
    name: str
    property: str
    edge: str  # "rising" | "falling"
    payload_fields: tuple[str, ...] = ("thing_id", "property", "value", "ts")


@dataclass(frozen=True)
class ServiceDecl:
    name: str
    params: tuple[str, ...] = ()
    result: str = "none"


@dataclass
class ThingShape:
    name: str
    properties: list[PropertyDecl] = field(default_factory=list)
    events: list[EventDecl] = field(default_factory=list)
    services: list[ServiceDecl] = field(default_factory=list)

    def __post_init__(self):
        names = [p.name for p in self.properties] + [e.name for e in self.events] + [
            s.name for s in self.services
        ]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate declaration names in shape {self.name!r}")
        props = {p.name for p in self.properties}
        for e in self.events:
            if e.property not in props:
                raise ValueError(f"event {e.name!r} triggers on undeclared property")


@dataclass
class ThingTemplate:
    name: str
    shapes: list[ThingShape] = field(default_factory=list)
    own_properties: list[PropertyDecl] = field(default_factory=list)
    own_events: list[EventDecl] = field(default_factory=list)
    defaults: dict[str, object] = field(default_factory=dict)

    def all_properties(self) -> dict[str, PropertyDecl]:
        merged: dict[str, PropertyDecl] = {}
        for shape in self.shapes:
            for p in shape.properties:
                if p.name in merged:
                    raise ValueError(
                        f"template {self.name!r}: property {p.name!r} collides "
                        f"across composed shapes"
                    )
                merged[p.name] = p
        for p in self.own_properties:
            if p.name in merged:
                raise ValueError(
                    f"template {self.name!r}: property {p.name!r} collides "
                    f"across composed shapes"
                )
            merged[p.name] = p
        return merged

    def all_events(self) -> list[EventDecl]:
        out = []
        for shape in self.shapes:
            out.extend(shape.events)
        out.extend(self.own_events)
        return out


@dataclass
class PropertyValue:
    vtype: TagType
    value: object
    timestamp: int = 0  # source milliseconds
    quality: str = "Good"


@dataclass
class ThingEvent:
    name: str
    thing_id: str
    property: str
    value: object
    ts: int

    def to_dict(self) -> dict:
        return {
            "event": self.name,
            "thing_id": self.thing_id,
            "property": self.property,
            "value": self.value,
            "ts": self.ts,
        }


EVENT_LOG_SIZE = 4096


class Thing:
    def __init__(self, thing_id: str, template: ThingTemplate, bindings: dict[str, str]):
        self.thing_id = thing_id
        self.template = template
        decls = template.all_properties()
        self.declarations = decls
        self.properties: dict[str, PropertyValue] = {}
        for name, decl in decls.items():
            self.properties[name] = PropertyValue(
                decl.vtype, template.defaults.get(name, _default_for(decl.vtype))
            )
        self.bindings = dict(bindings)  # property -> DT/<tag>
        self.events = template.all_events()
        self.event_log: deque[ThingEvent] = deque(maxlen=EVENT_LOG_SIZE)

    def apply_bound_update(self, prop: str, value, ts: int) -> list[ThingEvent]:
        """Telemetry path: set a bound property, fire edge events once per edge."""
        current = self.properties[prop]
        old = current.value
        current.value = value
        current.timestamp = ts
        current.quality = "Good"
        fired = []
        if isinstance(value, bool) and isinstance(old, bool) and old != value:
            for decl in self.events:
                if decl.property != prop:
                    continue
                if (decl.edge == "rising" and value) or (decl.edge == "falling" and not value):
                    event = ThingEvent(decl.name, self.thing_id, prop, value, ts)
                    self.event_log.append(event)
                    fired.append(event)
        return fired

    def mark_stale(self):
        for pv in self.properties.values():
            pv.quality = "Stale"

    def snapshot(self) -> dict:
        return {
            "thing_id": self.thing_id,
            "template": self.template.name,
            "properties": {
                name: {
                    "value": pv.value,
                    "type": pv.vtype.value,
                    "ts": pv.timestamp,
                    "quality": pv.quality,
                }
                for name, pv in sorted(self.properties.items())
            },
            "bindings": dict(sorted(self.bindings.items())),
            "events": [e.to_dict() for e in list(self.event_log)[-32:]],
        }


def _default_for(vtype: TagType):
    return {
        TagType.BOOL: False,
        TagType.INT32: 0,
        TagType.FLOAT64: 0.0,
        TagType.STRING: "",
    }[vtype]


class ThingRegistry:
    def __init__(self, known_tags: set[str] | None = None):
        self.templates: dict[str, ThingTemplate] = {}
        self.things: dict[str, Thing] = {}
        self.known_tags = known_tags
        self._by_tag: dict[str, list[tuple[Thing, str]]] = {}

    def register_template(self, template: ThingTemplate):
        template.all_properties()  # raises on shape collisions
        self.templates[template.name] = template

    def instantiate(self, template_name: str, thing_id: str, bindings: dict[str, str]) -> Thing:
        if template_name not in self.templates:
            raise UnknownTemplate(template_name)
        if thing_id in self.things:
            raise DuplicateThingId(thing_id)
        template = self.templates[template_name]
        decls = template.all_properties()
        for prop, tag in bindings.items():
            if prop not in decls:
                raise UnboundTag(f"{thing_id}: binding for undeclared property {prop!r}")
            if self.known_tags is not None and tag not in self.known_tags:
                raise UnboundTag(f"{thing_id}: tag {tag!r} is not mapped")
        thing = Thing(thing_id, template, bindings)
        self.things[thing_id] = thing
        for prop, tag in bindings.items():
            self._by_tag.setdefault(tag, []).append((thing, prop))
        return thing

    def bound_tags(self) -> list[str]:
        return sorted(self._by_tag)

    def lookup_tag(self, tag: str) -> list[tuple[Thing, str]]:
        return self._by_tag.get(tag, [])
