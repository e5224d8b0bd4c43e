"""Event-camera simulator: Python bindings over the C++ core."""

import json

from . import _evsim
from ._evsim import (
    ConnectivityError,
    DiscoveryDaemon,
    DomainError,
    Error,
    EventSimulator,
    FramingError,
    IntegrationError,
    ProtocolError,
    Schema,
    SchemaError,
    SerializationError,
    TypeMismatchError,
    ValidationError,
    accumulate_events,
    canonical_sort,
    depth_objective,
    depth_objective_gradient,
    event_dtype,
    fnv1a64,
    frame_decode,
    frame_encode,
    gradient_regularizer,
    hover_thrust,
    look_at,
    normalize_disparity,
    silog_loss,
    wire_schemas,
)

__version__ = "0.1.0"


def default_config():
    return json.loads(_evsim.default_config_json())


def default_scene():
    return json.loads(_evsim.default_scene_json())


def render(position, orientation, fx, fy, cx, cy, width, height, scene=None):
    """Returns (intensity, depth) as float32 arrays of shape (height, width)."""
    scene_json = "" if scene is None else json.dumps(scene)
    return _evsim.render(scene_json, position, orientation, fx, fy, cx, cy, width, height)


class Simulator(_evsim.Simulator):
    def __init__(self, config=None):
        super().__init__("" if config is None else json.dumps(config))

    @property
    def config(self):
        return json.loads(self.config_json)
