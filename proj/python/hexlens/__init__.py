"""Python bindings for the hexlens core library.

Render parameters use the same JSON documents as the HTTP service; the
helpers here accept plain dicts and encode them.
"""

import json as _json

from ._core import (
    CapacityError,
    Mesh,
    MeshParseError,
    ParamsError,
    Scene,
    ball,
    cell_volumes,
    demo_mesh,
    grid,
    importance,
    load_mesh,
    parse_mesh,
    perf_mesh,
    scaled_jacobian,
    sheets,
    twisted_l,
)

__all__ = [
    "CapacityError",
    "Mesh",
    "MeshParseError",
    "ParamsError",
    "Scene",
    "ball",
    "cell_volumes",
    "demo_mesh",
    "grid",
    "importance",
    "load_mesh",
    "parse_mesh",
    "perf_mesh",
    "render",
    "scaled_jacobian",
    "sheets",
    "state",
    "twisted_l",
    "update",
]


def update(scene, delta):
    """Applies a parameter delta (dict) to the scene's view state."""
    scene.apply(_json.dumps(delta))


def state(scene):
    """The scene's full view state as a dict."""
    return _json.loads(scene.state())


def render(scene, delta=None):
    """Applies `delta` if given, renders, and returns (rgba array, stats dict)."""
    if delta:
        update(scene, delta)
    image, stats = scene.render()
    return image, _json.loads(stats)
