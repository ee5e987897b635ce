import importlib
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Union

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelSpec:
    """
    :param id:              tag used by experiment configs
    :param entry_point:     "module:attribute" string or a callable building the model
    :param kind:            target | cumulant | both
    :param kwargs:          default keyword arguments merged under the caller's
    """

    id: str
    entry_point: Union[str, Callable[..., Any]]
    kind: str = "target"
    kwargs: Dict[str, Any] = field(default_factory=dict)

    def load(self) -> Callable[..., Any]:
        if callable(self.entry_point):
            return self.entry_point
        module_name, _, attr = self.entry_point.partition(":")
        return getattr(importlib.import_module(module_name), attr)

    def make(self, **kwargs) -> Any:
        merged = dict(self.kwargs)
        merged.update(kwargs)
        return self.load()(**merged)


registry: Dict[str, ModelSpec] = {}


def register(id: str, entry_point, kind: str = "target", **kwargs) -> None:
    if id in registry:
        raise ValueError(f"model {id!r} is already registered")
    if kind not in ("target", "cumulant", "both"):
        raise ValueError(f"unknown model kind {kind!r}")
    registry[id] = ModelSpec(id, entry_point, kind, kwargs)


def spec(id: str) -> ModelSpec:
    try:
        return registry[id]
    except KeyError:
        raise KeyError(
            f"no model registered as {id!r}; known: {', '.join(sorted(registry))}"
        ) from None


def make(id: str, **kwargs) -> Any:
    logger.debug("building model %s with %s", id, sorted(kwargs))
    return spec(id).make(**kwargs)
