"""Implementation adapters: the bridge between typed tests and real
(or scripted) protocol implementations.

Every adapter carries an id and the setup/execute/teardown/translate
contract used by the differential harness.  Stateful adapters additionally
expose send/translate_input/reset so the state driver can replay BFS
prefixes.  Adapters are built from a JSON config file mapping ids to
registered kinds.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Dict, List

from ..difftest import DiffTestError, NormalizedResponse


class ImplementationAdapter:
    """Behavioral contract; subclasses override what they need."""

    id: str = "adapter"

    def setup(self, fixture=None) -> None:
        pass

    def execute(self, test) -> NormalizedResponse:
        raise NotImplementedError

    def teardown(self) -> None:
        pass

    def translate(self, test):
        """The implementation-native stimulus for a test (diagnostic aid)."""
        return test


AdapterFactory = Callable[[dict], ImplementationAdapter]
_REGISTRY: Dict[str, AdapterFactory] = {}


def register_adapter(kind: str, factory: AdapterFactory) -> None:
    _REGISTRY[kind] = factory


def adapter_kinds() -> List[str]:
    return sorted(_REGISTRY)


def build_adapter(entry: dict) -> ImplementationAdapter:
    if "kind" not in entry:
        raise DiffTestError(f"adapter entry needs a kind: {entry!r}")
    kind = entry["kind"]
    factory = _REGISTRY.get(kind)
    if factory is None:
        raise DiffTestError(f"unknown adapter kind {kind!r}; known: {adapter_kinds()}")
    return factory(entry)


def load_adapters(config_path: Path) -> List[ImplementationAdapter]:
    """Adapters from a JSON config: {"adapters": [{"id":..., "kind":..., ...}]}."""
    path = Path(config_path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DiffTestError(f"cannot read adapter config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise DiffTestError(f"adapter config {path} is not valid JSON: {e}") from e
    entries = doc.get("adapters")
    if not isinstance(entries, list) or not entries:
        raise DiffTestError(f"adapter config {path} declares no adapters")
    adapters = [build_adapter(e) for e in entries]
    ids = [a.id for a in adapters]
    if len(set(ids)) != len(ids):
        raise DiffTestError(f"duplicate adapter ids in {path}: {ids}")
    return adapters


from . import dns_toy, dns_udp, smtp_tcp  # noqa: E402,F401  (kind registration)
