"""Append-only attribution store keyed by (instance id, explainer digest).

One JSON line per attribution; reruns under the same digest are served from
the store without touching the predictor.
"""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path

from .types import Attribution, ExplainerKind


class AttributionStore:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[tuple[str, str], Attribution] = {}
        self._by_id: dict[str, list[Attribution]] = defaultdict(list)
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    obj = json.loads(line)
                    attribution = Attribution(
                        phi0=float(obj["phi0"]),
                        phis=tuple(float(v) for v in obj["phis"]),
                        explainer=ExplainerKind(obj["explainer"]),
                        config_digest=obj["digest"],
                    )
                    self._index(obj["id"], attribution)

    def _index(self, instance_id: str, attribution: Attribution) -> None:
        key = (instance_id, attribution.config_digest)
        if key not in self._entries:
            self._entries[key] = attribution
            self._by_id[instance_id].append(attribution)

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, instance_id: str, digest: str) -> Attribution | None:
        return self._entries.get((instance_id, digest))

    def find(self, instance_id: str, explainer: ExplainerKind) -> Attribution | None:
        """The unique stored attribution of one explainer kind for an instance;
        multiple digests for the same (id, kind) are ambiguous and an error."""
        matches = [a for a in self._by_id.get(instance_id, []) if a.explainer == explainer]
        if len(matches) > 1:
            raise ValueError(
                f"instance {instance_id} has {len(matches)} stored {explainer.value} "
                "attributions; pass an explicit digest"
            )
        return matches[0] if matches else None

    def put(self, instance_id: str, attribution: Attribution) -> None:
        key = (instance_id, attribution.config_digest)
        if key in self._entries:
            return
        self._index(instance_id, attribution)
        record = {
            "id": instance_id,
            "digest": attribution.config_digest,
            "explainer": attribution.explainer.value,
            "phi0": attribution.phi0,
            "phis": list(attribution.phis),
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
