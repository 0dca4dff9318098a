"""
Run manifests: everything that determines an output set, hashed.
"""

import hashlib
import json
from importlib import metadata
from pathlib import Path
from typing import Dict, Union

from pydantic import BaseModel, Field

from ..config import LabConfig

PACKAGE = "sokoban-planning-lab"
MANIFEST_FILE = "manifest.json"


def package_version() -> str:
    try:
        return metadata.version(PACKAGE)
    except metadata.PackageNotFoundError:
        return "0+unknown"


class RunManifest(BaseModel):
    """Config, seed and level-set identifier behind one output set."""

    command: str
    config: LabConfig
    level_set: str = Field(..., description="Level file, directory or 'suite'")
    versions: Dict[str, str] = Field(default_factory=lambda: {PACKAGE: package_version()})

    @property
    def seed(self) -> int:
        return self.config.seed

    def canonical(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        """SHA-256 over the canonical JSON rendering."""
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def write(self, out_dir: Union[str, Path]) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / MANIFEST_FILE
        record = json.loads(self.canonical())
        record["hash"] = self.hash()
        path.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return path
