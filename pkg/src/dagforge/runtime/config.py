from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

MODES = ("prefine", "dynamic", "predict")


@dataclass(frozen=True)
class RunConfig:
    """Everything that parameterizes one execution."""

    workspace: Path
    mode: str = "dynamic"
    tools: frozenset[str] = frozenset()
    seed: int = 0
    intelligence: int = 5
    parallelism: int = 4
    allow_irreversible: bool = False
    http_fixtures: dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "workspace", Path(self.workspace))
        object.__setattr__(self, "tools", frozenset(self.tools))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if not 1 <= self.intelligence <= 10:
            raise ValueError("intelligence must be in 1..10")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")

    def check_workspace(self) -> None:
        if not self.workspace.is_dir():
            raise ValueError(f"workspace {self.workspace} does not exist")
        if not os.access(self.workspace, os.W_OK):
            raise ValueError(f"workspace {self.workspace} is not writable")
