"""Signatures and effect classes of the built-in tools callable as ``tool.<name>(...)``."""

from __future__ import annotations

from .graph.model import EffectClass

TOOL_SIGNATURES: dict[str, tuple[tuple[str, ...], str]] = {
    "fs.read": (("str",), "str"),
    "fs.write": (("str", "str"), "bool"),
    "http.get": (("str",), "str"),
}

TOOL_EFFECTS: dict[str, EffectClass] = {
    "fs.read": EffectClass.FS_READ,
    "fs.write": EffectClass.FS_WRITE,
    "http.get": EffectClass.NETWORK,
}


def tool_group(name: str) -> str:
    return name.split(".", 1)[0]


def is_whitelisted(name: str, whitelist) -> bool:
    """A tool is allowed if its full name or its group (``fs`` for ``fs.write``) is listed."""
    return name in whitelist or tool_group(name) in whitelist
