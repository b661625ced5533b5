import hashlib
import io
from pathlib import Path
from typing import Any

from rest_framework.parsers import JSONParser
from rest_framework.renderers import JSONRenderer


class StructuredTextRenderer(JSONRenderer):
    """
    Renders configs, manifests, checkpoint headers and verification
    reports.  NaN/inf are rejected (``strict``) so every written file
    parses back to the same values.
    """

    strict = True

    def render(self, data, accepted_media_type=None, renderer_context=None):
        return super().render(data, accepted_media_type, renderer_context or {"indent": 2})


_renderer = StructuredTextRenderer()
_parser = JSONParser()


def render_document(data: Any) -> bytes:
    """Indented document followed by a newline."""
    return _renderer.render(data, renderer_context={"indent": 2}) + b"\n"


def render_line(data: Any) -> bytes:
    """Single-line record (no trailing newline)."""
    return _renderer.render(data, renderer_context={})


def parse_document(raw: bytes | str) -> Any:
    if isinstance(raw, str):
        raw = raw.encode("utf-8")
    return _parser.parse(io.BytesIO(raw))


def read_document(path: str | Path) -> Any:
    return parse_document(Path(path).read_bytes())


def write_document(path: str | Path, data: Any) -> str:
    """Write ``data`` and return the sha256 of the written bytes."""
    raw = render_document(data)
    Path(path).write_bytes(raw)
    return sha256_bytes(raw)


def sha256_bytes(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(data: Any) -> str:
    """Stable hash of a JSON-compatible config (compact rendering)."""
    return sha256_bytes(render_line(data))[:16]
