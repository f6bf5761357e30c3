"""Backend service layer: template persistence, cache and HTTP API."""

from .client import TemplateApiError, TemplateClient
from .serialization import FORMAT_VERSION, deserialize_model, read_header, serialize_model
from .server import TemplateServer, TemplateService, serve_templates
from .store import (ApiError, BadRequest, Conflict, Forbidden, NotFound, TemplateRecord, TemplateStore,
                    TokenTable, Unauthorized)

__all__ = [
    "FORMAT_VERSION", "ApiError", "BadRequest", "Conflict", "Forbidden", "NotFound", "TemplateApiError",
    "TemplateClient", "TemplateRecord", "TemplateServer", "TemplateService", "TemplateStore", "TokenTable",
    "Unauthorized", "deserialize_model", "read_header", "serialize_model", "serve_templates",
]
