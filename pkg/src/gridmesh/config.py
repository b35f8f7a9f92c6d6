"""Flat ``key = value`` config files and JSON schema validation."""

import json
from importlib import resources

import jsonschema


class ConfigError(ValueError):
    pass


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment; repeated keys accumulate."""
    out = {}
    with open(path) as fh:
        for n, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, value = line.partition("=")
            if not eq:
                raise ConfigError(f"{path}:{n}: expected key = value")
            key = key.strip().replace("-", "_")
            if not key:
                raise ConfigError(f"{path}:{n}: empty key")
            out.setdefault(key, []).append(value.strip())
    return out


_SCHEMAS = {}


def schema(name):
    if name not in _SCHEMAS:
        text = resources.files("gridmesh").joinpath("schemas", f"{name}.json").read_text()
        _SCHEMAS[name] = json.loads(text)
    return _SCHEMAS[name]


def validate(doc, name):
    jsonschema.validate(doc, schema(name))
    return doc
