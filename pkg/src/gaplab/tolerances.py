"""Access to the versioned tolerance file shipped with the package."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=1)
def load_tolerances() -> dict:
    with resources.files("gaplab").joinpath("tolerances.json").open("r", encoding="utf-8") as fh:
        return json.load(fh)


def tol(section: str, key: str):
    return load_tolerances()[section][key]
