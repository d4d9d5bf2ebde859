"""JSON chain descriptions for the command line.

A chain spec is a small JSON object:

    {
      "family": "gim1" | "mg1" | "birth_death"
                | "finite_matrix" | "finite_generator",
      "params": { ... family parameters ... },
      "cost":   { "kind": "geometric" | "indicator" | "table" | "zero", ... }
    }

Family parameters: ``gim1``/``mg1`` take ``z`` (> 1); ``birth_death``
takes ``birth`` and ``death`` (number or list, last entry repeating);
``finite_matrix``/``finite_generator`` take ``path`` to a dense header-free
CSV, resolved relative to the spec file.  Cost parameters: geometric takes
``ratio`` plus optional ``scale``/``origin``, indicator takes ``state``,
table takes ``values`` plus optional ``default``; a missing cost section
means zero cost.  Anything malformed raises `FormatError`.

Loading produces a `ModelBundle` that carries the kernel or generator, the
cost, and any closed forms the family/cost combination admits (used as
fast paths and echoed in run manifests).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .chain import (CostFunction, FormatError, GeneratorKernel,
                    TransitionKernel)
from . import models

__all__ = ["ModelBundle", "load_spec", "build_cost"]

FAMILIES = ("gim1", "mg1", "birth_death", "finite_matrix", "finite_generator")
COST_KINDS = ("geometric", "indicator", "table", "zero")


@dataclass(frozen=True)
class ModelBundle:
    """A chain or generator, its cost, and whatever closed forms apply."""

    family: str
    params: dict
    kernel: Optional[TransitionKernel]
    generator: Optional[GeneratorKernel]
    cost: CostFunction
    closed_potential: Optional[Callable[[int], float]]
    closed_m: Optional[Callable[[int], float]]
    label: str

    @property
    def is_continuous(self) -> bool:
        return self.generator is not None

    @property
    def model(self) -> Union[TransitionKernel, GeneratorKernel]:
        return self.generator if self.generator is not None else self.kernel


def build_cost(section: Optional[dict]) -> CostFunction:
    """Cost function from the spec's cost section (``None`` means zero)."""
    if section is None:
        return CostFunction.zero()
    if not isinstance(section, dict):
        raise FormatError("cost section must be a JSON object")
    kind = section.get("kind")
    if kind not in COST_KINDS:
        raise FormatError(
            f"cost kind must be one of {', '.join(COST_KINDS)}, got {kind!r}")
    try:
        if kind == "geometric":
            origin = section.get("origin")
            return CostFunction.geometric(
                ratio=float(section["ratio"]),
                scale=float(section.get("scale", 1.0)),
                origin=None if origin is None else float(origin))
        if kind == "indicator":
            return CostFunction.indicator(int(section["state"]))
        if kind == "table":
            values = section["values"]
            if not isinstance(values, list):
                raise FormatError("table cost needs a list under 'values'")
            return CostFunction.from_table(
                values, default=float(section.get("default", 0.0)))
        return CostFunction.zero()
    except KeyError as exc:
        raise FormatError(f"{kind} cost is missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise FormatError(f"bad {kind} cost parameters: {exc}") from exc


def _family_params(doc: dict) -> dict:
    params = doc.get("params", {})
    if not isinstance(params, dict):
        raise FormatError("params section must be a JSON object")
    return params


def _need(params: dict, field: str, family: str):
    if field not in params:
        raise FormatError(f"family {family!r} needs parameter {field!r}")
    return params[field]


def load_spec(path) -> ModelBundle:
    """Read a chain spec file and assemble the model it describes."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise FormatError(f"cannot read spec file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: top level must be a JSON object")
    family = doc.get("family")
    if family not in FAMILIES:
        raise FormatError(
            f"{path}: family must be one of {', '.join(FAMILIES)}, got {family!r}")
    params = _family_params(doc)
    cost = build_cost(doc.get("cost"))
    kernel: Optional[TransitionKernel] = None
    generator: Optional[GeneratorKernel] = None
    closed_potential = None
    closed_m = None

    try:
        if family == "gim1":
            p = models.GiM1Params(z=float(_need(params, "z", family)))
            kernel = models.gim1_chain(p)
            label = kernel.label
            closed_potential = models.closed_potential_for(family, p, cost)
        elif family == "mg1":
            p = models.MG1Params(z=float(_need(params, "z", family)))
            kernel = models.mg1_chain(p)
            label = kernel.label
            closed_potential = models.closed_potential_for(family, p, cost)
            if 1.0 < p.z < 2.0:
                closed_m = models.mg1_closed_m(p)
        elif family == "birth_death":
            p = models.BirthDeathParams.of(
                _need(params, "birth", family), _need(params, "death", family))
            generator = models.birth_death_generator(p)
            label = generator.label
        else:
            rel = str(_need(params, "path", family))
            full = rel if os.path.isabs(rel) else os.path.join(
                os.path.dirname(os.path.abspath(str(path))), rel)
            loaded = models.load_finite_matrix(full)
            if family == "finite_matrix":
                if not isinstance(loaded, TransitionKernel):
                    raise FormatError(
                        f"{full}: negative diagonal -- this is a generator, "
                        "use family 'finite_generator'")
                kernel = loaded
            else:
                if not isinstance(loaded, GeneratorKernel):
                    raise FormatError(
                        f"{full}: nonnegative diagonal -- this is a chain, "
                        "use family 'finite_matrix'")
                generator = loaded
            label = loaded.label
    except (TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: bad parameters for {family}: {exc}") from exc

    return ModelBundle(family=family, params=dict(params), kernel=kernel,
                       generator=generator, cost=cost,
                       closed_potential=closed_potential, closed_m=closed_m,
                       label=label)
