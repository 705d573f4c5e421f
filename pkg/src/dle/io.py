"""Reading lattice and raw-matrix input documents."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .lattice import LatticeSpec, build_dynamical_matrix, lattice_from_json, split_into_steps
from .timestep import TimeStepSystem, ValidationError

FIXTURES = ("regular_loop", "shrinking_loop", "growing_loop", "double_edge", "widening", "narrowing")

_STEP_KEYS = ("L", "R", "Rbar")


@dataclass(frozen=True)
class Problem:
    """Parsed input: the step systems plus the lattice they came from, if any."""

    steps: tuple
    lattice: LatticeSpec | None = None
    source: str = ""

    @property
    def q(self):
        return self.steps[0].q

    @property
    def t(self):
        return len(self.steps)


def fixture_path(name):
    """Path of a bundled lattice file, e.g. ``fixture_path("shrinking_loop")``."""
    if name not in FIXTURES:
        raise ValidationError(f"unknown fixture {name!r}; bundled: {', '.join(FIXTURES)}")
    return resources.files("dle") / "data" / f"{name}.json"


def load_fixture(name) -> LatticeSpec:
    return lattice_from_json(json.loads(fixture_path(name).read_text(encoding="utf-8")))


def steps_from_json(doc):
    """Raw-matrix document ``{"steps": [{"L": .., "R": .., "Rbar": ..}, ...]}``."""
    extra = set(doc) - {"steps"}
    if extra:
        raise ValidationError(f"unknown key(s) in matrix document: {sorted(extra)}")
    raw = doc["steps"]
    if not isinstance(raw, list) or not raw:
        raise ValidationError("key 'steps' must be a non-empty array")
    steps = []
    for n, st in enumerate(raw):
        if not isinstance(st, dict):
            raise ValidationError(f"steps[{n}] must be an object")
        extra = set(st) - set(_STEP_KEYS)
        if extra:
            raise ValidationError(f"unknown key(s) in steps[{n}]: {sorted(extra)}")
        mats = {}
        for key in _STEP_KEYS:
            if key not in st:
                raise ValidationError(f"steps[{n}] is missing key {key!r}")
            try:
                mats[key] = np.array(st[key], dtype=float)
            except (TypeError, ValueError):
                raise ValidationError(f"steps[{n}].{key} is not a numeric matrix") from None
            if mats[key].ndim != 2:
                raise ValidationError(f"steps[{n}].{key} must be a 2-D array")
        try:
            steps.append(TimeStepSystem(**mats))
        except ValidationError as exc:
            raise ValidationError(f"steps[{n}]: {exc}") from None
    q = steps[0].q
    for n, st in enumerate(steps):
        if st.q != q:
            raise ValidationError(f"steps[{n}] has q = {st.q}, expected {q}")
    return steps


def problem_from_json(doc, source="") -> Problem:
    if not isinstance(doc, dict):
        raise ValidationError("input document must be a JSON object")
    if "steps" in doc:
        return Problem(tuple(steps_from_json(doc)), None, source)
    spec = lattice_from_json(doc)
    return Problem(tuple(split_into_steps(spec)), spec, source)


def load_problem(path_or_fixture) -> Problem:
    """Load a file path, or a bundled fixture name such as ``regular_loop``."""
    name = str(path_or_fixture)
    if name in FIXTURES and not Path(name).exists():
        text = fixture_path(name).read_text(encoding="utf-8")
    else:
        try:
            text = Path(name).read_text(encoding="utf-8")
        except OSError as exc:
            raise ValidationError(f"cannot read {name}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{name}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return problem_from_json(doc, name)


def dynamical_matrix(problem: Problem):
    return None if problem.lattice is None else build_dynamical_matrix(problem.lattice)
