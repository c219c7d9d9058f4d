"""Figure specs: a JSON file describing layers over exported artifacts.

```json
{
  "out": "figure.png",
  "title": "example 3, r = 0",
  "xlim": [-4, 4], "ylim": [-4, 4],
  "layers": [
    {"file": "omega_points.csv", "kind": "points", "style": "samples",
     "label": "long-horizon members", "status": "member"},
    {"file": "isoas_slices.csv", "kind": "polygons", "style": "nonsat",
     "label": "invariant union"},
    {"file": "moas_slices.csv", "kind": "polygons", "style": "moas",
     "label": "no-saturation set"}
  ]
}
```

Layer `file` paths are resolved relative to the spec file's directory.
Layers are drawn in list order, first at the bottom. Styles carry the
fixed color convention: green for non-saturated sets, orange for
saturated ones, blue for the no-saturation admissible set, purple for
sample points; `constraint` draws dashed outlines without fill.
"""

import json
import os
from dataclasses import dataclass, field

from .errors import SpecError

KINDS = ("polygons", "points")
STYLES = ("nonsat", "saturated", "moas", "samples", "constraint")


@dataclass(frozen=True)
class LayerSpec:
    path: str
    kind: str
    style: str
    label: str = ""
    status: str | None = None


@dataclass(frozen=True)
class FigureSpec:
    out: str
    layers: tuple
    title: str = ""
    xlim: tuple | None = None
    ylim: tuple | None = None
    meta: dict = field(default_factory=dict)


def _pair(raw, name, problems):
    if raw is None:
        return None
    if (not isinstance(raw, (list, tuple)) or len(raw) != 2
            or not all(isinstance(v, (int, float)) for v in raw)):
        problems.append(f"{name}: expected [lo, hi]")
        return None
    return (float(raw[0]), float(raw[1]))


def load_figure_spec(path):
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as e:
        raise SpecError([f"cannot read spec file: {e}"])
    except json.JSONDecodeError as e:
        raise SpecError([f"not valid JSON: {e}"])
    if not isinstance(raw, dict):
        raise SpecError(["top level must be an object"])

    problems = []
    base = os.path.dirname(os.path.abspath(path))
    out = raw.get("out")
    if not isinstance(out, str) or not out:
        problems.append("out: missing or not a path")
    else:
        out = os.path.join(base, out)

    layers = []
    raw_layers = raw.get("layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        problems.append("layers: must be a nonempty list")
        raw_layers = []
    for i, entry in enumerate(raw_layers):
        if not isinstance(entry, dict):
            problems.append(f"layers[{i}]: must be an object")
            continue
        file_ = entry.get("file")
        if not isinstance(file_, str) or not file_:
            problems.append(f"layers[{i}].file: missing")
            continue
        resolved = os.path.join(base, file_)
        if not os.path.isfile(resolved):
            problems.append(f"layers[{i}].file: {file_} does not exist")
        kind = entry.get("kind", "polygons")
        if kind not in KINDS:
            problems.append(f"layers[{i}].kind: {kind!r} not in {KINDS}")
        style = entry.get("style")
        if style not in STYLES:
            problems.append(f"layers[{i}].style: {style!r} not in {STYLES}")
        status = entry.get("status")
        if status is not None and kind != "points":
            problems.append(f"layers[{i}].status: only valid for points")
        layers.append(LayerSpec(path=resolved, kind=kind, style=style,
                                label=str(entry.get("label", "")),
                                status=status))

    xlim = _pair(raw.get("xlim"), "xlim", problems)
    ylim = _pair(raw.get("ylim"), "ylim", problems)
    if problems:
        raise SpecError(problems)
    return FigureSpec(out=out, layers=tuple(layers),
                      title=str(raw.get("title", "")),
                      xlim=xlim, ylim=ylim)
