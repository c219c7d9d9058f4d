"""plotkit <figure-spec.json>: render one spec to its output image."""

import argparse
import json
import sys

from .errors import PlotkitError, SpecError


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="plotkit",
        description="Render exported cross-section artifacts into a "
                    "layered figure.")
    ap.add_argument("spec", help="figure-spec JSON file")
    args = ap.parse_args(argv)
    # imported here so --help works without a display stack
    from .figure import render
    from .spec import load_figure_spec
    try:
        out, layers_info = render(load_figure_spec(args.spec))
    except PlotkitError as e:
        payload = {"error": type(e).__name__, "message": str(e)}
        if isinstance(e, SpecError):
            payload["problems"] = e.problems
        print(json.dumps(payload), file=sys.stderr)
        return 2
    for info in layers_info:
        tag = "empty" if info["empty"] else f"{info['count']} {info['kind']}"
        print(f"layer {info['style']:<10} {tag}"
              + (f"  [{info['label']}]" if info["label"] else ""))
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
