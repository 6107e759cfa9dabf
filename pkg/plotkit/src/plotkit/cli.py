"""plotkit command line: `plotkit <kind> --in FILE --out IMAGE`."""

from __future__ import annotations

import argparse
import sys

from .render import FigureRequest, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit", description="Render exported artifacts into figures."
    )
    sub = parser.add_subparsers(dest="kind", required=True)

    def common(p):
        p.add_argument("--in", dest="input_path", required=True)
        p.add_argument("--out", dest="output_path", required=True)

    p = sub.add_parser("contour", help="loss-plane contours with vertex markers")
    common(p)
    p.add_argument("--sidecar", default=None,
                   help="marker sidecar JSON (default: input stem + .json)")
    p.add_argument("--linear-loss", action="store_true",
                   help="color by raw loss instead of log loss")

    p = sub.add_parser("volume-curve", help="log volume vs connector count")
    common(p)

    p = sub.add_parser("decision-boundary", help="per-sample class maps")
    common(p)
    p.add_argument("--max-panels", type=int, default=4)

    p = sub.add_parser("error-curve", help="two-column line plot")
    common(p)

    p = sub.add_parser("uncertainty-band", help="mean with 2-sigma bands")
    common(p)
    p.add_argument("--train", dest="overlay_path", default=None,
                   help="overlay training points from an x0,y CSV")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    request = FigureRequest(
        kind=args.kind.replace("-", "_"),
        input_path=args.input_path,
        output_path=args.output_path,
        sidecar_path=getattr(args, "sidecar", None),
        overlay_path=getattr(args, "overlay_path", None),
        log_loss=not getattr(args, "linear_loss", False),
        max_panels=getattr(args, "max_panels", 4),
    )
    try:
        written = render(request)
    except SchemaError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {written}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
