import json
import logging
import sys

from core.args import Args, Command
from core.commands import (
    cmd_asset,
    cmd_decompose,
    cmd_eval,
    cmd_generate,
    cmd_split,
    cmd_viz,
)
from core.errors import FaceFlowError, InternalError
from core.parse_args import parse_args


def dispatch(args: Args) -> dict:
    match args.command:
        case Command.Gen:
            return cmd_generate(args.gen)
        case Command.Eval:
            return cmd_eval(args.eval)
        case Command.Decompose:
            return cmd_decompose(args.decompose)
        case Command.Viz:
            return cmd_viz(args.viz)
        case Command.Split:
            return cmd_split(args.split)
        case Command.Asset:
            return cmd_asset(args.asset)


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
        logging.basicConfig(
            level=args.log_level, format="%(levelname)s %(name)s: %(message)s"
        )
        results = dispatch(args)
    except FaceFlowError as e:
        print(json.dumps(e.record()), file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logging.getLogger(__name__).exception("unexpected failure")
        error = InternalError(f"{type(e).__name__}: {e}")
        print(json.dumps(error.record()), file=sys.stderr)
        return error.exit_code

    print("RESULTS")
    print(f"{'#' * 20}")
    for key, value in results.items():
        print(f"{key}={value}")
    print(f"{'#' * 20}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
