# =============================================================================
# GLINTGAZE - Command Line Entry Point
# =============================================================================

"""
Usage:
    python main.py simulate  [--config cfg.json] [--seed N] [--out DIR] [--pgm]
    python main.py detect    --input frames/ [--out DIR]
    python main.py solve     --input observations.jsonl [--mapper subject_0.json]
    python main.py calibrate --input dataset.jsonl
    python main.py evaluate  [--variant NAME] [--format csv|json]
    python main.py report    --input metrics.json

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

import argparse
import sys
import logging

from modules.core.errors import ConfigError

logger = logging.getLogger(__name__)

COMMANDS = ("simulate", "detect", "solve", "calibrate", "evaluate", "report")
NEEDS_INPUT = ("detect", "solve", "calibrate", "report")


def check_dependencies():
    """Check for required packages"""
    required_packages = ['numpy', 'scipy', 'torch', 'PIL']

    missing_packages = []
    for package in required_packages:
        try:
            __import__(package)
        except ImportError:
            missing_packages.append(package)

    if missing_packages:
        print("Missing required packages:")
        for package in missing_packages:
            print(f"  - {package}")
        print("\nInstall with: pip install -r requirements.txt")
        return False
    return True


def build_parser():
    parser = argparse.ArgumentParser(prog="glintgaze", description="Corneal-reflection gaze estimation")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config file merged over the defaults")
    parser.add_argument("--seed", type=int, help="overrides run.seed")
    parser.add_argument("--variant", help="evaluate a single named variant")
    parser.add_argument("--out", help="output directory (overrides run.out_dir)")
    parser.add_argument("--format", choices=("csv", "json"), help="summary table format")
    parser.add_argument("--input", help="input file or directory")
    parser.add_argument("--mapper", help="mapper file for solve")
    parser.add_argument("--pgm", action="store_true", help="simulate: also render PGM frames")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def main(argv=None):
    """Main entry point"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s - %(levelname)s - %(message)s')

    if not check_dependencies():
        return 2
    if args.command in NEEDS_INPUT and not args.input:
        print(f"Error: {args.command} needs --input")
        return 1

    from modules.core.main_app import GlintGazeApp

    try:
        app = GlintGazeApp(args.config, seed=args.seed, out_dir=args.out, fmt=args.format)
        if args.command == "simulate":
            outputs = [app.simulate(pgm=args.pgm)]
        elif args.command == "detect":
            outputs = [app.detect(args.input)]
        elif args.command == "solve":
            outputs = [app.solve(args.input, args.mapper)]
        elif args.command == "calibrate":
            outputs = app.calibrate(args.input)
        elif args.command == "evaluate":
            outputs = app.evaluate(args.variant)
        else:
            outputs = app.report(args.input)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(f"Error: {e}")
        return 1
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"Error: {e}")
        return 2

    for path in outputs:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
