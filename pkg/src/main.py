"""Command-line entry point for ``python src/main.py``."""

from app.cli import main

if __name__ == "__main__":
    raise SystemExit(main())
