"""Allow `python -m canard_lab <subcommand> ...`."""

from .cli import main

main()
