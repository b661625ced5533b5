"""
``vgm2p <subcommand> [options]``

Thin dispatcher over the management commands so the tool can run
without ``manage.py``.  Exit codes: 0 success, 1 failed check, 2 usage
or input error.
"""

from __future__ import annotations

import logging
import os
import sys
from collections.abc import Sequence

logger = logging.getLogger(__name__)

SUBCOMMANDS = {
    "gen-data": "gen_data",
    "train": "train",
    "eval": "evaluate",
    "verify": "verify",
    "bench": "bench",
    "export-plots": "export_plots",
}

USAGE = "usage: vgm2p {" + ",".join(SUBCOMMANDS) + "} [options]   (vgm2p <subcommand> --help for details)\n"


def run(argv: Sequence[str]) -> int:
    """Run one subcommand; Django must already be set up."""
    from django.core.management import load_command_class

    argv = list(argv)
    if not argv or argv[0] in ("-h", "--help"):
        sys.stderr.write(USAGE)
        return 0 if argv else 2
    if argv[0] not in SUBCOMMANDS:
        sys.stderr.write(f"unknown subcommand {argv[0]!r}\n{USAGE}")
        return 2

    name = SUBCOMMANDS[argv[0]]
    command = load_command_class("apps.cli", name)
    try:
        command.run_from_argv(["vgm2p", name, *argv[1:]])
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    return 0


def main() -> None:
    import django
    from django.core.management import call_command

    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings.dev")
    django.setup()
    from django.conf import settings

    os.makedirs(settings.VGM2P["OUTPUT_ROOT"], exist_ok=True)
    call_command("migrate", verbosity=0, interactive=False)
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
