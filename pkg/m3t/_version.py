# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Dynamic package version support."""

import os
import re
import subprocess
from typing import Optional

# release versions, optionally with an rc<n> or post<n> suffix
_RELEASE = re.compile(r"^[0-9\.]+((rc|post)[0-9]+)?$")


def current_git_hash() -> Optional[str]:
    """Short git hash of the commit containing this package.

    Returns:
       Short hash, or ``None`` outside a git working tree.
    """
    try:
        result = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True,
            text=True,
            check=True,
        )
    except (subprocess.CalledProcessError, FileNotFoundError):
        return None
    return result.stdout.strip() or None


def local_version_label(public_version: str) -> str:
    """Local version label (`PEP 440 <https://peps.python.org/pep-0440/>`__).

    Args:
        public_version: Public component of the version identifier.

    Returns:
        ``"+<hash>"`` for development versions inside a git working
        tree, otherwise an empty string.
    """
    if _RELEASE.match(public_version):
        return ""
    git_hash = current_git_hash()
    return "+" + git_hash if git_hash else ""
