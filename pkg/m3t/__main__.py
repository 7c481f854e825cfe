# -*- coding: utf-8 -*-
# Copyright (C) 2025 by the m3t developers
# All rights reserved. BSD 3-clause License.
# This file is part of the m3t package. Details of the copyright
# and user license can be found in the 'LICENSE' file distributed
# with the package.

"""Entry point for ``python -m m3t``."""

import sys

from ._cli import main

sys.exit(main())
