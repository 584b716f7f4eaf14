# Numba is used when importable unless ELASTIC_GATEWAY_NO_NUMBA is set to a
# truthy value; the numpy path is always available.

import logging
import os

logger = logging.getLogger(__name__)

_FALSY = ("", "0", "false", "no", "off")
DISABLED_BY_ENV = os.environ.get("ELASTIC_GATEWAY_NO_NUMBA", "").strip().lower() not in _FALSY

try:
    import numba

    njit = numba.njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(pyfunc=None, **kwargs):
        def wrap(func):
            return func
        return wrap if pyfunc is None else wrap(pyfunc)

    logger.warning("numba not importable; GRPO kernels run on the numpy path")

USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV
