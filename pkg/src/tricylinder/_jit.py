"""Optional numba acceleration.

Everything hot-path is written as plain scalar/array code that numba can
compile.  If numba is missing or fails to import, the same functions run
as ordinary Python (slow but correct), so the package stays usable.
"""

try:
    from numba import njit

    HAVE_NUMBA = True
except Exception:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap
