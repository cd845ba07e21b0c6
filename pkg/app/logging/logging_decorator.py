# logging_decorator.py
import reprlib
import time
from functools import wraps

from app.core.errors import DemandModelError

_short = reprlib.Repr()
_short.maxstring = 80
_short.maxother = 80
_short.maxlist = 4


# The decorator takes the bound logger of the calling module
def log_function_call(module_logger):
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            module_logger.debug(
                f"Calling {func.__name__} with args={_short.repr(args)}, kwargs={_short.repr(kwargs)}"
            )
            started = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except DemandModelError as e:
                module_logger.warning(f"{func.__name__} failed: {type(e).__name__}: {e}")
                raise
            except Exception as e:
                # loguru's .exception() captures the traceback
                module_logger.exception(f"Exception in {func.__name__}: {e}")
                raise
            elapsed = time.perf_counter() - started
            module_logger.debug(f"{func.__name__} completed in {elapsed:.3f}s -> {_short.repr(result)}")
            return result
        return wrapper
    return decorator
