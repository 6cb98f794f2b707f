from collections import defaultdict
from typing import Any, Callable, Iterable, TypeVar

from numpy.typing import NDArray

T = TypeVar('T')
U = TypeVar('U')


# Groups keep first-seen key order and element order within a key.
def group_by(key_function: Callable[[T], U]) -> Callable[[Iterable[T]], dict[U, list[T]]]:
    def impl(iterable: Iterable[T]) -> dict[U, list[T]]:
        result: dict[U, list[T]] = defaultdict(list)

        for element in iterable:
            result[key_function(element)].append(element)

        return dict(result)

    return impl


# Arrays held by frozen value types are locked in place.
def read_only(values: NDArray[Any]) -> NDArray[Any]:
    values.flags.writeable = False
    return values
