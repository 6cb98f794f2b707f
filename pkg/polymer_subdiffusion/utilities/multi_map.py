from typing import Generic, TypeVar

K = TypeVar('K')
V = TypeVar('V')


# Every value seen for a key, in insertion order. Config parsing uses it to
# report each duplicated key once with all the lines it appeared on.
class MultiMap(Generic[K, V], dict[K, list[V]]):
    def add(self, key: K, value: V) -> None:
        self.setdefault(key, []).append(value)

    def first(self, key: K) -> V:
        return self[key][0]

    def repeated(self) -> dict[K, list[V]]:
        return {key: values for key, values in self.items() if len(values) > 1}
