"""
并行映射工具
"""

from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Sequence, TypeVar

from tqdm import tqdm

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(func: Callable[[T], R], items: Sequence[T], threads: int = 1,
                 desc: str = "计算", disable: bool = False) -> List[R]:
    """按索引保序的并行映射; threads == 1 时顺序执行"""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in tqdm(items, desc=desc, disable=disable)]

    results: List[R] = [None] * len(items)
    with ThreadPoolExecutor(max_workers=threads) as executor:
        future_to_index = {executor.submit(func, item): index for index, item in enumerate(items)}
        with tqdm(total=len(items), desc=desc, disable=disable) as pbar:
            for future in as_completed(future_to_index):
                results[future_to_index[future]] = future.result()
                pbar.update(1)
    return results
