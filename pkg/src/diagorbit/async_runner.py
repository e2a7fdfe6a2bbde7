# Copyright 2025 Google LLC
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import asyncio
import logging
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from typing import Any, Callable, Optional, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


# This class is an internal implementation detail and is not exposed to the
# end-user. Use ExperimentRunner instead.
class AsyncExperimentRunner:

    def __init__(self, workers: int = 1) -> None:
        """
        Initializes the runner.

        Args:
            workers: Number of worker processes. With a single worker the
                chunks run on one background thread.
        """
        if workers < 1:
            raise ValueError(f"workers must be at least 1, got {workers}.")
        self.__workers = workers
        self.__executor: Optional[Executor] = None

    @property
    def workers(self) -> int:
        return self.__workers

    def __get_executor(self) -> Executor:
        if self.__executor is None:
            # mpmath keeps its working precision per process.
            if self.__workers > 1:
                self.__executor = ProcessPoolExecutor(max_workers=self.__workers)
            else:
                self.__executor = ThreadPoolExecutor(max_workers=1)
        return self.__executor

    async def amap(self, fn: Callable[[Any], T], chunks: Sequence[Any]) -> list[T]:
        """
        Runs fn on every chunk and gathers the results in submission order.

        Args:
            fn: A picklable module-level function.
            chunks: The work items.

        Returns:
            The results, one per chunk, in the order of `chunks`.
        """
        loop = asyncio.get_running_loop()
        executor = self.__get_executor()
        logger.debug("Submitting %d chunks to %d workers.", len(chunks), self.__workers)
        futures = [loop.run_in_executor(executor, fn, chunk) for chunk in chunks]
        return list(await asyncio.gather(*futures))

    def map(self, fn: Callable[[Any], T], chunks: Sequence[Any]) -> list[T]:
        raise NotImplementedError("Synchronous methods not supported by async runner.")

    def close(self) -> None:
        if self.__executor is not None:
            self.__executor.shutdown(wait=True)
            self.__executor = None
