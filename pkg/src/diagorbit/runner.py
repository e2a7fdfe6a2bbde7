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
from threading import Thread
from typing import Any, Awaitable, Callable, Optional, Sequence, TypeVar

from .async_runner import AsyncExperimentRunner

T = TypeVar("T")


class ExperimentRunner:
    """Runs chunked experiment work in parallel from synchronous code."""

    __loop: Optional[asyncio.AbstractEventLoop] = None
    __thread: Optional[Thread] = None

    def __init__(self, workers: int = 1) -> None:
        """
        Initializes the runner.

        Args:
            workers: Number of worker processes.
        """

        # Running a loop in a background thread allows us to gather executor
        # futures from non-async callers.
        if ExperimentRunner.__loop is None:
            loop = asyncio.new_event_loop()
            thread = Thread(target=loop.run_forever, daemon=True)
            thread.start()
            ExperimentRunner.__thread = thread
            ExperimentRunner.__loop = loop

        self.__async_runner = AsyncExperimentRunner(workers)

    @property
    def workers(self) -> int:
        return self.__async_runner.workers

    def __run_as_sync(self, coro: Awaitable[T]) -> T:
        """Run an async coroutine synchronously"""
        if not self.__loop:
            raise Exception(
                "Cannot call synchronous methods before the background loop is initialized."
            )
        return asyncio.run_coroutine_threadsafe(coro, self.__loop).result()

    async def __run_as_async(self, coro: Awaitable[T]) -> T:
        """Run an async coroutine asynchronously"""
        if not self.__loop:
            return await coro
        return await asyncio.wrap_future(
            asyncio.run_coroutine_threadsafe(coro, self.__loop)
        )

    def map(self, fn: Callable[[Any], T], chunks: Sequence[Any]) -> list[T]:
        """
        Runs fn on every chunk and returns the results in chunk order.

        Args:
            fn: A picklable module-level function.
            chunks: The work items.

        Returns:
            The results, one per chunk.
        """
        return self.__run_as_sync(self.__async_runner.amap(fn, list(chunks)))

    async def amap(self, fn: Callable[[Any], T], chunks: Sequence[Any]) -> list[T]:
        """Runs fn on every chunk from async code."""
        return await self.__run_as_async(self.__async_runner.amap(fn, list(chunks)))

    def close(self) -> None:
        """Shuts the worker pool down. The runner can be used again afterwards."""
        self.__async_runner.close()

    def __enter__(self) -> "ExperimentRunner":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()
