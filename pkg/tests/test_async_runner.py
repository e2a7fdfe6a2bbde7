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

from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor

import pytest

from diagorbit.async_runner import AsyncExperimentRunner


class TestAsyncExperimentRunner:
    @pytest.fixture()
    def runner(self):
        runner = AsyncExperimentRunner()
        yield runner
        runner.close()

    @pytest.mark.asyncio
    async def test_amap(self, runner):
        assert await runner.amap(abs, [-1, -2, 3]) == [1, 2, 3]

    @pytest.mark.asyncio
    async def test_amap_reuses_executor(self, runner):
        await runner.amap(abs, [1])
        executor = runner._AsyncExperimentRunner__executor
        await runner.amap(abs, [2])
        assert runner._AsyncExperimentRunner__executor is executor

    def test_single_worker_uses_thread(self, runner):
        assert isinstance(runner._AsyncExperimentRunner__get_executor(), ThreadPoolExecutor)

    def test_many_workers_use_processes(self):
        runner = AsyncExperimentRunner(workers=2)
        try:
            assert isinstance(runner._AsyncExperimentRunner__get_executor(), ProcessPoolExecutor)
        finally:
            runner.close()

    def test_map_not_supported(self, runner):
        with pytest.raises(NotImplementedError, match="Synchronous methods not supported"):
            runner.map(abs, [1])

    def test_close_is_idempotent(self, runner):
        runner._AsyncExperimentRunner__get_executor()
        runner.close()
        runner.close()
        assert runner._AsyncExperimentRunner__executor is None

    def test_invalid_workers(self):
        with pytest.raises(ValueError):
            AsyncExperimentRunner(workers=-1)
