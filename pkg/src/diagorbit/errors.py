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


class DiagorbitError(ValueError):
    """Base class for every error raised by diagorbit."""


class PreconditionError(DiagorbitError):
    """The inputs violate a mathematical precondition. Maps to exit code 2."""


class PrecisionError(DiagorbitError):
    """The working precision cannot certify the answer. Maps to exit code 3."""


class NotSquarefree(PreconditionError):
    pass


class RationalRootFound(PreconditionError):
    pass


class DivisionByZeroElement(PreconditionError):
    pass


class SingularBasis(PreconditionError):
    pass


class DimensionTooLarge(PreconditionError):
    pass


class DependentBasis(PreconditionError):
    pass


class ShapeViolation(PreconditionError):
    pass


class BadIndex(PreconditionError):
    pass


class DimensionMismatch(PreconditionError):
    pass


class DeterminantViolation(PreconditionError):
    pass


class DiagonalSubalgebra(PreconditionError):
    pass


class NotInSOrbit(PreconditionError):
    pass


class PreconditionViolated(PreconditionError):
    pass


class BoundViolated(PreconditionError):
    pass


class EnumerationBudgetExceeded(PreconditionError):
    pass


class PrecisionExhausted(PrecisionError):
    pass


class UncertifiedInput(PrecisionError):
    pass


class ToleranceAmbiguous(PrecisionError):
    pass
