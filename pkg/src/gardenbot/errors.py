"""Error hierarchy with stable integer codes.

Every error the service surfaces carries a ``code`` that is stable across
releases (clients key UI messages off it) and an ``http_status`` used by the
API layer. Extra keyword arguments are kept in ``details`` and serialized
verbatim into error responses.
"""

from __future__ import annotations

from typing import Any


class GardenError(Exception):
    """Base class for all domain errors."""

    code: int = 1000
    http_status: int = 400

    def __init__(self, message: str = "", **details: Any) -> None:
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__
        self.details = details

    def to_payload(self) -> dict[str, Any]:
        return {
            "code": self.code,
            "error": self.__class__.__name__,
            "message": self.message,
            "details": self.details,
        }


# -- gantry ----------------------------------------------------------------

class OutOfBounds(GardenError):
    code = 1001

class UnknownTool(GardenError):
    code = 1002
    http_status = 404

class ToolNotInBay(GardenError):
    code = 1003
    http_status = 409

class ToolAlreadyMounted(GardenError):
    code = 1004
    http_status = 409

class NoToolMounted(GardenError):
    code = 1005
    http_status = 409

class WrongToolMounted(GardenError):
    code = 1006
    http_status = 409

class NotAtSeedContainer(GardenError):
    code = 1007
    http_status = 409

class SeedAlreadyHeld(GardenError):
    code = 1008
    http_status = 409

class NoSeedHeld(GardenError):
    code = 1009
    http_status = 409


# -- task compilation --------------------------------------------------------

class UnknownSpecies(GardenError):
    code = 1101
    http_status = 404

class EmptyTargetList(GardenError):
    code = 1102

class MalformedSequence(GardenError):
    code = 1103
    http_status = 500


# -- scheduling ---------------------------------------------------------------

class QueueFull(GardenError):
    code = 1201
    http_status = 429

class DuplicateWithinDebounce(GardenError):
    code = 1202
    http_status = 409

class RobotBusy(GardenError):
    code = 1203
    http_status = 409

class QueueEmpty(GardenError):
    code = 1204
    http_status = 409

class UnknownTask(GardenError):
    code = 1205
    http_status = 404

class NotCancellable(GardenError):
    code = 1206
    http_status = 409


# -- policy -------------------------------------------------------------------

class CrossPlotTarget(GardenError):
    code = 1301
    http_status = 403

class UnknownPlant(GardenError):
    code = 1302
    http_status = 404

class PlacementExhausted(GardenError):
    code = 1303
    http_status = 409

class TaskRejected(GardenError):
    """Raised by the service layer when validation verdict is `rejected`."""

    code = 1304
    http_status = 409


# -- field model ---------------------------------------------------------------

class NoFrames(GardenError):
    code = 1401
    http_status = 404

class CorruptLog(GardenError):
    code = 1402
    http_status = 500


# -- api service ----------------------------------------------------------------

class InvalidCredentials(GardenError):
    code = 1501
    http_status = 401

class RateLimited(GardenError):
    code = 1502
    http_status = 429

class Unauthenticated(GardenError):
    code = 1503
    http_status = 401

class UnknownPlot(GardenError):
    code = 1504
    http_status = 404

class MessageTooLong(GardenError):
    code = 1505

class WeatherUnavailable(GardenError):
    code = 1506
    http_status = 503

class SlowConsumer(GardenError):
    code = 1507
    http_status = 409


# -- scenario -------------------------------------------------------------------

class ScriptInvalid(GardenError):
    code = 1601
