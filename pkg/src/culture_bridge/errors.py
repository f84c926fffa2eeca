"""Exception hierarchy shared by all culture_bridge modules."""


class CultureBridgeError(Exception):
    """Base class for all errors raised by this package."""


# --- dataset construction / parsing ---------------------------------------

class MissingColumn(CultureBridgeError):
    def __init__(self, column: str, path: str = ""):
        self.column = column
        super().__init__(f"missing column {column!r}" + (f" in {path}" if path else ""))


class EmptyFile(CultureBridgeError):
    pass


class NonMonotonicTime(CultureBridgeError):
    def __init__(self, vehicle_id: int, detail: str = ""):
        self.vehicle_id = vehicle_id
        msg = f"non-monotonic time for vehicle {vehicle_id}"
        super().__init__(msg + (f": {detail}" if detail else ""))


class InconsistentDt(CultureBridgeError):
    def __init__(self, vehicle_id: int, expected: float, found: float):
        self.vehicle_id = vehicle_id
        super().__init__(
            f"vehicle {vehicle_id}: frame spacing {found!r} differs from dataset dt {expected!r}"
        )


class FractionOutOfRange(CultureBridgeError):
    pass


class EmptyDataset(CultureBridgeError):
    pass


# --- synthetic worlds -------------------------------------------------------

class DegenerateWorld(CultureBridgeError):
    pass


# --- feature extraction -----------------------------------------------------

class UnknownVehicle(CultureBridgeError):
    def __init__(self, vehicle_id: int):
        self.vehicle_id = vehicle_id
        super().__init__(f"vehicle {vehicle_id} not in dataset")


class UnknownTime(CultureBridgeError):
    def __init__(self, vehicle_id: int, t: float):
        super().__init__(f"vehicle {vehicle_id} has no frame at t={t}")


# --- learning core ----------------------------------------------------------

class NonFiniteActivation(CultureBridgeError):
    pass


class NonFiniteLoss(CultureBridgeError):
    pass


class InsufficientData(CultureBridgeError):
    pass


class EmptyGrid(CultureBridgeError):
    pass


class TrackTooShort(CultureBridgeError):
    def __init__(self, vehicle_id: int, n_frames: int, needed: int):
        super().__init__(
            f"vehicle {vehicle_id} has {n_frames} frames, rollout needs at least {needed}"
        )


# --- model persistence -------------------------------------------------------

class VersionMismatch(CultureBridgeError):
    def __init__(self, found, expected):
        super().__init__(f"model file version {found!r}, this build reads version {expected!r}")


class CorruptFile(CultureBridgeError):
    pass


# --- metrics ------------------------------------------------------------------

class DegenerateSample(CultureBridgeError):
    pass


class VariableMismatch(CultureBridgeError):
    def __init__(self, left: str, right: str):
        super().__init__(f"profiles describe different variables: {left!r} vs {right!r}")


class InsufficientTracks(CultureBridgeError):
    pass


class ZeroVariance(CultureBridgeError):
    pass


# --- warnings -------------------------------------------------------------------

class RankDeficientWarning(UserWarning):
    """Closed-form culture solve fell back to a ridge-regularised system."""
