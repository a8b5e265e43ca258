"""Exception types shared across the simulator."""


class BDFLError(Exception):
    """Base class for simulator errors."""


class InfeasibleClientError(BDFLError):
    """A client cannot be scheduled this round (no energy left, dead channel)."""

    def __init__(self, client: int, reason: str):
        super().__init__(f"client {client}: {reason}")
        self.client = client
        self.reason = reason


class RoundInfeasibleError(BDFLError):
    """Fewer than the minimum number of clients can be scheduled in a round."""

    def __init__(self, message: str, round_index: int | None = None):
        if round_index is not None:
            message = f"round {round_index}: {message}"
        super().__init__(message)
        self.round_index = round_index


class EigenSolverError(BDFLError):
    """The symmetric eigen-solver did not converge."""

    def __init__(self, matrix, cause: Exception):
        super().__init__(f"eigen-solver failed on {matrix.shape} Laplacian: {cause}")
        self.matrix = matrix


class TrainingDivergedError(BDFLError):
    """Local training produced a non-finite loss or gradient."""


class BlockRejectedError(BDFLError):
    """A mined block failed verification."""


class ConfigError(BDFLError):
    """Invalid simulation configuration."""
