class UavOptError(Exception):
    exit_code = 1

    def kind(self) -> str:
        raise NotImplementedError("Subclasses must implement this method")

    def context(self) -> str | None:
        raise NotImplementedError("Subclasses must implement this method")

    def message(self) -> str:
        raise NotImplementedError("Subclasses must implement this method")

    def notes(self) -> list[str]:
        if hasattr(self, "notes_"):
            return self.notes_
        else:
            return []

    def with_note(self, note: str):
        if hasattr(self, "notes_"):
            self.notes_.append(note)
        else:
            self.notes_ = [note]
        return self

    def __str__(self):
        if self.context() is not None:
            return f"{self.kind()} {self.context()}: {self.message()}"
        else:
            return f"{self.kind()}: {self.message()}"


def add_trace(function):
    def wrapper(*args, **kwargs):
        try:
            return function(*args, **kwargs)
        except UavOptError as e:
            raise e.with_note(f"In {function.__name__}")
    wrapper.__name__ = function.__name__
    wrapper.__doc__ = function.__doc__
    return wrapper


class ConfigError(UavOptError):
    """Malformed or incomplete scenario configuration."""
    exit_code = 2

    def __init__(self, message: str, source: str | None = None, field: str | None = None):
        self.message_ = message
        self.source = source
        self.field = field

    def kind(self) -> str:
        return "ConfigError"

    def context(self) -> str | None:
        if self.source and self.field:
            return f"in {self.source} (field '{self.field}')"
        elif self.source:
            return f"in {self.source}"
        elif self.field:
            return f"in field '{self.field}'"
        return None

    def message(self) -> str:
        return self.message_


class InfeasibleScenarioError(UavOptError):
    """A trajectory (or the scenario itself) violates the motion constraints."""
    exit_code = 3

    def __init__(self, message: str, slot: int | None = None):
        self.message_ = message
        self.slot = slot

    def kind(self) -> str:
        return "InfeasibleScenarioError"

    def context(self) -> str | None:
        if self.slot is not None:
            return f"at slot {self.slot}"
        return None

    def message(self) -> str:
        return self.message_


class SolverError(UavOptError):
    exit_code = 4

    def __init__(self, solver: str, message: str):
        self.solver = solver
        self.message_ = message

    def kind(self) -> str:
        return "SolverError"

    def context(self) -> str | None:
        return f"in {self.solver}"

    def message(self) -> str:
        return self.message_


class InputError(UavOptError):
    """Bad arguments handed to one of the numeric routines."""
    exit_code = 4

    def __init__(self, operation: str, message: str):
        self.operation = operation
        self.message_ = message

    def kind(self) -> str:
        return "InputError"

    def context(self) -> str | None:
        return f"in {self.operation}"

    def message(self) -> str:
        return self.message_
