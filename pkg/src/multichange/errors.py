class DomainError(ValueError):
    """Observation outside the support of the scenario densities."""


class ConfigError(ValueError):
    """Invalid procedure or experiment configuration."""


class CensoredRunError(RuntimeError):
    """A metric that needs every stream declared was given a censored run."""


class CensoringGateError(RuntimeError):
    """Too many streams were still undeclared at the simulation horizon."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
