"""
Main module for the induced-coherence toolkit.
"""

import logging
import sys
from typing import Optional

from .bridge import Config, InterferometerBridge
from .mcp_server import MCPServer
from .models import ExperimentParams, validate


class InducedCoherenceToolkit:
    """
    Convenience wrapper around :class:`InterferometerBridge`.

    Accepts plain keyword arguments instead of validated parameter objects.
    """

    def __init__(self, cutoff: int = 8, workers: int = 1):
        """
        Initialize the toolkit.

        Args:
            cutoff: Photon-number cutoff per mode for the Fock oracle
            workers: Worker threads for sweeps
        """
        self.bridge = InterferometerBridge(Config(cutoff=cutoff, workers=workers))

    @staticmethod
    def params(**fields) -> ExperimentParams:
        """Validated experiment parameters (``v2`` accepted in place of ``gain``)."""
        return validate(fields)

    def closed_form(self, **fields):
        """Closed-form values at one point."""
        return self.bridge.closed_form_point(self.params(**fields))

    def engine(self, **fields):
        """Gaussian engine report at one point."""
        return self.bridge.engine_point(self.params(**fields))

    def oracle(self, cutoff: Optional[int] = None, **fields):
        """Fock oracle report at one point."""
        return self.bridge.oracle_point(self.params(**fields), cutoff)


def main() -> None:
    """Main entry point for MCP server."""
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr, format="%(message)s")
    server = MCPServer()
    server.run()


if __name__ == "__main__":
    main()
