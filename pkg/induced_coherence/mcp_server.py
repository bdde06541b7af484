"""
MCP Server implementation for the induced-coherence toolkit.
"""

import json
import logging
import math
import sys
from typing import Any, Dict, Optional, TextIO, Union

from .bridge import Config, InterferometerBridge
from .errors import InterferometerError
from .models import ErrorReport, ExperimentParams, validate

logger = logging.getLogger(__name__)


def _json(values: Dict[str, Any]) -> str:
    # undefined quantities (e.g. g2 on the vacuum) go out as null
    clean = {
        key: None if isinstance(value, float) and math.isnan(value) else value
        for key, value in values.items()
    }
    return json.dumps(clean, indent=2, allow_nan=False)


def _params_schema() -> Dict[str, Any]:
    schema = ExperimentParams.model_json_schema()
    schema["properties"]["v2"] = {
        "type": "number",
        "description": "Mean photon number per mode; alternative to gain",
    }
    return schema


class MCPServer:
    """MCP Server exposing the interferometer calculations as tools."""

    def __init__(self, config: Optional[Config] = None, stream: Optional[TextIO] = None):
        """Initialize the MCP server."""
        self.bridge = InterferometerBridge(config)
        self.request_id: Any = 0
        self.stream = stream

    def send_response(self, result: Any, error: Optional[Union[str, ErrorReport]] = None):
        """Send a JSON-RPC response."""
        response: Dict[str, Any] = {
            "jsonrpc": "2.0",
            "id": self.request_id,
        }

        if isinstance(error, ErrorReport):
            response["error"] = {
                "code": -1,
                "message": error.message,
                "data": error.model_dump(),
            }
        elif error:
            response["error"] = {"code": -1, "message": error}
        else:
            response["result"] = result

        out = self.stream or sys.stdout
        print(json.dumps(response), file=out)
        out.flush()

    def handle_request(self, request: Dict[str, Any]):
        """Handle a JSON-RPC request."""
        method = request.get("method")
        params = request.get("params", {})
        self.request_id = request.get("id", 0)

        try:
            if method == "initialize":
                self.handle_initialize(params)
            elif method == "tools/list":
                self.handle_list_tools()
            elif method == "tools/call":
                self.handle_call_tool(params)
            else:
                self.send_response(None, f"Unknown method: {method}")
        except Exception as e:
            self.send_response(None, str(e))

    def handle_initialize(self, params: Dict[str, Any]):
        """Handle initialize request."""
        response = {
            "protocolVersion": "2024-11-05",
            "capabilities": {"tools": {}},
            "serverInfo": {"name": "induced-coherence-mcp", "version": "0.1.0"},
        }
        self.send_response(response)

    def handle_list_tools(self):
        """Handle tools/list request."""
        params_schema = _params_schema()
        oracle_schema = json.loads(json.dumps(params_schema))
        oracle_schema["properties"]["cutoff"] = {
            "type": "integer",
            "description": "Photon-number cutoff per mode (default: 8, minimum 4)",
            "default": 8,
        }
        tools = [
            {
                "name": "closed_form_point",
                "description": "g2 values, distinguishability, coherence and visibility "
                "from the closed-form expressions at one parameter point",
                "inputSchema": params_schema,
            },
            {
                "name": "engine_point",
                "description": "Singles, g2, g1 and fringe visibility from the Gaussian "
                "moment engine (any gain)",
                "inputSchema": params_schema,
            },
            {
                "name": "oracle_point",
                "description": "Brute-force truncated Fock-space evaluation (low gain), "
                "with the norm deficit as error estimate",
                "inputSchema": oracle_schema,
            },
            {
                "name": "complementarity_check",
                "description": "Largest deviation from D² + g12² = 1 over a (t, v2) grid",
                "inputSchema": {
                    "type": "object",
                    "properties": {
                        "t_points": {
                            "type": "integer",
                            "description": "Grid points in t over [0, 1] (default: 51)",
                            "default": 51,
                        },
                        "v2_points": {
                            "type": "integer",
                            "description": "Log-spaced points in v2 over [1e-4, 10] (default: 50)",
                            "default": 50,
                        },
                    },
                },
            },
        ]

        self.send_response({"tools": tools})

    def _text(self, title: str, payload: str):
        self.send_response({"content": [{"type": "text", "text": f"{title}\n\n{payload}"}]})

    def handle_call_tool(self, params: Dict[str, Any]):
        """Handle tools/call request."""
        name = params.get("name")
        arguments = dict(params.get("arguments") or {})

        try:
            if name == "closed_form_point":
                point = validate(arguments)
                values = self.bridge.closed_form_point(point)
                self._text("Closed-form values:", _json(values))

            elif name == "engine_point":
                report = self.bridge.engine_point(validate(arguments))
                self._text("Gaussian engine report:", report.model_dump_json(indent=2))

            elif name == "oracle_point":
                cutoff = int(arguments.pop("cutoff", self.bridge.config.cutoff))
                report = self.bridge.oracle_point(validate(arguments), cutoff)
                self._text("Fock oracle report:", report.model_dump_json(indent=2))

            elif name == "complementarity_check":
                summary = self.bridge.complementarity_check(
                    int(arguments.get("t_points", 51)), int(arguments.get("v2_points", 50))
                )
                self._text("Complementarity check:", _json(summary))

            else:
                raise ValueError(f"Unknown tool: {name}")

        except InterferometerError as e:
            self.send_response(None, e.to_report())
        except Exception as e:
            self.send_response(None, str(e))

    def run(self, stdin: Optional[TextIO] = None):
        """Main event loop for the MCP server."""
        logger.warning("induced-coherence MCP server ready")

        for line in stdin or sys.stdin:
            line = line.strip()
            if not line:
                continue

            try:
                request = json.loads(line)
            except json.JSONDecodeError as e:
                logger.error("Bad JSON from host: %s", e)
                continue

            self.handle_request(request)
