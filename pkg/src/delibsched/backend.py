import asyncio
import json
import logging
from typing import Any

import websockets

from delibsched.deadlines import parse_model
from delibsched.errors import DelibError, ParameterError
from delibsched.optimizers import optimize
from delibsched.oracle import SearchSpace, oracle_optimize
from delibsched.presets import RulePreset
from delibsched.profiles import profile_of
from delibsched.rules import Rule, RuleSet, Schedule
from delibsched.universal import (MachineSpeedup, build_universal, check_dominance,
                                  run_universal, stage_rows)
from delibsched.values import evaluate

logger = logging.getLogger(__name__)


def rules_from_params(params: dict[str, Any]) -> RuleSet:
    """Rules come either as a preset name or as a list of {id, quality, runtime}."""
    if "preset" in params:
        return RulePreset.load(params["preset"])
    data = params.get("rules")
    if not data:
        raise ParameterError("Missing required parameter: rules or preset")
    try:
        return RuleSet(tuple(Rule(str(d["id"]), float(d["quality"]), int(d["runtime"]))
                             for d in data))
    except (KeyError, TypeError) as e:
        raise ParameterError(f"bad rule record: {e}") from e


def model_from_params(params: dict[str, Any]) -> Any:
    return parse_model(params.get("regime", "stochastic"), params.get("deadline"),
                       params.get("cost"), params.get("dist"))


class DelibBackend:
    def __init__(self, host: str = "localhost", port: int = 8765):
        self.host = host
        self.port = port

    async def handle_message(self, websocket: Any) -> None:
        """Handle incoming WebSocket messages."""
        try:
            async for message in websocket:
                try:
                    data = json.loads(message)
                except json.JSONDecodeError:
                    response = {"error": "Invalid JSON format", "status": "error"}
                else:
                    response = await self.dispatch(data)
                await websocket.send(json.dumps(response))
        except websockets.exceptions.ConnectionClosed:
            logger.info("Client disconnected")
        except Exception:
            logger.exception("Unexpected error in handle_message")

    async def dispatch(self, data: Any) -> dict[str, Any]:
        """Route one request to its endpoint; errors become error replies."""
        if not isinstance(data, dict):
            return {"error": "Request must be a JSON object", "status": "error"}
        endpoint = data.get("endpoint")
        params = data.get("params", {})
        handlers = {
            "optimize": self.optimize,
            "evaluate": self.evaluate,
            "profile": self.profile,
            "oracle": self.oracle,
            "universal": self.universal,
        }
        handler = handlers.get(endpoint)
        if handler is None:
            return {"error": f"Unknown endpoint: {endpoint}", "status": "error"}
        try:
            # optimizers are CPU-bound
            result = await asyncio.to_thread(handler, params)
            return {"status": "success", "result": result}
        except DelibError as e:
            return {"error": str(e), "status": "error"}
        except Exception as e:
            logger.exception("Error in %s", endpoint)
            return {"error": str(e), "status": "error"}

    def optimize(self, params: dict[str, Any]) -> dict[str, Any]:
        result = optimize(rules_from_params(params), model_from_params(params))
        return {
            "schedule": list(result.schedule),
            "value": result.value,
            "regime": str(result.regime),
            "method": result.method,
            "table_stats": {
                "rows": result.table_stats.rows,
                "cols": result.table_stats.cols,
                "filled": result.table_stats.filled,
                "total_runtime": result.table_stats.total_runtime,
            },
        }

    def evaluate(self, params: dict[str, Any]) -> dict[str, Any]:
        rules = rules_from_params(params)
        schedule = Schedule(tuple(params.get("schedule", ())))
        return {"value": evaluate(schedule, rules, model_from_params(params))}

    def profile(self, params: dict[str, Any]) -> dict[str, Any]:
        rules = rules_from_params(params)
        schedule = Schedule(tuple(params.get("schedule", ())))
        return {"breakpoints": [list(bp) for bp in profile_of(schedule, rules).breakpoints]}

    def oracle(self, params: dict[str, Any]) -> dict[str, Any]:
        space = SearchSpace(params.get("search_space", SearchSpace.SORTED_ONLY.value))
        report = oracle_optimize(rules_from_params(params), model_from_params(params), space)
        return {
            "best_value": report.best_value,
            "best_schedules": [list(s) for s in report.best_schedules],
            "candidates_evaluated": report.candidates_evaluated,
            "preferred": list(report.preferred),
        }

    def universal(self, params: dict[str, Any]) -> dict[str, Any]:
        rules = rules_from_params(params)
        speedup = MachineSpeedup(float(params.get("speedup", 1.0)))
        prog = build_universal(rules, int(params.get("epsilon", 1)))
        result: dict[str, Any] = {
            "stages": [
                {"stage": j, "deadline": d, "schedule": s, "quality": q, "completes_at": t}
                for j, d, s, q, t in stage_rows(prog, speedup)
            ],
        }
        if "herald" in params:
            outcome = run_universal(prog, speedup, int(params["herald"]))
            result["outcome"] = {
                "delivered_quality": outcome.delivered_quality,
                "act_time": outcome.act_time,
                "status": outcome.status.value,
            }
        if "reference" in params:
            check = check_dominance(prog, speedup, Schedule(tuple(params["reference"])))
            result["dominates"] = check.dominates
        return result

    async def start_server(self) -> None:
        """Start the WebSocket server."""
        logger.info("Starting WebSocket server on %s:%s", self.host, self.port)
        async with websockets.serve(self.handle_message, self.host, self.port):
            logger.info("WebSocket server started successfully")
            await asyncio.Future()  # Run forever


async def main() -> None:
    """Main entry point for the backend server."""
    logging.basicConfig(level=logging.INFO)
    backend = DelibBackend()
    await backend.start_server()


if __name__ == "__main__":
    asyncio.run(main())
