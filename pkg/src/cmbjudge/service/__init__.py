from .app import create_app
from .runtime import DispatchLoop, JudgeService, LocalAgentRunner, MultiSink

__all__ = ["DispatchLoop", "JudgeService", "LocalAgentRunner", "MultiSink", "create_app"]
