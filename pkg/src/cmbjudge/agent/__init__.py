from .runner import JobWorkspace, judge_submission
from .sandbox import SandboxSpec, SandboxedExecutor, execute_sandboxed
from .service import AgentService, HttpAgentLoop
from .toolchain import (
    DEFAULT_C_TOOLCHAIN,
    CompileReport,
    ToolchainConfig,
    ToolchainError,
    full_compile,
    quick_compile,
)

__all__ = [
    "AgentService",
    "CompileReport",
    "DEFAULT_C_TOOLCHAIN",
    "HttpAgentLoop",
    "JobWorkspace",
    "SandboxSpec",
    "SandboxedExecutor",
    "ToolchainConfig",
    "ToolchainError",
    "execute_sandboxed",
    "full_compile",
    "judge_submission",
    "quick_compile",
]
