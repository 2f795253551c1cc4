"""
Rendering Exceptions
"""
from typing import Optional


class RenderError(ValueError):
    pass


class RendererUnavailable(RenderError):
    """The external renderer executable cannot be found or started"""

    def __init__(self, renderer_path: str):
        super().__init__(f"renderer {renderer_path!r} is not available; install Graphviz or set RENDERER_PATH")
        self.renderer_path = renderer_path


class RendererFailed(RenderError):
    def __init__(self, returncode: Optional[int], diagnostics: str):
        status = f"exit status {returncode}" if returncode is not None else "timeout"
        super().__init__(f"renderer failed ({status}): {diagnostics.strip()}")
        self.returncode = returncode
        self.diagnostics = diagnostics
