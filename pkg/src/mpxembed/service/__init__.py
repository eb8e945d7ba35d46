from .app import ApiError, Service, create_app
from .render import DEFAULT_PALETTE, RenderError, parse_color, render_composite

__all__ = ["ApiError", "DEFAULT_PALETTE", "RenderError", "Service", "create_app",
           "parse_color", "render_composite"]
