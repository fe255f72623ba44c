# The router is imported on first use
__all__ = ["get_parser"]


def get_parser():
    # Lazy import to avoid circular imports
    from app.cli.router import parser
    return parser
