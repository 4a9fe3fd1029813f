# Global configuration module for MASSIVE
from .settings import Settings, get_settings
from .threading import configure_threading

__all__ = ['Settings', 'configure_threading', 'get_settings']
