from .app import ServerConfig, create_app
from .models import build_model

__version__ = "0.1.0"
__all__ = ["ServerConfig", "create_app", "build_model", "__version__"]
