from app.web.routes import router
from app.web.server import create_app

__all__ = ['router', 'create_app']
