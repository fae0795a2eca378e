from .app import create_app
from .session import SessionManager, SessionRequest, reconstruct_final_state

__all__ = ["create_app", "SessionManager", "SessionRequest", "reconstruct_final_state"]
