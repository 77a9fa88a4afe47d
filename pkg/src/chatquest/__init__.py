"""chatquest: a corpus-driven conversational game engine.

An authored narrative corpus defines a character for an LLM to play, a ladder
of levels, and the trigger phrases a player must hit in free-form chat to
advance. The engine runs sessions against that corpus; a FastAPI service and a
small CLI wrap it.
"""

__version__ = "0.1.0"
