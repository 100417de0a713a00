"""HTTP layer: pydantic schemas and the FastAPI app."""
