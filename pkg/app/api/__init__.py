from fastapi import APIRouter

from app.api.v1 import v1_router

# Create the main API router; recognition routes are served at the root
api_router = APIRouter()

api_router.include_router(v1_router)
