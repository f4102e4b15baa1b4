from fastapi import APIRouter

from app.api.v1.recognition import router as recognition_router

# Create the API v1 router
v1_router = APIRouter()

v1_router.include_router(recognition_router, tags=["Recognition"])
