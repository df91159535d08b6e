"""
URL configuration for pose_proxemics project.
"""
from django.urls import path, include

urlpatterns = [
    path('api/', include('core.urls')),  # API endpoints
]
