"""
URL configuration for core app API endpoints.
"""
from django.urls import path

from core.views import localize_view, monitor_view, task_error_view

urlpatterns = [
    # Inference (rate limited)
    path('localize/', localize_view, name='localize'),

    # Proxemics verdicts
    path('monitor/', monitor_view, name='monitor'),

    # Height-ambiguity error table
    path('task-error/', task_error_view, name='task-error'),
]
