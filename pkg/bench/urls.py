from django.urls import path
from . import views

urlpatterns = [
    path('health/', views.health, name='health'),
    path('presets/', views.list_presets, name='list_presets'),
    path('mesh/', views.generate_mesh, name='generate_mesh'),
    path('run/', views.run, name='run'),
]
