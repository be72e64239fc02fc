from django.urls import path, include


urlpatterns = [
    path('api/bench/', include('bench.urls')),
]
