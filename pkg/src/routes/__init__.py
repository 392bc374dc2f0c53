# src/routes/__init__.py