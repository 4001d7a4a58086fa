"""Entry point for running as python -m strataquad"""
from strataquad.main import app

if __name__ == "__main__":
    app()
