"""API routers package for the Ising spinor toolkit"""
