"""Services package for the Ising spinor toolkit"""
