"""Servers package for the Ising spinor toolkit"""
