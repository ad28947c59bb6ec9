"""Utils package for the Ising spinor toolkit"""
