"""Quantum-walk chain simulator package"""
