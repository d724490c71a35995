# Test package for the quantum-walk toolkit
