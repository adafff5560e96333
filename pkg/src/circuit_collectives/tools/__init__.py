# Simulator tools package
