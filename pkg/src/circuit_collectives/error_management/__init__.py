# Error management package
