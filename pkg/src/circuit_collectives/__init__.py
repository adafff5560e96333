# Circuit collectives package
