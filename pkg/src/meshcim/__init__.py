"""meshcim: mapping compiler + cycle-stepped simulator for a 2-D mesh of
compute-in-memory tiles that accumulate partial sums in transit.

The package is organized around the pipeline:

    netspec  - workload model and golden int8 inference oracle
    isa      - 16-bit control words and periodic schedule tables
    mapper   - tile allocation, weight blocking, schedule generation
    fabric   - the tile-mesh simulator (slot-stepped, event-emitting)
    energy   - event pricing, power/efficiency reporting
    cli      - validate / map / run / report / bench commands
"""

__version__ = "0.1.0"
