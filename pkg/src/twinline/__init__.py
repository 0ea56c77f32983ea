"""twinline: a desk-scale digital twin of a conveyor factory line.

Layers, south to north:

- ``twinline.factory``  - simulated physical line (pallets, stops, elevators)
- ``twinline.plc``      - soft PLC scanning a tag table, mission arbitration
- ``twinline.protocol`` - binary tag server / pub-sub wire protocol
- ``twinline.gateway``  - app-key auth, IP whitelisting, namespace bridge
- ``twinline.core``     - Thing model, mission handshake, pallet estimation, KPIs
- ``twinline.harness``  - deterministic in-process wiring, fault injection, traces
- ``twinline.cli``      - scenario runner and operator commands
"""

__version__ = "0.1.0"
